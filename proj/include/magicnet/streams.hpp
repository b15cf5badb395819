#pragma once

// Stream sources: SineRW synthetic generation, real-data ingestion and
// labelling, configuration assembly, temporal augmentation and dump/replay.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace magicnet::streams {

/// Raised for bad user-supplied configuration (unknown column, not enough
/// data, ...), as opposed to malformed input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Labelers

enum class BoundaryFamily : std::uint8_t { S1 = 1, S2 = 2 };
enum class Polarity : std::uint8_t { GeqIsOne = 0, LtIsOne = 1 };

/// S1: x1 - alpha - beta * sin(gamma * x2)
/// S2: x1 - alpha - beta * sin(gamma * pi * x2)
struct BoundaryFunction {
  BoundaryFamily family = BoundaryFamily::S1;
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 1.0;
  Polarity polarity = Polarity::GeqIsOne;

  double evaluate(double x1, double x2) const;
  int label(double x1, double x2) const;
  std::string describe() const;

  bool operator==(const BoundaryFunction&) const = default;
};

enum class LabelKind : std::uint8_t { F1 = 1, F2, F3, F4, F5 };
enum class LabelSign : std::uint8_t { Plus = 0, Minus = 1 };

/// Labels from a target series v with D_t = v_t - v_{t-1}:
///   F1: v_t > v_{t-1}           F2: v_t > Med(v_{t-k..t-1})
///   F3: v_t > Min(v_{t-k..t-1}) F4: D_t > D_{t-1}
///   F5: D_t > Med(D_{t-k..t-1})
/// Minus variants flip the label.
struct LabelFunction {
  LabelKind kind = LabelKind::F1;
  LabelSign sign = LabelSign::Plus;
  std::size_t k = 1;

  /// Number of leading points without a defined label.
  std::size_t lookback() const;
  std::string describe() const;

  bool operator==(const LabelFunction&) const = default;
};

using Labeler = std::variant<BoundaryFunction, LabelFunction>;
std::string describe(const Labeler& labeler);

// ---------------------------------------------------------------------------
// Configurations and materialised streams

enum class SourceKind : std::uint8_t { SineRW = 0, Real = 1 };

struct ConceptSpec {
  std::size_t length = 0;  // emitted points
  Labeler labeler;
  // Real sources only: segment name (group value, empty for the whole
  // series), first row of the slice inside that segment, and the number of
  // leading rows consumed as labelling history.
  std::string segment;
  std::size_t offset = 0;
  std::size_t skip = 0;

  bool operator==(const ConceptSpec&) const = default;
};

struct StreamConfiguration {
  SourceKind source = SourceKind::SineRW;
  std::vector<ConceptSpec> concepts;
  std::vector<std::size_t> drift_positions;  // first index of concepts 1..n-1
  std::uint64_t seed = 0;

  std::size_t total_length() const;
  bool operator==(const StreamConfiguration&) const = default;
};

struct LabeledStream {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major, size() * dim
  std::vector<int> y;
  std::vector<std::size_t> concept_starts;  // concept_starts[0] == 0
  std::vector<std::string> labelers;        // one description per concept
  std::uint64_t seed = 0;

  std::size_t size() const { return y.size(); }
  std::span<const double> features(std::size_t t) const { return {x.data() + t * dim, dim}; }
  std::size_t concept_count() const { return concept_starts.size(); }
  std::size_t concept_end(std::size_t c) const;
  std::size_t concept_of(std::size_t t) const;
  std::vector<std::size_t> drift_positions() const;

  bool operator==(const LabeledStream&) const = default;
};

// ---------------------------------------------------------------------------
// SineRW

/// Half-width of the uniform per-coordinate random-walk step.
inline constexpr double kWalkStep = 0.65;
inline constexpr std::size_t kModeWidth = 5;
inline constexpr std::uint64_t kDefaultPoolSeed = 2024;

/// y'_t = MODE(y_t, ..., y_{t-4}); during warm-up the majority over the
/// labels seen so far, with ties going to y_t.
std::vector<int> mode_labels(std::span<const int> raw);

/// 16 S1 and 16 S2 classifiers: 8 parameter draws per family, each used
/// with both polarities.
std::vector<BoundaryFunction> sample_boundary_pool(std::uint64_t seed = kDefaultPoolSeed);

/// Distinct boundary functions per concept, except that one later concept
/// may reuse an earlier (non-adjacent) function.
StreamConfiguration build_srw_configuration(std::size_t n_concepts, std::size_t concept_length,
                                            std::uint64_t seed,
                                            std::uint64_t pool_seed = kDefaultPoolSeed);

/// Points follow two independent reflected random walks in (0,1); labels are
/// the concept's boundary test smoothed by mode_labels within each concept.
LabeledStream sine_rw_generate(const StreamConfiguration& config, std::uint64_t seed);

/// Raw (un-smoothed) boundary labels for the walk of sine_rw_generate.
std::vector<int> sine_rw_raw_labels(const LabeledStream& stream, const StreamConfiguration& config);

// ---------------------------------------------------------------------------
// Real data

/// Labels for every point of v; std::nullopt where the lookback is missing.
std::vector<std::optional<int>> label_real(std::span<const double> v, const LabelFunction& f);

struct CsvSchema {
  std::vector<std::string> features;
  std::string target;
  std::optional<std::string> group;  // e.g. station id; one concept per group
  std::string missing_token;         // in addition to empty cells
  std::size_t tumbling_window = 0;   // 0 or 1 disables averaging
};

/// Rows are ordered by group (first appearance), so each group is a
/// contiguous range.
struct RealSeries {
  std::vector<std::string> feature_names;
  std::size_t dim = 0;
  std::vector<double> features;  // row-major
  std::vector<double> target;
  std::vector<std::string> groups;  // per row, empty when no group column

  std::size_t size() const { return target.size(); }
  /// Row indices belonging to `segment` (all rows for an empty name).
  std::vector<std::size_t> segment_rows(const std::string& segment) const;
  std::vector<std::string> group_names() const;
};

/// Linear interpolation between valid neighbours; leading/trailing gaps take
/// the nearest valid value. Throws ConfigError when every value is missing.
std::vector<double> interpolate_missing(std::span<const std::optional<double>> values);

/// Means over consecutive non-overlapping chunks; a partial last chunk is
/// dropped.
std::vector<double> tumbling_mean(std::span<const double> values, std::size_t width);

RealSeries ingest_csv(std::istream& in, const CsvSchema& schema);
RealSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Online per-feature standardisation: each point updates the running
/// mean/variance and is then scaled with them (variance floor 1e-8).
class RunningStandardizer {
 public:
  explicit RunningStandardizer(std::size_t dim);
  void transform(std::span<double> x);

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

enum class Segmentation : std::uint8_t { Groups = 0, Equal = 1 };

struct RealSourceSpec {
  std::size_t k = 5;
  Segmentation segmentation = Segmentation::Equal;

  /// Presets: "weather" (k=10, equal), "airquality" (k=5, groups),
  /// "power" (k=20, equal).
  static RealSourceSpec for_dataset(const std::string& name);
};

/// Picks segments and distinct F-functions per concept. concept_length = 0
/// uses whole segments. Throws ConfigError naming required vs available
/// points when the data is too short.
StreamConfiguration build_real_configuration(const RealSeries& series, const RealSourceSpec& spec,
                                             std::size_t n_concepts, std::size_t concept_length,
                                             std::uint64_t seed);

LabeledStream materialize_real(const RealSeries& series, const StreamConfiguration& config);

// ---------------------------------------------------------------------------

/// Appends (y_{t-1}, ..., y_{t-o}) to every feature vector; labels before
/// the stream head count as 0.
LabeledStream temporal_augment(const LabeledStream& stream, std::size_t order);

inline constexpr int kDumpFormatVersion = 1;

/// Writes `path` (rows t,x1..xd,y) and `path`.meta.json. Values use the
/// shortest round-trip representation, so a reload is bit-identical.
void dump_stream(const LabeledStream& stream, const std::filesystem::path& path);
LabeledStream load_stream(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& dump);

}  // namespace magicnet::streams
