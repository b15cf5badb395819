#pragma once

// Experiment runner: config file -> per-seed streams, schedules, learner
// runs, CL evaluation and result files.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magicnet/detectors.hpp"
#include "magicnet/eval.hpp"
#include "magicnet/learners.hpp"
#include "magicnet/streams.hpp"

namespace magicnet::experiment {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kManifestFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

struct SourceConfig {
  enum class Kind { SineRW, Csv } kind = Kind::SineRW;
  // csv only
  std::filesystem::path path;
  streams::CsvSchema schema;
  std::optional<std::string> dataset;  // preset for k and segmentation
  streams::RealSourceSpec spec;
};

struct ExperimentConfig {
  SourceConfig source;
  std::vector<learners::LearnerKind> learners{learners::LearnerKind::Magic};
  std::size_t hidden = 50;
  std::size_t window = 10;
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  double lr = 0.01;
  std::size_t exp_size = 25;
  std::size_t num_batches = 30;
  std::size_t temporal_order = 0;
  std::size_t n_concepts = 4;
  std::size_t concept_length = 10000;
  double precision = 1.0;
  double recall = 1.0;
  std::size_t min_gap = detectors::kTpWindow;
  std::vector<std::uint64_t> seeds{0};
  std::size_t workers = 1;
  std::size_t withheld = 2000;
  std::size_t start_batches = 50;
  std::size_t race_length = eval::kRaceLength;
  bool checkpoints = true;

  learners::LearnerConfig learner_config(std::size_t input_dim, std::uint64_t seed) const;
};

/// Strict parse: unknown keys and out-of-range values raise ConfigError
/// naming the field and what is allowed.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Independent sub-seeds for the pieces of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id);

struct LearnerRun {
  learners::LearnerKind kind = learners::LearnerKind::CGru;
  eval::PrequentialReport prequential;
  eval::ClResult cl;
  double avg = 0.0;
  eval::Bwt bwt;
  std::size_t expansions = 0;  // MAGIC Net only
  std::size_t columns = 0;     // cPNN only
};

struct SeedRun {
  std::uint64_t seed = 0;
  streams::LabeledStream stream;  // after temporal augmentation
  detectors::DetectionSchedule schedule;
  std::vector<LearnerRun> learners;
};

/// Source stream for one seed, before temporal augmentation.
streams::LabeledStream build_stream(const ExperimentConfig& config, std::uint64_t seed);

/// Everything after stream construction: augmentation, schedule, learners,
/// CL evaluation.
SeedRun run_on_stream(const ExperimentConfig& config, const streams::LabeledStream& source,
                      std::uint64_t seed, bool trace = false);

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed, bool trace = false);

/// prequential_seed<S>.csv, cl_seed<S>.csv, schedule_seed<S>.csv, optional
/// traces and checkpoints, and summary_seed<S>.csv written last.
void write_seed_outputs(const SeedRun& run, const ExperimentConfig& config,
                        const std::filesystem::path& out, bool trace);

std::filesystem::path summary_path(const std::filesystem::path& out, std::uint64_t seed);

struct RunOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed_override;
  bool trace = false;
};

struct RunStatus {
  std::vector<std::uint64_t> completed;
  std::vector<std::uint64_t> resumed;  // already complete in the output directory
};

/// Fans seeds out over `workers` threads. Seeds whose summary file already
/// exists are skipped. Writes manifest.json at the end.
RunStatus run(const ExperimentConfig& config, const RunOptions& options);

/// Runs the config's learners on a dumped stream; the dump's seed drives the
/// schedule and learners.
RunStatus replay(const std::filesystem::path& dump, const ExperimentConfig& config,
                 const RunOptions& options);

/// Double formatting shared by all result files (shortest round-trip).
std::string format_double(double v);

}  // namespace magicnet::experiment
