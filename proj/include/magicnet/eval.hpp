#pragma once

// Prequential (test-then-train) evaluation with detection-anchored start/end
// scores, continual-learning evaluation over concept checkpoints, the
// AVG/BWT summaries and checkpoint persistence.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "magicnet/detectors.hpp"
#include "magicnet/kappa.hpp"
#include "magicnet/learners.hpp"
#include "magicnet/streams.hpp"

namespace magicnet::eval {

using learners::ModelCheckpoint;

// ---------------------------------------------------------------------------
// Prequential

struct PrequentialOptions {
  std::size_t withheld = 2000;     // tail of each concept kept out as its test set
  std::size_t start_batches = 50;  // start score taken this many mini-batches after a detection
  bool trace = false;
};

/// Scores for concept j >= 1. The anchor is the first detection inside the
/// concept; start is the Kappa over the start_batches * B points after it
/// (absent when the concept has no detection, another detection resets the
/// accumulator first, or the scored part of the concept ends earlier). end
/// is the Kappa at the concept's last scored point.
struct ConceptScore {
  std::size_t concept_index = 0;
  std::optional<std::size_t> anchor;
  std::optional<std::size_t> start_t;  // first point after the start window
  std::optional<double> start;
  double end = 0.0;
};

struct TracePoint {
  std::size_t t = 0;
  double probability = 0.0;
  int label = 0;
  double running_kappa = 0.0;
};

struct TestSet {
  std::size_t concept_index = 0;
  std::size_t first_t = 0;  // stream index of the first point
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

struct PrequentialReport {
  std::vector<ConceptScore> concepts;
  double start = 0.0;  // mean over concepts with a start score
  double end = 0.0;    // mean over concepts 1..n-1
  std::size_t start_count = 0;
  std::size_t end_count = 0;

  std::vector<double> probabilities;  // one per scored point, in stream order
  std::vector<TracePoint> trace;      // filled when requested
  std::vector<ModelCheckpoint> checkpoints;  // after each concept
  std::vector<TestSet> test_sets;
  std::vector<std::size_t> parameter_counts;  // at each concept end
  std::size_t detections_applied = 0;
};

/// Runs the learner over the stream: per point predict, score, learn_one;
/// the last `withheld` points of each concept only advance the window.
/// Detections fire before the point they are stamped with and reset the
/// Kappa accumulator.
PrequentialReport run_prequential(learners::StreamLearner& learner,
                                  const streams::LabeledStream& stream,
                                  const detectors::DetectionSchedule& schedule,
                                  const PrequentialOptions& options = {});

/// The withheld tail of every concept.
std::vector<TestSet> extract_test_sets(const streams::LabeledStream& stream, std::size_t withheld);

// ---------------------------------------------------------------------------
// Continual-learning evaluation

inline constexpr std::size_t kRaceLength = 500;

/// Lower-triangular score matrix, R(i, j) for j <= i.
class RMatrix {
 public:
  explicit RMatrix(std::size_t n = 0);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j);
  double operator()(std::size_t i, std::size_t j) const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const;
  std::size_t n_;
  std::vector<double> cells_;
};

struct CheckpointScore {
  double kappa = 0.0;
  std::size_t selected = 0;  // candidate answering after the race
  std::vector<double> race_kappas;  // per candidate over the race points
  std::vector<double> emitted;       // probability emitted per test point
};

/// Checkpoint on one test set. Every candidate network runs for the first
/// `race_length` points; at each of those points the candidate with the best
/// Kappa over the earlier points answers (ties go to the newest candidate).
/// Afterwards the race winner answers alone. Test windows are zero-padded at
/// the start of the test set.
CheckpointScore evaluate_checkpoint(const ModelCheckpoint& ckpt, const TestSet& test,
                                    std::size_t race_length = kRaceLength);

struct ClResult {
  RMatrix r;
  std::vector<std::vector<std::size_t>> selected;  // [i][j]
};

ClResult run_cl_eval(const std::vector<ModelCheckpoint>& checkpoints,
                     const std::vector<TestSet>& test_sets, std::size_t race_length = kRaceLength);

double avg_metric(const RMatrix& r);

struct Bwt {
  double value = 0.0;
  bool defined = false;  // false for a single concept
};
Bwt bwt_metric(const RMatrix& r);

// ---------------------------------------------------------------------------
// Checkpoint persistence

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Little-endian binary: "MGNC", u32 version, header fields, then every
/// tensor as (u64 rows, u64 cols, f64 values).
std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace magicnet::eval
