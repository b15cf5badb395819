#pragma once

// Streaming learners driven point by point: a continuously trained GRU
// (cGRU), MAGIC Net and the progressive-column baseline (cPNN).
//
// Per point the harness calls predict(x_t) and then learn_one(x_t, y_t).
// Points held out from training advance the clock through advance(x_t).

#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "magicnet/kappa.hpp"
#include "magicnet/masking.hpp"
#include "magicnet/numcore.hpp"

namespace magicnet::learners {

using masking::OptionKind;
using numcore::GruNet;
using numcore::SequenceBatch;
using numcore::Vector;

enum class LearnerKind : std::uint8_t { CGru = 0, Magic = 1, Cpnn = 2 };

std::string_view to_string(LearnerKind kind);
/// Accepts "cgru", "magic", "cpnn"; throws std::invalid_argument otherwise.
LearnerKind learner_kind_from_string(std::string_view name);

struct LearnerConfig {
  std::size_t input_dim = 2;
  std::size_t hidden = 50;
  std::size_t window = 10;
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  numcore::AdamConfig adam{};
  std::size_t exp_size = 25;
  std::size_t num_batches = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The last `length` feature vectors, oldest first.
class RollingWindow {
 public:
  RollingWindow(std::size_t length, std::size_t dim);

  void push(std::span<const double> x);
  std::size_t filled() const { return filled_; }
  std::size_t length() const { return length_; }

  /// One sequence of exactly `length` steps, left-padded with zero vectors
  /// while fewer points have arrived.
  SequenceBatch sequence() const;

 private:
  std::size_t length_;
  std::size_t dim_;
  std::size_t filled_ = 0;
  std::size_t head_ = 0;  // slot the next push writes
  std::vector<double> ring_;
};

struct LabeledVector {
  Vector x;
  int y = 0;
};

/// Stride-1 windows over (tail ++ batch); each sequence is labelled with
/// the label of its last point. Yields tail.size() + batch.size() - W + 1
/// sequences (none if that is not positive).
SequenceBatch build_training_sequences(std::span<const LabeledVector> tail,
                                       std::span<const LabeledVector> batch, std::size_t window);

/// One left-padded window ending at each point of a flat row-major series.
SequenceBatch sliding_windows(std::span<const double> features, std::size_t dim,
                              std::size_t window);

struct TrainEvent {
  std::size_t batch_index = 0;
  std::size_t sequences = 0;
  std::vector<double> losses;  // loss before each epoch's update
};

/// A network kept up to date for inference and trained by full-batch Adam.
/// Either a plain GRU (all weights learnable) or a masked/expanded network
/// over a frozen base (only masks and new weights learnable).
class LiveModel {
 public:
  LiveModel(GruNet net, numcore::AdamConfig adam);
  LiveModel(masking::MaskedNetwork net, numcore::AdamConfig adam);

  std::vector<double> probabilities(const SequenceBatch& seqs) const;
  double predict(const SequenceBatch& window) const { return probabilities(window).front(); }

  /// `epochs` Adam steps on the mean BCE of `seqs`; returns the loss seen
  /// before each step.
  std::vector<double> fit(const SequenceBatch& seqs, std::size_t epochs);

  const GruNet& effective() const { return effective_; }
  const numcore::PackedNet& packed() const { return packed_; }
  const masking::MaskedNetwork* masked() const;
  const numcore::AdamState& adam() const { return adam_; }
  std::size_t trainable_count() const;

 private:
  void refresh();
  std::vector<std::span<double>> variables();

  std::variant<GruNet, masking::MaskedNetwork> model_;
  numcore::AdamState adam_;
  GruNet effective_;
  numcore::PackedNet packed_;
};

struct CheckpointNetwork {
  std::size_t concept_index = 0;
  OptionKind option = OptionKind::Plastic;
  GruNet net;
  std::optional<masking::MaskSet> raw_mask;

  bool operator==(const CheckpointNetwork&) const = default;
};

/// Inference-only copy of a learner. For MAGIC Net the networks are the
/// stored concept snapshots followed by the live network; for cPNN they are
/// the columns in order; for cGRU there is exactly one.
struct ModelCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  LearnerKind kind = LearnerKind::CGru;
  std::uint64_t seed = 0;
  std::size_t concept_index = 0;
  std::size_t window = 0;
  std::vector<CheckpointNetwork> networks;

  bool operator==(const ModelCheckpoint&) const = default;
};

/// Probability of class 1 from every candidate network of a checkpoint
/// (outer index) for every sequence of `windows` (inner index). cPNN columns
/// are evaluated as a cascade.
std::vector<std::vector<double>> candidate_probabilities(const ModelCheckpoint& ckpt,
                                                         const SequenceBatch& windows);

/// Replays a checkpoint. predict() answers with the last network, which is
/// the one the learner itself was using when the snapshot was taken.
class InferenceModel {
 public:
  explicit InferenceModel(ModelCheckpoint ckpt);

  std::vector<std::vector<double>> candidate_probabilities(const SequenceBatch& windows) const;
  std::vector<double> predict(const SequenceBatch& windows) const;
  const ModelCheckpoint& checkpoint() const { return ckpt_; }

 private:
  ModelCheckpoint ckpt_;
  std::vector<numcore::PackedNet> packed_;
};

InferenceModel restore(ModelCheckpoint ckpt);

class StreamLearner {
 public:
  explicit StreamLearner(const LearnerConfig& config);
  virtual ~StreamLearner() = default;

  /// Pushes x into the rolling window and returns P(y = 1).
  double predict(std::span<const double> x);

  /// Reveals the label of the point just predicted and adds it to the
  /// mini-batch; trains when the mini-batch reaches B points.
  std::optional<TrainEvent> learn_one(std::span<const double> x, int y);

  /// Advances the rolling window without predicting or training.
  void advance(std::span<const double> x);

  virtual void on_drift_detected() = 0;
  virtual ModelCheckpoint snapshot(std::size_t concept_index) const = 0;
  virtual LearnerKind kind() const = 0;
  virtual std::size_t parameter_count() const = 0;

  const LearnerConfig& config() const { return config_; }
  std::size_t batches_trained() const { return batches_trained_; }
  std::size_t pending_points() const { return batch_.size(); }

 protected:
  virtual double predict_window(const SequenceBatch& window) = 0;
  virtual void observe_label(int /*y*/) {}
  virtual std::vector<double> train_batch(const SequenceBatch& sequences) = 0;

  void discard_partial_batch() { batch_.clear(); }

  LearnerConfig config_;

 private:
  RollingWindow window_;
  std::vector<LabeledVector> batch_;
  std::vector<LabeledVector> tail_;
  std::size_t batches_trained_ = 0;
};

class CGru final : public StreamLearner {
 public:
  explicit CGru(const LearnerConfig& config);

  /// cGRU keeps training through drifts; detections are ignored.
  void on_drift_detected() override {}
  ModelCheckpoint snapshot(std::size_t concept_index) const override;
  LearnerKind kind() const override { return LearnerKind::CGru; }
  std::size_t parameter_count() const override;

  const LiveModel& model() const { return model_; }

 protected:
  double predict_window(const SequenceBatch& window) override;
  std::vector<double> train_batch(const SequenceBatch& sequences) override;

 private:
  LiveModel model_;
};

class MagicNet final : public StreamLearner {
 public:
  enum class Mode { Plastic, Ensemble, Committed };

  struct Option {
    OptionKind kind;
    LiveModel model;
    eval::KappaAccumulator kappa;  // prequential, since the detection
    double last_probability = 0.5;
  };

  explicit MagicNet(const LearnerConfig& config);

  void on_drift_detected() override;
  ModelCheckpoint snapshot(std::size_t concept_index) const override;
  LearnerKind kind() const override { return LearnerKind::Magic; }
  /// Parameters of the networks currently held: the plastic net, or the
  /// frozen base plus every live option's trainable tensors.
  std::size_t parameter_count() const override;

  Mode mode() const { return mode_; }
  const std::vector<Option>& options() const { return options_; }
  /// Index into options() of the option answering now.
  std::size_t leader() const;
  const masking::MaskStore& mask_store() const { return store_; }
  const masking::FrozenBase& frozen_base() const { return base_; }
  std::size_t batches_since_detection() const { return batches_since_detection_; }
  std::size_t detections() const { return detections_; }
  /// Option kept at the end of each finished ensemble phase, in order.
  const std::vector<OptionKind>& resolutions() const { return resolutions_; }
  /// Finished ensembles won by Expand, plus a pending ensemble led by Expand.
  std::size_t expansion_count() const;
  /// Detections where MaskFineTune had no stored mask and started randomly.
  std::size_t finetune_fallbacks() const { return finetune_fallbacks_; }
  /// Effective weights of the network answering now.
  const GruNet& active_network() const;

 protected:
  double predict_window(const SequenceBatch& window) override;
  void observe_label(int y) override;
  std::vector<double> train_batch(const SequenceBatch& sequences) override;

 private:
  void resolve_ensemble();

  Mode mode_ = Mode::Plastic;
  std::optional<LiveModel> plastic_;
  masking::FrozenBase base_;
  std::vector<Option> options_;
  masking::MaskStore store_;
  numcore::Rng mask_rng_;
  std::size_t batches_since_detection_ = 0;
  std::size_t concept_index_ = 0;
  std::size_t detections_ = 0;
  std::size_t finetune_fallbacks_ = 0;
  std::vector<OptionKind> resolutions_;
  bool prediction_pending_ = false;
};

class Cpnn final : public StreamLearner {
 public:
  explicit Cpnn(const LearnerConfig& config);

  /// Freezes the current column and appends one that reads x ++ h(prev).
  void on_drift_detected() override;
  ModelCheckpoint snapshot(std::size_t concept_index) const override;
  LearnerKind kind() const override { return LearnerKind::Cpnn; }
  std::size_t parameter_count() const override;

  std::size_t column_count() const { return frozen_.size() + 1; }
  const std::vector<GruNet>& frozen_columns() const { return frozen_; }
  const LiveModel& current_column() const { return current_; }

 protected:
  double predict_window(const SequenceBatch& window) override;
  std::vector<double> train_batch(const SequenceBatch& sequences) override;

 private:
  numcore::Rng rng_;
  std::vector<GruNet> frozen_;
  std::vector<numcore::PackedNet> frozen_packed_;
  LiveModel current_;
};

/// Input of the column after `columns`: raw features concatenated with the
/// last column's hidden state at the same step. Returns `raw` unchanged when
/// `columns` is empty.
SequenceBatch cascade_input(std::span<const numcore::PackedNet> columns, const SequenceBatch& raw);

/// Probabilities of every column of a cascade, first column first.
std::vector<std::vector<double>> cascade_probabilities(std::span<const numcore::PackedNet> columns,
                                                       const SequenceBatch& raw);

std::unique_ptr<StreamLearner> make_learner(LearnerKind kind, const LearnerConfig& config);

}  // namespace magicnet::learners
