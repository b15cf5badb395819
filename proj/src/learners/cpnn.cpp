#include "internal.hpp"

namespace magicnet::learners {

Cpnn::Cpnn(const LearnerConfig& config)
    : StreamLearner(config),
      rng_(config.seed),
      current_(detail::initial_network(config_, rng_), config_.adam) {}

double Cpnn::predict_window(const SequenceBatch& window) {
  return current_.predict(cascade_input(frozen_packed_, window));
}

std::vector<double> Cpnn::train_batch(const SequenceBatch& sequences) {
  // Frozen columns are deterministic functions of the input, so their hidden
  // states are computed once per mini-batch rather than once per epoch.
  auto input = cascade_input(frozen_packed_, sequences);
  return current_.fit(input, config_.epochs);
}

void Cpnn::on_drift_detected() {
  const GruNet& done = current_.effective();
  const std::size_t prev_hidden = done.hidden_dim();
  frozen_.push_back(done);
  frozen_packed_.push_back(numcore::pack(done));
  current_ = LiveModel(
      numcore::glorot_init(config_.input_dim + prev_hidden, config_.hidden, rng_), config_.adam);
}

std::size_t Cpnn::parameter_count() const {
  std::size_t n = current_.effective().parameter_count();
  for (const auto& col : frozen_) n += col.parameter_count();
  return n;
}

ModelCheckpoint Cpnn::snapshot(std::size_t concept_index) const {
  ModelCheckpoint ckpt;
  ckpt.kind = LearnerKind::Cpnn;
  ckpt.seed = config_.seed;
  ckpt.concept_index = concept_index;
  ckpt.window = config_.window;
  for (std::size_t i = 0; i < frozen_.size(); ++i) {
    ckpt.networks.push_back({i, OptionKind::Plastic, frozen_[i], std::nullopt});
  }
  ckpt.networks.push_back({frozen_.size(), OptionKind::Plastic, current_.effective(), std::nullopt});
  return ckpt;
}

}  // namespace magicnet::learners
