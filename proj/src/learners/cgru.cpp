#include "internal.hpp"

namespace magicnet::learners {
namespace {

GruNet initial_network(const LearnerConfig& config) {
  numcore::Rng rng(config.seed);
  return detail::initial_network(config, rng);
}

}  // namespace

CGru::CGru(const LearnerConfig& config)
    : StreamLearner(config), model_(initial_network(config_), config_.adam) {}

double CGru::predict_window(const SequenceBatch& window) { return model_.predict(window); }

std::vector<double> CGru::train_batch(const SequenceBatch& sequences) {
  return model_.fit(sequences, config_.epochs);
}

ModelCheckpoint CGru::snapshot(std::size_t concept_index) const {
  ModelCheckpoint ckpt;
  ckpt.kind = LearnerKind::CGru;
  ckpt.seed = config_.seed;
  ckpt.concept_index = concept_index;
  ckpt.window = config_.window;
  ckpt.networks.push_back({concept_index, OptionKind::Plastic, model_.effective(), std::nullopt});
  return ckpt;
}

std::size_t CGru::parameter_count() const { return model_.effective().parameter_count(); }

}  // namespace magicnet::learners
