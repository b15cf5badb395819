#pragma once

#include "magicnet/learners.hpp"

namespace magicnet::learners::detail {

/// First network of every learner: Glorot weights from the learner seed.
/// Shared so MAGIC Net's plastic phase and cPNN's first column start from
/// exactly the cGRU weights.
inline GruNet initial_network(const LearnerConfig& config, numcore::Rng& rng) {
  return numcore::glorot_init(config.input_dim, config.hidden, rng);
}

}  // namespace magicnet::learners::detail
