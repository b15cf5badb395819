#pragma once

#include <random>
#include <vector>

#include "magicnet/streams.hpp"

namespace magicnet::streams::detail {

// Gives concept i (>= 2) the labeler of a concept at least two positions
// earlier, with probability one half.
template <typename T>
void maybe_recur(std::vector<T>& labelers, std::mt19937_64& rng) {
  if (labelers.size() < 3) return;
  std::bernoulli_distribution coin(0.5);
  if (!coin(rng)) return;
  std::uniform_int_distribution<std::size_t> pick_i(2, labelers.size() - 1);
  const std::size_t i = pick_i(rng);
  std::uniform_int_distribution<std::size_t> pick_j(0, i - 2);
  labelers[i] = labelers[pick_j(rng)];
}

}  // namespace magicnet::streams::detail
