#include <stdexcept>
#include <string>

#include "magicnet/eval.hpp"

namespace magicnet::eval {

RMatrix::RMatrix(std::size_t n) : n_(n), cells_(n * (n + 1) / 2, 0.0) {}

std::size_t RMatrix::index(std::size_t i, std::size_t j) const {
  if (i >= n_ || j > i) {
    throw std::out_of_range("RMatrix: (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") is outside the lower triangle of size " + std::to_string(n_));
  }
  return i * (i + 1) / 2 + j;
}

double& RMatrix::operator()(std::size_t i, std::size_t j) { return cells_[index(i, j)]; }
double RMatrix::operator()(std::size_t i, std::size_t j) const { return cells_[index(i, j)]; }

double avg_metric(const RMatrix& r) {
  const std::size_t n = r.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) sum += r(i, j);
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n + 1) / 2.0);
}

Bwt bwt_metric(const RMatrix& r) {
  const std::size_t n = r.size();
  if (n < 2) return {0.0, false};
  double sum = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) sum += r(i, j) - r(j, j);
  }
  return {sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0), true};
}

CheckpointScore evaluate_checkpoint(const ModelCheckpoint& ckpt, const TestSet& test,
                                    std::size_t race_length) {
  CheckpointScore score;
  if (test.size() == 0) return score;
  const auto windows = learners::sliding_windows(test.x, test.dim, ckpt.window);
  const auto candidates = learners::candidate_probabilities(ckpt, windows);
  const std::size_t k = candidates.size();

  std::vector<KappaAccumulator> race(k);
  KappaAccumulator emitted;
  score.emitted.reserve(test.size());
  std::size_t leader = k - 1;
  score.selected = k - 1;
  for (std::size_t t = 0; t < test.size(); ++t) {
    const int y = test.y[t];
    if (t < race_length) {
      leader = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (race[c].kappa() >= race[leader].kappa()) leader = c;
      }
      for (std::size_t c = 0; c < k; ++c) race[c].add(candidates[c][t] >= 0.5, y);
      if (t + 1 == std::min(race_length, test.size())) {
        // Winner over the whole race.
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
          if (race[c].kappa() >= race[best].kappa()) best = c;
        }
        score.selected = best;
        for (const auto& acc : race) score.race_kappas.push_back(acc.kappa());
      }
    } else {
      leader = score.selected;
    }
    const double p = candidates[leader][t];
    score.emitted.push_back(p);
    emitted.add(p >= 0.5, y);
  }
  score.kappa = emitted.kappa();
  return score;
}

ClResult run_cl_eval(const std::vector<ModelCheckpoint>& checkpoints,
                     const std::vector<TestSet>& test_sets, std::size_t race_length) {
  if (checkpoints.size() != test_sets.size()) {
    throw std::invalid_argument("run_cl_eval: " + std::to_string(checkpoints.size()) +
                                " checkpoints for " + std::to_string(test_sets.size()) +
                                " test sets");
  }
  const std::size_t n = checkpoints.size();
  ClResult result{RMatrix(n), std::vector<std::vector<std::size_t>>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const auto s = evaluate_checkpoint(checkpoints[i], test_sets[j], race_length);
      result.r(i, j) = s.kappa;
      result.selected[i].push_back(s.selected);
    }
  }
  return result;
}

}  // namespace magicnet::eval
