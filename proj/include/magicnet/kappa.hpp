#pragma once

#include <cstdint>

namespace magicnet::eval {

/// 2x2 confusion counts for a binary problem, positive class = 1.
struct Confusion {
  std::uint64_t tp = 0;  // label 1, predicted 1
  std::uint64_t fn = 0;  // label 1, predicted 0
  std::uint64_t fp = 0;  // label 0, predicted 1
  std::uint64_t tn = 0;  // label 0, predicted 0

  std::uint64_t total() const { return tp + fn + fp + tn; }
  bool operator==(const Confusion&) const = default;
};

/// Cohen's kappa (p_o - p_e) / (1 - p_e). Returns 0 when the table is empty
/// or when p_e = 1 (both raters constant on the same class).
double cohen_kappa(const Confusion& c);

/// Running confusion table with O(1) kappa queries.
class KappaAccumulator {
 public:
  void add(bool predicted, int label) {
    if (label != 0) {
      predicted ? ++counts_.tp : ++counts_.fn;
    } else {
      predicted ? ++counts_.fp : ++counts_.tn;
    }
  }
  void reset() { counts_ = {}; }
  double kappa() const { return cohen_kappa(counts_); }
  const Confusion& confusion() const { return counts_; }
  std::uint64_t count() const { return counts_.total(); }

 private:
  Confusion counts_;
};

}  // namespace magicnet::eval
