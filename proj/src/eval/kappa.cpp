#include "magicnet/kappa.hpp"

namespace magicnet::eval {

double cohen_kappa(const Confusion& c) {
  const auto total = c.total();
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  const double p_o = static_cast<double>(c.tp + c.tn) / n;
  const double label_pos = static_cast<double>(c.tp + c.fn) / n;
  const double pred_pos = static_cast<double>(c.tp + c.fp) / n;
  const double p_e = label_pos * pred_pos + (1.0 - label_pos) * (1.0 - pred_pos);
  if (p_e >= 1.0) return 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace magicnet::eval
