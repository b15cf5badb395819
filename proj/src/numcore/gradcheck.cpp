#include <algorithm>
#include <stdexcept>

#include "magicnet/numcore.hpp"

namespace magicnet::numcore {

double finite_difference_check(const std::function<double()>& loss,
                               std::span<const std::span<double>> params,
                               std::span<const std::span<const double>> analytic, double eps) {
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("finite_difference_check: tensor count mismatch");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    if (p.size() != analytic[k].size()) {
      throw std::invalid_argument("finite_difference_check: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = loss();
      p[i] = saved - eps;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace magicnet::numcore
