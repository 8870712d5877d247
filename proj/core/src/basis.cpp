#include "edffd/basis.hpp"

#include <cmath>

#include "edffd/error.hpp"

namespace edffd {

double cubic_bspline(double u) noexcept {
  const double a = std::fabs(u);
  if (a < 1.0) return 2.0 / 3.0 + a * a * (0.5 * a - 1.0);
  if (a < 2.0) {
    const double t = 2.0 - a;
    return t * t * t / 6.0;
  }
  return 0.0;
}

double bspline_basis_product(double u1, double u2) noexcept {
  return cubic_bspline(u1) * cubic_bspline(u2);
}

double exp_decay_weight(double r, const KernelConfig& cfg) {
  const double s = cfg.scale();
  if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveScale, "theta * eta must be positive");
  return std::exp(-r / s);
}

}  // namespace edffd
