#pragma once

namespace edffd {

/// Decay factor theta and grid spacing eta of the exponential kernel.
struct KernelConfig {
  double theta = 0.75;
  double eta = 1.0;

  double scale() const noexcept { return theta * eta; }
};

/// Cubic B-spline: 2/3 - |u|^2 + |u|^3/2 on |u|<1, (2-|u|)^3/6 on |u|<2, else 0.
double cubic_bspline(double u) noexcept;

/// Separable 2-D product beta(u1) * beta(u2).
double bspline_basis_product(double u1, double u2) noexcept;

/// exp(-r / (theta * eta)). No normalisation across control points.
/// Throws NonPositiveScale when theta * eta <= 0.
double exp_decay_weight(double r, const KernelConfig& cfg);

}  // namespace edffd
