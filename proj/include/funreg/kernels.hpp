#pragma once

#include <string>

#include "funreg/grid.hpp"
#include "funreg/types.hpp"

namespace funreg {

enum class KernelFamily { Gaussian, Brownian, Sobolev1, CosineSeries };

// Mercer kernel catalog for the reproducing kernel K and covariance C.
// All families are symmetric, continuous and PSD on [0,1]^2.
struct KernelSpec {
  KernelFamily family = KernelFamily::Brownian;
  Scalar bandwidth = 0.0;  // gaussian: > 0
  Scalar decay = 0.0;      // cosine-series: p > 1
  Index length = 0;        // cosine-series: L >= 4

  static KernelSpec gaussian(Scalar bandwidth);
  static KernelSpec brownian();
  static KernelSpec sobolev1();
  // K(s,t) = sum_{l=1..L} l^-p * phi_l(s) phi_l(t), phi_l(t) = sqrt(2) cos(l pi t).
  // Eigenpairs are known in closed form, which gives direct control of
  // eigenvalue decay and exact source conditions.
  static KernelSpec cosine_series(Scalar decay, Index length);

  std::string name() const;
};

// Pointwise evaluation; s, t must lie in [0,1].
Scalar eval_kernel(const KernelSpec& spec, Scalar s, Scalar t);

// max over grid nodes of K(t,t); the kappa^2 estimate used in step-size
// admissibility. Grid-max rather than true sup; slight underestimation is
// acceptable for every use site.
Scalar diagonal_sup(const KernelSpec& spec, const Grid& grid);

}  // namespace funreg
