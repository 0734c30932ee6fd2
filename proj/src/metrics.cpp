#include "funreg/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "funreg/errors.hpp"

namespace funreg {

Scalar excess_prediction_error(const DiscreteFunction& beta, const ModelInstance& instance) {
  require_same_grid(beta.grid, instance.grid, "excess_prediction_error");
  DiscreteFunction diff{beta.values - instance.beta_star.values, instance.grid};
  return std::max(0.0, inner_product(diff, instance.LC.apply(diff)));
}

KNormResult estimation_error_K(const DiscreteFunction& beta, const ModelInstance& instance,
                               Scalar rel_cutoff) {
  require_same_grid(beta.grid, instance.grid, "estimation_error_K");
  const SpectralDecomposition& dec = instance.LK_dec;
  const DiscreteFunction diff{beta.values - instance.beta_star.values, instance.grid};
  const Vector coeffs = dec.coefficients(diff);
  const Scalar cutoff = rel_cutoff * dec.lambda_max();
  Scalar value = 0.0;
  Scalar retained = 0.0;
  for (Index l = 0; l < coeffs.size(); ++l) {
    if (dec.eigenvalues()(l) > cutoff && dec.eigenvalues()(l) > 0.0) {
      value += coeffs(l) * coeffs(l) / dec.eigenvalues()(l);
      retained += coeffs(l) * coeffs(l);
    }
  }
  const Scalar total = inner_product(diff, diff);
  return KNormResult{value, std::max(0.0, total - retained)};
}

McEstimate mc_excess_error(const DiscreteFunction& beta, const ModelInstance& instance,
                           Index n_draws, RandomStream& rng) {
  if (n_draws < 100) throw std::invalid_argument("mc_excess_error: need at least 100 draws");
  require_same_grid(beta.grid, instance.grid, "mc_excess_error");
  const Vector diff = beta.values - instance.beta_star.values;
  // <diff, X> = (diff^T W kl_factor) xi; projecting once keeps the loop cheap
  const Vector proj =
      instance.kl_factor.transpose() * (instance.grid.weights().asDiagonal() * diff);
  Scalar sum = 0.0;
  Scalar sum_sq = 0.0;
  for (Index i = 0; i < n_draws; ++i) {
    Scalar dot = 0.0;
    for (Index l = 0; l < proj.size(); ++l) dot += proj(l) * rng.normal();
    const Scalar v = dot * dot;
    sum += v;
    sum_sq += v * v;
  }
  const Scalar n = static_cast<Scalar>(n_draws);
  const Scalar mean = sum / n;
  const Scalar var = std::max(0.0, sum_sq / n - mean * mean) * n / (n - 1.0);
  return McEstimate{mean, std::sqrt(var / n)};
}

}  // namespace funreg
