#pragma once

#include <optional>

#include "funreg/model.hpp"
#include "funreg/types.hpp"

namespace funreg {

struct ErrorRecord {
  Index k = 0;
  Scalar pred_error = 0.0;
  std::optional<Scalar> est_error_K;
  Scalar discarded_energy = 0.0;  // K-norm truncation diagnostic
};

// Excess prediction error of <beta, .>: <beta - beta*, L_C (beta - beta*)>_2,
// the quadratic-form realization of ||L_C^{1/2}(beta - beta*)||_2^2.
Scalar excess_prediction_error(const DiscreteFunction& beta, const ModelInstance& instance);

struct KNormResult {
  Scalar value = 0.0;
  Scalar discarded_energy = 0.0;  // squared L2 mass outside the retained L_K eigenspace
};

// ||beta - beta*||_K^2 through the L_K eigensystem: sum over retained modes of
// <beta - beta*, phi_l>^2 / lambda_l. Components below the cutoff cannot be
// given a finite K-norm on the grid and are reported, not silently dropped.
KNormResult estimation_error_K(const DiscreteFunction& beta, const ModelInstance& instance,
                               Scalar rel_cutoff);

struct McEstimate {
  Scalar estimate = 0.0;
  Scalar stderr_ = 0.0;
};

// Monte Carlo E_X[<beta - beta*, X>^2] with plug-in standard error.
McEstimate mc_excess_error(const DiscreteFunction& beta, const ModelInstance& instance,
                           Index n_draws, RandomStream& rng);

}  // namespace funreg
