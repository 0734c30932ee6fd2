#pragma once

#include <optional>
#include <span>
#include <string>

#include "funreg/learner.hpp"
#include "funreg/model.hpp"
#include "funreg/types.hpp"

namespace funreg {

// Parameters of the step-size series sum_i gamma_i^2 exp(-lambda S_i) / (1 + S_i^nu)
// with gamma_i = gamma1 i^-mu and S_i the step-size tail sum.
struct SeriesBoundCase {
  Scalar nu = 0.0;      // >= 0
  Scalar mu = 0.5;      // (0,1)
  Scalar gamma1 = 0.1;  // (0,1)
  Scalar lambda = 0.1;  // > 0 (the exact sum also accepts 0)
  Index k = 1;          // >= 1
};

// The explicit constants from the series-bound proof. Fields tied to a case
// range that does not apply are NaN.
struct AppendixConstants {
  Scalar d_mu = 0.0;        // (1 - 2^{mu-1}) / (1 - mu)
  Scalar C_mu = 0.0;        // 1 + C_mu1 + C_mu2            (nu = 1)
  Scalar C_mu_hat = 0.0;    // 1 + C_mu_hat1 + C_mu_hat2    (0 < nu < 1)
  Scalar C_mu_tilde = 0.0;  // nu = 0, mu > 1/2
  Scalar C_mu_bar = 0.0;    // 1 + C_mu_bar1 + tail         (nu > 1)
  Scalar C_mu1 = 0.0;
  Scalar C_mu2 = 0.0;
  Scalar C_mu_hat1 = 0.0;
  Scalar C_mu_hat2 = 0.0;
  Scalar C_mu_bar1 = 0.0;
};

enum class SeriesBranch {
  Nu1,            // nu = 1, 0 < mu < 1
  NuSubMuLow,     // 0 < nu < 1, mu < 1/2
  NuSubMuHigh,    // 0 < nu < 1, 1/2 <= mu < 1
  Nu0,            // nu = 0, 1/2 < mu < 1
  NuSuper,        // nu > 1
};

std::string branch_name(SeriesBranch branch);

// [(alpha/e)^{2 alpha} + C_*^{2 alpha}] / [exp(lambda sum gamma_j) (1 + (sum gamma_j)^{2 alpha})].
// Empty gamma list uses the empty-product convention (sum = 0). Requires
// gamma_j (C_* + lambda) <= 1 for every j.
Scalar lemma3_rhs(Scalar alpha, Scalar C_star, std::span<const Scalar> gammas, Scalar lambda);

// Exact direct summation of the series; this is the brute-force oracle the
// closed-form bound is tested against. nu = 0 means no tail-sum denominator.
Scalar lemma4_lhs(const SeriesBoundCase& c);

struct Lemma4Rhs {
  Scalar bound = 0.0;
  AppendixConstants constants;
  SeriesBranch branch = SeriesBranch::Nu1;
};

// The closed-form bound, branch picked by (nu, mu) among the five printed
// cases. (nu, mu) pairs outside every case (nu = 0 with mu <= 1/2) raise
// UnsupportedBranchError.
Lemma4Rhs lemma4_rhs(const SeriesBoundCase& c);

// All constants evaluated at a concrete (mu, nu, gamma1).
AppendixConstants appendix_constants(Scalar mu, Scalar nu, Scalar gamma1);

struct CorollaryCaps {
  Scalar cap_c1 = 0.0;                // gamma1 cap making the nu=1 series small enough
  std::optional<Scalar> cap_c1S;      // capacity version C_1^S (needs s, Tr(T_K^s))
};

// Step-size caps. The printed C_mu and C_mu_bar fold a min{., gamma1} factor,
// which makes the cap inequality circular in gamma1; caps are evaluated with
// that factor at its gamma1-free ceiling (gamma1 >= 1 - mu), the regime the
// corollaries' own use of the caps lands in.
CorollaryCaps corollary_caps(Scalar mu, Scalar c, Scalar kappa_product_sq,
                             std::optional<Scalar> s, std::optional<Scalar> trace_TKs);

// [2 (1+c) (1 + kappa1^2 kappa2^2)^2 (1 + mu^{-1})]^{-1}; also the C_2^S of the
// constant-step prediction theorem.
Scalar theorem5_cap(Scalar mu, Scalar c, Scalar kappa_product_sq);

// C_2*^S = [2 (sqrt(c)+c) Tr(T_K^s) ((2-s)/(2e))^{2-s} + (k1 k2)^{4-2s}) (2 + 1/(1-s))]^{-1}
Scalar theorem3_capacity_cap(Scalar s, Scalar c, Scalar kappa_product_sq, Scalar trace_TKs);

enum class CapacityMode { Benign, Capacity };

struct DecompositionRhs {
  Scalar approx_term = 0.0;   // exact omega-product approximation term
  Scalar sample_term = 0.0;   // cumulative sample series with the uniform bound inside
  Scalar total = 0.0;
  // closed-form approximation bound under the source condition, when available
  std::optional<Scalar> approx_specialized;
};

// Right-hand side of the prediction error decomposition after k steps:
// (||omega_1^k(T_K + lambda I) L_C^{1/2} beta_lambda|| + ||L_C^{1/2}(beta_lambda - beta*)||)^2
// plus the cumulative sample series, with E[excess error] replaced by the
// uniform bound the way the rate proofs do. Capacity mode swaps the series
// prefactor and tail exponent.
DecompositionRhs decomposition_rhs_prediction(const ModelInstance& instance,
                                              const StepSchedule& schedule,
                                              const RegularizationPlan& plan, Index k,
                                              CapacityMode mode, Scalar s = 1.0);

// K-norm analogue built on f_lambda.
DecompositionRhs decomposition_rhs_estimation(const ModelInstance& instance,
                                              const StepSchedule& schedule,
                                              const RegularizationPlan& plan, Index k,
                                              CapacityMode mode, Scalar s = 1.0,
                                              Scalar rel_cutoff = 1e-10);

// 8 kappa_2^2 ||beta*||_2^2 + sigma^2
Scalar uniform_bound(const ModelInstance& instance);

}  // namespace funreg
