#include "funreg/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "funreg/errors.hpp"

namespace funreg {

namespace {

constexpr Scalar kNaN = std::numeric_limits<Scalar>::quiet_NaN();

void check_case(const SeriesBoundCase& c, bool allow_zero_lambda) {
  if (c.nu < 0.0) throw std::invalid_argument("series bound: nu must be >= 0");
  if (!(c.mu > 0.0) || !(c.mu < 1.0))
    throw std::invalid_argument("series bound: mu must lie in (0,1)");
  if (!(c.gamma1 > 0.0) || !(c.gamma1 < 1.0))
    throw std::invalid_argument("series bound: gamma1 must lie in (0,1)");
  if (c.lambda < 0.0 || (!allow_zero_lambda && c.lambda == 0.0))
    throw std::invalid_argument("series bound: lambda must be positive");
  if (c.k < 1) throw std::invalid_argument("series bound: k must be >= 1");
}

Scalar d_mu_of(Scalar mu) { return (1.0 - std::pow(2.0, mu - 1.0)) / (1.0 - mu); }

// tail-sum power with the 0^nu = 0 convention; nu = 0 drops the denominator
Scalar tail_pow(Scalar S, Scalar nu) {
  if (nu == 0.0 || S <= 0.0) return 0.0;
  return std::pow(S, nu);
}

}  // namespace

std::string branch_name(SeriesBranch branch) {
  switch (branch) {
    case SeriesBranch::Nu1: return "nu=1";
    case SeriesBranch::NuSubMuLow: return "0<nu<1, mu<1/2";
    case SeriesBranch::NuSubMuHigh: return "0<nu<1, mu>=1/2";
    case SeriesBranch::Nu0: return "nu=0, mu>1/2";
    case SeriesBranch::NuSuper: return "nu>1";
  }
  return "unknown";
}

Scalar lemma3_rhs(Scalar alpha, Scalar C_star, std::span<const Scalar> gammas, Scalar lambda) {
  if (!(alpha > 0.0)) throw std::invalid_argument("lemma3_rhs: alpha must be > 0");
  if (!(C_star > 0.0)) throw std::invalid_argument("lemma3_rhs: C_star must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("lemma3_rhs: lambda must be >= 0");
  Scalar sum = 0.0;
  for (std::size_t j = 0; j < gammas.size(); ++j) {
    if (gammas[j] * (C_star + lambda) > 1.0 + 1e-12)
      throw std::invalid_argument("lemma3_rhs: gamma_j (C_* + lambda) > 1 at j=" +
                                  std::to_string(j));
    sum += gammas[j];
  }
  const Scalar numerator =
      std::pow(alpha / std::numbers::e, 2.0 * alpha) + std::pow(C_star, 2.0 * alpha);
  const Scalar tail = sum > 0.0 ? std::pow(sum, 2.0 * alpha) : 0.0;
  return numerator / (std::exp(lambda * sum) * (1.0 + tail));
}

Scalar lemma4_lhs(const SeriesBoundCase& c) {
  check_case(c, /*allow_zero_lambda=*/true);
  // iterate i = k..1 keeping the tail sum S_i = sum_{j=i+1..k} gamma_j
  Scalar S = 0.0;
  Scalar total = 0.0;
  Scalar gamma_next = 0.0;
  for (Index i = c.k; i >= 1; --i) {
    S += gamma_next;
    const Scalar gamma_i = c.gamma1 * std::pow(static_cast<Scalar>(i), -c.mu);
    total += gamma_i * gamma_i * std::exp(-c.lambda * S) / (1.0 + tail_pow(S, c.nu));
    gamma_next = gamma_i;
  }
  return total;
}

AppendixConstants appendix_constants(Scalar mu, Scalar nu, Scalar gamma1) {
  AppendixConstants k;
  k.d_mu = d_mu_of(mu);
  const Scalar abs2mu1 = std::abs(2.0 * mu - 1.0);
  const bool mu_half = mu == 0.5;

  k.C_mu1 = mu_half ? 4.0 : 4.0 / (abs2mu1 * (1.0 - std::pow(2.0, mu - 1.0)));
  k.C_mu2 = 18.0 / std::min(1.0 - mu, gamma1) * (1.0 - mu + std::log(2.0 - std::pow(2.0, mu - 1.0)));
  k.C_mu = 1.0 + k.C_mu1 + k.C_mu2;

  const Scalar min_pow = std::min(1.0, std::pow(gamma1 / (1.0 - mu), nu));

  if (nu > 0.0 && nu < 1.0) {
    k.C_mu_hat1 = mu_half ? std::pow(2.0, 1.0 + nu) : 2.0 / (abs2mu1 * std::pow(k.d_mu, nu));
    k.C_mu_hat2 = 18.0 / min_pow * std::pow(1.0 - std::pow(2.0, mu - 1.0), 1.0 - nu) /
                  ((1.0 - mu) * (1.0 - nu));
    k.C_mu_hat = 1.0 + k.C_mu_hat1 + k.C_mu_hat2;
  } else {
    k.C_mu_hat1 = k.C_mu_hat2 = k.C_mu_hat = kNaN;
  }

  if (mu > 0.5) {
    // nu = 0 case; the min factor is 1 there
    k.C_mu_tilde = 1.0 + 2.0 / (2.0 * mu - 1.0) + 18.0 * k.d_mu;
  } else {
    k.C_mu_tilde = kNaN;
  }

  if (nu > 1.0) {
    k.C_mu_bar1 = mu_half ? std::pow(std::numbers::e / 2.0, (nu - 3.0) / 2.0) /
                                ((nu - 1.0) * std::pow(k.d_mu, nu))
                          : 2.0 / (abs2mu1 * std::pow(k.d_mu, nu));
    k.C_mu_bar = 1.0 + k.C_mu_bar1 + 18.0 / min_pow * nu / ((1.0 - mu) * (nu - 1.0));
  } else {
    k.C_mu_bar1 = k.C_mu_bar = kNaN;
  }
  return k;
}

Lemma4Rhs lemma4_rhs(const SeriesBoundCase& c) {
  check_case(c, /*allow_zero_lambda=*/false);
  const AppendixConstants consts = appendix_constants(c.mu, c.nu, c.gamma1);
  const Scalar kk = static_cast<Scalar>(c.k);
  const Scalar decayed = std::exp(-c.lambda * c.gamma1 * consts.d_mu * std::pow(kk, 1.0 - c.mu));
  const Scalar logk1 = std::log(kk + 1.0);

  Lemma4Rhs out;
  out.constants = consts;
  if (c.nu == 1.0) {
    out.branch = SeriesBranch::Nu1;
    out.bound = consts.C_mu * c.gamma1 *
                (decayed * std::pow(kk, -std::min(c.mu, 1.0 - c.mu)) + std::pow(kk, -c.mu)) *
                logk1;
  } else if (c.nu > 0.0 && c.nu < 1.0 && c.mu < 0.5) {
    out.branch = SeriesBranch::NuSubMuLow;
    out.bound = consts.C_mu_hat * c.gamma1 *
                std::pow(kk + 1.0, -c.mu + (1.0 - c.mu) * (1.0 - c.nu));
  } else if (c.nu > 0.0 && c.nu < 1.0) {
    out.branch = SeriesBranch::NuSubMuHigh;
    out.bound = consts.C_mu_hat * c.gamma1 *
                (std::pow(kk + 1.0, -c.mu + (1.0 - c.mu) * (1.0 - c.nu)) +
                 decayed * std::pow(kk, -c.nu * (1.0 - c.mu)) * logk1);
  } else if (c.nu == 0.0 && c.mu > 0.5) {
    out.branch = SeriesBranch::Nu0;
    out.bound = consts.C_mu_tilde * c.gamma1 * (decayed + std::pow(kk, 1.0 - 2.0 * c.mu));
  } else if (c.nu > 1.0) {
    out.branch = SeriesBranch::NuSuper;
    out.bound = consts.C_mu_bar * c.gamma1 *
                (decayed * std::pow(kk, -std::min(c.mu, c.nu * (1.0 - c.mu))) +
                 std::pow(kk, -c.mu));
  } else {
    throw UnsupportedBranchError(
        "lemma4_rhs: nu = 0 requires 1/2 < mu < 1; no printed branch covers (nu=" +
        std::to_string(c.nu) + ", mu=" + std::to_string(c.mu) + ")");
  }
  return out;
}

namespace {

// cap-free variants: the min{., gamma1} factors replaced by their
// gamma1 >= 1-mu ceiling
Scalar c_mu_capfree(Scalar mu) {
  const Scalar c1 = mu == 0.5 ? 4.0
                              : 4.0 / (std::abs(2.0 * mu - 1.0) * (1.0 - std::pow(2.0, mu - 1.0)));
  const Scalar c2 =
      18.0 / (1.0 - mu) * (1.0 - mu + std::log(2.0 - std::pow(2.0, mu - 1.0)));
  return 1.0 + c1 + c2;
}

Scalar c_mu_bar_capfree(Scalar mu, Scalar nu) {
  const Scalar dm = d_mu_of(mu);
  const Scalar c1 = mu == 0.5 ? std::pow(std::numbers::e / 2.0, (nu - 3.0) / 2.0) /
                                    ((nu - 1.0) * std::pow(dm, nu))
                              : 2.0 / (std::abs(2.0 * mu - 1.0) * std::pow(dm, nu));
  return 1.0 + c1 + 18.0 * nu / ((1.0 - mu) * (nu - 1.0));
}

}  // namespace

CorollaryCaps corollary_caps(Scalar mu, Scalar c, Scalar kappa_product_sq,
                             std::optional<Scalar> s, std::optional<Scalar> trace_TKs) {
  if (!(mu > 0.0) || !(mu < 1.0)) throw std::invalid_argument("corollary_caps: mu in (0,1)");
  if (!(c > 0.0) || !(kappa_product_sq > 0.0))
    throw std::invalid_argument("corollary_caps: constants must be positive");
  CorollaryCaps caps;
  caps.cap_c1 = 1.0 / (4.0 * c_mu_capfree(mu) * (1.0 + c) *
                       std::pow(1.0 + kappa_product_sq, 2.0) *
                       (std::numbers::ln2 + 1.0 / std::min(mu, 1.0 - mu)));
  if (s && trace_TKs) {
    if (!(*s > 0.0) || !(*s < 1.0))
      throw std::invalid_argument("corollary_caps: capacity s must lie in (0,1)");
    const Scalar nu = 2.0 - *s;
    const Scalar bracket = std::pow((2.0 - *s) / (2.0 * std::numbers::e), 2.0 - *s) +
                           std::pow(kappa_product_sq, (4.0 - 2.0 * *s) / 2.0);
    caps.cap_c1S = 1.0 / (4.0 * (std::sqrt(c) + c) * c_mu_bar_capfree(mu, nu) * *trace_TKs *
                          bracket);
  }
  return caps;
}

Scalar theorem5_cap(Scalar mu, Scalar c, Scalar kappa_product_sq) {
  if (!(mu > 0.0) || !(mu < 1.0)) throw std::invalid_argument("theorem5_cap: mu in (0,1)");
  return 1.0 / (2.0 * (1.0 + c) * std::pow(1.0 + kappa_product_sq, 2.0) * (1.0 + 1.0 / mu));
}

Scalar theorem3_capacity_cap(Scalar s, Scalar c, Scalar kappa_product_sq, Scalar trace_TKs) {
  if (!(s > 0.0) || !(s < 1.0))
    throw std::invalid_argument("theorem3_capacity_cap: s must lie in (0,1)");
  const Scalar bracket = std::pow((2.0 - s) / (2.0 * std::numbers::e), 2.0 - s) +
                         std::pow(kappa_product_sq, (4.0 - 2.0 * s) / 2.0);
  return 1.0 / (2.0 * (std::sqrt(c) + c) * trace_TKs * bracket * (2.0 + 1.0 / (1.0 - s)));
}

namespace {

void check_decomposition_inputs(const StepSchedule& schedule, const RegularizationPlan& plan,
                                Index k, CapacityMode mode, Scalar s, Scalar kk) {
  if (k < 0) throw std::invalid_argument("decomposition rhs: k must be >= 0");
  if (!(plan.lambda > 0.0)) throw std::invalid_argument("decomposition rhs: lambda must be > 0");
  if (mode == CapacityMode::Capacity && (!(s > 0.0) || !(s < 1.0)))
    throw std::invalid_argument("decomposition rhs: capacity mode needs s in (0,1)");
  if (k >= 1 && schedule.max_step() * (kk + plan.lambda) > 1.0 + 1e-12)
    throw StepSizeTooLargeError("decomposition rhs: gamma_k (kappa1^2 kappa2^2 + lambda) > 1", 1);
}

// sum over i of gamma_i^2 (sigma^2 + inner) / [exp(lambda S_i) (1 + S_i^tail_nu)];
// tail_nu < 0 means no tail denominator at all (the K-norm benign series).
Scalar sample_series(const std::vector<Scalar>& gammas, Scalar lambda, Scalar numerator,
                     Scalar tail_nu) {
  Scalar S = 0.0;
  Scalar total = 0.0;
  Scalar gamma_next = 0.0;
  for (std::size_t idx = gammas.size(); idx-- > 0;) {
    S += gamma_next;
    const Scalar g = gammas[idx];
    Scalar denom = std::exp(lambda * S);
    if (tail_nu >= 0.0) denom *= 1.0 + tail_pow(S, tail_nu);
    total += g * g * numerator / denom;
    gamma_next = g;
  }
  return total;
}

Scalar total_gamma(const std::vector<Scalar>& gammas) {
  Scalar t = 0.0;
  for (const Scalar g : gammas) t += g;
  return t;
}

// 2 ||g||^2 [ (e_x/e)^{2 e_x} + (k1 k2)^{4 e_x} ] / [exp(lambda G)(1 + G^{2 e_x})] + 2 lambda^{2 e_x} ||g||^2
Scalar specialized_approx(Scalar exponent, Scalar g_norm, Scalar kk, Scalar lambda, Scalar G) {
  const Scalar num = std::pow(exponent / std::numbers::e, 2.0 * exponent) +
                     std::pow(kk, 2.0 * exponent);  // (k1 k2)^{4 e} = (k1^2 k2^2)^{2 e}
  const Scalar tail = G > 0.0 ? std::pow(G, 2.0 * exponent) : 0.0;
  return 2.0 * g_norm * g_norm * num / (std::exp(lambda * G) * (1.0 + tail)) +
         2.0 * std::pow(lambda, 2.0 * exponent) * g_norm * g_norm;
}

}  // namespace

DecompositionRhs decomposition_rhs_prediction(const ModelInstance& instance,
                                              const StepSchedule& schedule,
                                              const RegularizationPlan& plan, Index k,
                                              CapacityMode mode, Scalar s) {
  const Scalar kk = instance.kappa1_sq * instance.kappa2_sq;
  check_decomposition_inputs(schedule, plan, k, mode, s, kk);
  const Scalar c = instance.kurtosis_c;
  const std::vector<Scalar> gammas = schedule.first(k);

  const DiscreteFunction blam = beta_lambda(instance, plan.lambda);
  const DiscreteOperator omega = omega_product(instance.TK_dec, gammas, plan.lambda);
  const Scalar a1 = l2_norm(omega.apply(instance.LC_half.apply(blam)));
  DiscreteFunction diff = blam;
  diff.values -= instance.beta_star.values;
  const Scalar a2 = l2_norm(instance.LC_half.apply(diff));

  DecompositionRhs out;
  out.approx_term = (a1 + a2) * (a1 + a2);

  const Scalar numerator = instance.noise_sigma * instance.noise_sigma + uniform_bound(instance);
  if (mode == CapacityMode::Benign) {
    const Scalar pref = std::pow(1.0 + kk, 2.0) * (1.0 + c);
    out.sample_term = pref * sample_series(gammas, plan.lambda, numerator, 1.0);
  } else {
    const Scalar pref = (std::sqrt(c) + c) * trace_power(instance.TK_dec, s) *
                        (std::pow((2.0 - s) / (2.0 * std::numbers::e), 2.0 - s) +
                         std::pow(kk, (4.0 - 2.0 * s) / 2.0));
    out.sample_term = pref * sample_series(gammas, plan.lambda, numerator, 2.0 - s);
  }
  out.total = out.approx_term + out.sample_term;

  if (instance.prediction_source) {
    out.approx_specialized =
        specialized_approx(instance.prediction_source->exponent,
                           instance.prediction_source->seed_norm, kk, plan.lambda,
                           total_gamma(gammas));
  }
  return out;
}

DecompositionRhs decomposition_rhs_estimation(const ModelInstance& instance,
                                              const StepSchedule& schedule,
                                              const RegularizationPlan& plan, Index k,
                                              CapacityMode mode, Scalar s, Scalar rel_cutoff) {
  const Scalar kk = instance.kappa1_sq * instance.kappa2_sq;
  check_decomposition_inputs(schedule, plan, k, mode, s, kk);
  const Scalar c = instance.kurtosis_c;
  const std::vector<Scalar> gammas = schedule.first(k);

  const DiscreteFunction flam = f_lambda(instance, plan.lambda);
  // ||omega_1^k(L_K L_C + lambda I) L_K^{1/2} f_lambda||_K = ||omega_1^k(T_C + lambda I) f_lambda||_2
  const DiscreteOperator omega = omega_product(instance.TC_dec, gammas, plan.lambda);
  const Scalar a1 = l2_norm(omega.apply(flam));

  Scalar a2 = 0.0;
  if (instance.estimation_source) {
    // ||L_K^{1/2} f_lambda - beta*||_K = ||f_lambda - T_C^r g_*||_2
    const SourceCondition& src = *instance.estimation_source;
    const SpectralDecomposition pow_tc = powered(instance.TC_dec, src.exponent);
    const DiscreteFunction h = pow_tc.synthesize(
        pow_tc.eigenvalues().cwiseProduct(instance.TC_dec.coefficients(src.seed)).eval());
    DiscreteFunction d = flam;
    d.values -= h.values;
    a2 = l2_norm(d);
  } else {
    const DiscreteFunction lk_half_f = instance.LK_half.apply(flam);
    a2 = std::sqrt(estimation_error_K(lk_half_f, instance, rel_cutoff).value);
  }

  DecompositionRhs out;
  out.approx_term = (a1 + a2) * (a1 + a2);

  const Scalar sigma_sq = instance.noise_sigma * instance.noise_sigma;
  const Scalar u = uniform_bound(instance);
  if (mode == CapacityMode::Benign) {
    const Scalar pref = kk * (1.0 + c);
    out.sample_term = pref * sample_series(gammas, plan.lambda, sigma_sq + u, -1.0);
  } else {
    const Scalar pref = std::sqrt(c) * trace_power(instance.TC_dec, s) *
                        (std::pow((1.0 - s) / (2.0 * std::numbers::e), 1.0 - s) +
                         std::pow(kk, 1.0 - s));
    out.sample_term =
        pref * sample_series(gammas, plan.lambda, sigma_sq + std::sqrt(c) * u, 1.0 - s);
  }
  out.total = out.approx_term + out.sample_term;

  if (instance.estimation_source) {
    out.approx_specialized =
        specialized_approx(instance.estimation_source->exponent,
                           instance.estimation_source->seed_norm, kk, plan.lambda,
                           total_gamma(gammas));
  }
  return out;
}

Scalar uniform_bound(const ModelInstance& instance) {
  return 8.0 * instance.kappa2_sq * instance.beta_star_norm_sq +
         instance.noise_sigma * instance.noise_sigma;
}

}  // namespace funreg
