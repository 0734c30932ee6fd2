#include "funreg/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "funreg/errors.hpp"

namespace funreg {

namespace {

// Modes with sigma_l <= kKlCutoff * sigma_max are dropped from the KL factor;
// keeps the per-draw normal count stable against eigensolver roundoff.
constexpr Scalar kKlCutoff = 1e-12;

Matrix kl_factor_from(const SpectralDecomposition& dec, Index& modes) {
  const Scalar cutoff = kKlCutoff * dec.lambda_max();
  modes = 0;
  for (Index l = 0; l < dec.eigenvalues().size(); ++l)
    if (dec.eigenvalues()(l) > cutoff) ++modes;
  Matrix factor(dec.grid().size(), modes);
  for (Index l = 0; l < modes; ++l)
    factor.col(l) = dec.eigenfunctions().col(l) * std::sqrt(dec.eigenvalues()(l));
  return factor;
}

Vector gaussian_vector(Index n, RandomStream& rng) {
  Vector xi(n);
  for (Index i = 0; i < n; ++i) xi(i) = rng.normal();
  return xi;
}

void check_exponent(Scalar e, const char* what) {
  if (!(e > 0.0) || e > 1.0) throw std::invalid_argument(std::string(what) + " must lie in (0,1]");
}

}  // namespace

DiscreteFunction sample_X(const SpectralDecomposition& LC_dec, RandomStream& rng) {
  Index modes = 0;
  const Matrix factor = kl_factor_from(LC_dec, modes);
  return DiscreteFunction{factor * gaussian_vector(modes, rng), LC_dec.grid()};
}

DiscreteFunction sample_X(const ModelInstance& instance, RandomStream& rng) {
  return DiscreteFunction{instance.kl_factor * gaussian_vector(instance.kl_modes, rng),
                          instance.grid};
}

Sample sample_pair(const ModelInstance& instance, RandomStream& rng) {
  DiscreteFunction x = sample_X(instance, rng);
  const Scalar y = inner_product(instance.beta_star, x) + instance.noise_sigma * rng.normal();
  return Sample{std::move(x), y};
}

PredictionConstruction make_beta_star_prediction(Scalar theta, const DiscreteFunction& g_star,
                                                 const SpectralDecomposition& TK_dec,
                                                 const SpectralDecomposition& LC_dec,
                                                 Scalar rel_cutoff) {
  check_exponent(theta, "make_beta_star_prediction: theta");
  require_same_grid(TK_dec.grid(), LC_dec.grid(), "make_beta_star_prediction");

  const SpectralDecomposition tk_pow = powered(TK_dec, theta);
  const DiscreteFunction h = tk_pow.synthesize(
      tk_pow.eigenvalues().cwiseProduct(TK_dec.coefficients(g_star)).eval());

  const SpectralDecomposition lc_half = powered(LC_dec, 0.5);
  const PinvResult pr = pinv_apply(lc_half, h, rel_cutoff);
  if (pr.discarded_fraction > 0.01)
    throw IllPosedSourceError(
        "make_beta_star_prediction: T_K^theta g* has " + std::to_string(pr.discarded_fraction) +
        " of its energy outside the resolvable range of L_C^{1/2}; "
        "construct beta* through a coefficient_profile instead");

  // retained part of h, i.e. L_C^{1/2} beta*
  const DiscreteFunction ph = fractional_power(LC_dec, 0.5).apply(pr.value);
  const DiscreteFunction g_eff = pinv_apply(tk_pow, ph, rel_cutoff).value;
  const DiscreteFunction check = tk_pow.synthesize(
      tk_pow.eigenvalues().cwiseProduct(TK_dec.coefficients(g_eff)).eval());

  DiscreteFunction diff = ph;
  diff.values -= check.values;
  const Scalar denom = l2_norm(check);
  const Scalar residual = denom > 0 ? l2_norm(diff) / denom : l2_norm(diff);

  return PredictionConstruction{pr.value, g_eff, l2_norm(g_eff), residual, pr.discarded_fraction};
}

EstimationConstruction make_beta_star_estimation(Scalar r, const DiscreteFunction& g_star_,
                                                 const SpectralDecomposition& LK_dec,
                                                 const SpectralDecomposition& TC_dec) {
  check_exponent(r, "make_beta_star_estimation: r");
  require_same_grid(LK_dec.grid(), TC_dec.grid(), "make_beta_star_estimation");
  const SpectralDecomposition tc_pow = powered(TC_dec, r);
  const DiscreteFunction h = tc_pow.synthesize(
      tc_pow.eigenvalues().cwiseProduct(TC_dec.coefficients(g_star_)).eval());
  DiscreteFunction beta = fractional_power(LK_dec, 0.5).apply(h);
  return EstimationConstruction{std::move(beta), l2_norm(h)};
}

DiscreteFunction beta_lambda(const ModelInstance& instance, Scalar lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("beta_lambda: lambda must be > 0");
  const Index m = instance.grid.size();
  const Matrix lklc = instance.LK.matrix() * instance.LC.matrix();
  const Matrix a = lambda * Matrix::Identity(m, m) + lklc;
  const Vector rhs = lklc * instance.beta_star.values;
  Vector sol = a.partialPivLu().solve(rhs);

  DiscreteFunction beta{std::move(sol), instance.grid};
  DiscreteFunction residual{a * beta.values - rhs, instance.grid};
  const Scalar scale = lambda * l2_norm(beta) +
                       l2_norm(DiscreteFunction{rhs, instance.grid});
  if (scale > 0 && l2_norm(residual) > 1e-8 * scale)
    throw std::runtime_error("beta_lambda: linear solve residual above tolerance");
  return beta;
}

DiscreteFunction f_lambda(const ModelInstance& instance, Scalar lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("f_lambda: lambda must be > 0");
  const Index m = instance.grid.size();
  const Matrix a = lambda * Matrix::Identity(m, m) + instance.TC.matrix();
  const Vector rhs =
      instance.LK_half.matrix() * (instance.LC.matrix() * instance.beta_star.values);
  return DiscreteFunction{a.partialPivLu().solve(rhs), instance.grid};
}

ModelInstance build_commuting_instance(const CommutingConfig& config) {
  check_exponent(config.exponent, "build_commuting_instance: exponent");
  if (config.noise_sigma < 0.0 || !std::isfinite(config.noise_sigma))
    throw std::invalid_argument("build_commuting_instance: noise_sigma must be >= 0");
  const Grid grid = build_grid(config.grid_size, config.scheme);
  const KernelSpec k_spec = KernelSpec::cosine_series(config.p_k, config.length);
  const KernelSpec c_spec = KernelSpec::cosine_series(config.p_c, config.length);

  DiscreteOperator lk = assemble(k_spec, grid);
  DiscreteOperator lc = assemble(c_spec, grid);
  SpectralDecomposition lk_dec = decompose(lk);
  SpectralDecomposition lc_dec = decompose(lc);
  DiscreteOperator tk = compose_TK(lk, lc_dec);
  DiscreteOperator tc = compose_TC(lk_dec, lc);
  SpectralDecomposition tk_dec = decompose(tk);
  SpectralDecomposition tc_dec = decompose(tc);
  DiscreteOperator lk_half = fractional_power(lk_dec, 0.5);
  DiscreteOperator lc_half = fractional_power(lc_dec, 0.5);

  const Index L = config.length;
  Vector a(L), b(L);
  for (Index l = 0; l < L; ++l) {
    a(l) = std::pow(static_cast<Scalar>(l + 1), -config.p_k);
    b(l) = std::pow(static_cast<Scalar>(l + 1), -config.p_c);
  }
  Vector g(L);
  if (config.seed_coeffs) {
    if (config.seed_coeffs->size() != L)
      throw std::invalid_argument("build_commuting_instance: seed_coeffs length mismatch");
    g = *config.seed_coeffs;
  } else {
    for (Index l = 0; l < L; ++l)
      g(l) = config.seed_scale * std::pow(static_cast<Scalar>(l + 1), -config.seed_decay);
  }

  Matrix basis(grid.size(), L);
  for (Index l = 0; l < L; ++l)
    basis.col(l) = (grid.nodes().array() * static_cast<Scalar>(l + 1) * std::numbers::pi)
                       .cos() * std::numbers::sqrt2;

  const Vector sigma = a.cwiseProduct(b);  // shared T_K = T_C spectrum
  Vector beta_coeffs(L);
  const Scalar ex = config.exponent;
  if (config.source_kind == SourceKind::Prediction) {
    // L_C^{1/2} beta* = T_K^theta g*  =>  beta_l = (a b)^theta b^{-1/2} g_l
    beta_coeffs = sigma.array().pow(ex) * b.array().pow(-0.5) * g.array();
  } else {
    // beta* = L_K^{1/2} T_C^r g_*  =>  beta_l = a^{1/2} (a b)^r g_l
    beta_coeffs = a.array().sqrt() * sigma.array().pow(ex) * g.array();
  }
  DiscreteFunction beta_star{basis * beta_coeffs, grid};

  const Scalar dual_ex = config.dual_exponent.value_or(config.exponent);
  check_exponent(dual_ex, "build_commuting_instance: dual exponent");
  const Scalar theta = config.source_kind == SourceKind::Prediction ? ex : dual_ex;
  const Scalar r = config.source_kind == SourceKind::Estimation ? ex : dual_ex;
  // both source profiles are exact in the shared eigenbasis
  const Vector g_pred = beta_coeffs.array() * b.array().sqrt() / sigma.array().pow(theta);
  const Vector g_est = beta_coeffs.array() / (a.array().sqrt() * sigma.array().pow(r));

  SourceCondition pred{SourceKind::Prediction, theta,
                       DiscreteFunction{basis * g_pred, grid}, std::sqrt(g_pred.squaredNorm()),
                       g_pred};
  SourceCondition est{SourceKind::Estimation, r, DiscreteFunction{basis * g_est, grid},
                      std::sqrt(g_est.squaredNorm()), g_est};

  Index kl_modes = 0;
  Matrix kl = kl_factor_from(lc_dec, kl_modes);
  const Scalar beta_norm_sq = inner_product(beta_star, beta_star);
  const Scalar k1 = diagonal_sup(k_spec, grid);
  const Scalar k2 = diagonal_sup(c_spec, grid);

  return ModelInstance{grid,
                       k_spec,
                       c_spec,
                       std::move(lk),
                       std::move(lc),
                       std::move(tk),
                       std::move(tc),
                       std::move(lk_dec),
                       std::move(lc_dec),
                       std::move(tk_dec),
                       std::move(tc_dec),
                       std::move(lk_half),
                       std::move(lc_half),
                       std::move(beta_star),
                       config.noise_sigma,
                       3.0,
                       k1,
                       k2,
                       beta_norm_sq,
                       std::move(pred),
                       std::move(est),
                       CommutingInfo{a, b, beta_coeffs, std::move(basis)},
                       std::move(kl),
                       kl_modes};
}

ModelInstance build_general_instance(const GeneralConfig& config) {
  check_exponent(config.exponent, "build_general_instance: exponent");
  if (config.noise_sigma < 0.0 || !std::isfinite(config.noise_sigma))
    throw std::invalid_argument("build_general_instance: noise_sigma must be >= 0");
  const Grid grid = build_grid(config.grid_size, config.scheme);

  DiscreteOperator lk = assemble(config.kernel_k, grid);
  DiscreteOperator lc = assemble(config.kernel_c, grid);
  SpectralDecomposition lk_dec = decompose(lk);
  SpectralDecomposition lc_dec = decompose(lc);
  DiscreteOperator tk = compose_TK(lk, lc_dec);
  DiscreteOperator tc = compose_TC(lk_dec, lc);
  SpectralDecomposition tk_dec = decompose(tk);
  SpectralDecomposition tc_dec = decompose(tc);
  DiscreteOperator lk_half = fractional_power(lk_dec, 0.5);
  DiscreteOperator lc_half = fractional_power(lc_dec, 0.5);

  // seed g in the leading eigenbasis of the composite operator carrying the
  // source condition
  const SpectralDecomposition& seed_dec =
      config.source_kind == SourceKind::Prediction ? tk_dec : tc_dec;
  const Index modes = std::min(config.seed_modes, grid.size());
  Vector coeffs = Vector::Zero(grid.size());
  for (Index l = 0; l < modes; ++l)
    coeffs(l) = config.seed_scale * std::pow(static_cast<Scalar>(l + 1), -config.seed_decay);
  const DiscreteFunction g = seed_dec.synthesize(coeffs);

  DiscreteFunction beta_star = zero_function(grid);
  std::optional<SourceCondition> pred;
  std::optional<SourceCondition> est;
  if (config.source_kind == SourceKind::Prediction) {
    PredictionConstruction built =
        make_beta_star_prediction(config.exponent, g, tk_dec, lc_dec, config.rel_cutoff);
    beta_star = built.beta_star;
    pred = SourceCondition{SourceKind::Prediction, config.exponent, built.g_effective,
                           built.g_norm, std::nullopt};
  } else {
    EstimationConstruction built =
        make_beta_star_estimation(config.exponent, g, lk_dec, tc_dec);
    beta_star = built.beta_star;
    est = SourceCondition{SourceKind::Estimation, config.exponent, g, l2_norm(g), std::nullopt};
  }

  Index kl_modes = 0;
  Matrix kl = kl_factor_from(lc_dec, kl_modes);
  const Scalar beta_norm_sq = inner_product(beta_star, beta_star);
  const Scalar k1 = diagonal_sup(config.kernel_k, grid);
  const Scalar k2 = diagonal_sup(config.kernel_c, grid);

  return ModelInstance{grid,
                       config.kernel_k,
                       config.kernel_c,
                       std::move(lk),
                       std::move(lc),
                       std::move(tk),
                       std::move(tc),
                       std::move(lk_dec),
                       std::move(lc_dec),
                       std::move(tk_dec),
                       std::move(tc_dec),
                       std::move(lk_half),
                       std::move(lc_half),
                       std::move(beta_star),
                       config.noise_sigma,
                       3.0,
                       k1,
                       k2,
                       beta_norm_sq,
                       std::move(pred),
                       std::move(est),
                       std::nullopt,
                       std::move(kl),
                       kl_modes};
}

}  // namespace funreg
