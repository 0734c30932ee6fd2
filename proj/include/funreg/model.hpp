#pragma once

#include <optional>
#include <utility>

#include "funreg/grid.hpp"
#include "funreg/kernels.hpp"
#include "funreg/operators.hpp"
#include "funreg/random.hpp"
#include "funreg/types.hpp"

namespace funreg {

enum class SourceKind { Prediction, Estimation };

// Regularity of the slope function: prediction kind places
// L_C^{1/2} beta* = T_K^theta g*, estimation kind places beta* = L_K^{1/2} T_C^r g_*.
struct SourceCondition {
  SourceKind kind = SourceKind::Prediction;
  Scalar exponent = 0.5;  // theta or r, in (0,1]
  DiscreteFunction seed;  // g* or g_*
  Scalar seed_norm = 0.0;  // ||g||_2 recorded at construction; enters the bound evaluators
  std::optional<Vector> coefficient_profile;  // eigen-coefficients when built diagonally
};

// Shared-eigenbasis bookkeeping for the commuting cosine-series model; makes
// theta, r and s analytically exact.
struct CommutingInfo {
  Vector a;            // L_K eigenvalues l^-pK
  Vector b;            // L_C eigenvalues l^-pC
  Vector beta_coeffs;  // beta* coefficients on the shared basis
  Matrix basis;        // grid samples of sqrt(2) cos(l pi t), one column per mode
};

// Everything a trajectory or bound evaluator needs, built once and shared
// read-only across trial workers.
struct ModelInstance {
  Grid grid;
  KernelSpec K_spec;
  KernelSpec C_spec;
  DiscreteOperator LK;
  DiscreteOperator LC;
  DiscreteOperator TK;
  DiscreteOperator TC;
  SpectralDecomposition LK_dec;
  SpectralDecomposition LC_dec;
  SpectralDecomposition TK_dec;
  SpectralDecomposition TC_dec;
  DiscreteOperator LK_half;
  DiscreteOperator LC_half;
  DiscreteFunction beta_star;
  Scalar noise_sigma = 0.0;
  Scalar kurtosis_c = 3.0;  // 3 for Gaussian X
  Scalar kappa1_sq = 0.0;   // max_t K(t,t) over the grid
  Scalar kappa2_sq = 0.0;   // max_t C(t,t) over the grid
  Scalar beta_star_norm_sq = 0.0;
  std::optional<SourceCondition> prediction_source;
  std::optional<SourceCondition> estimation_source;
  std::optional<CommutingInfo> commuting;
  Matrix kl_factor;  // Psi diag(sqrt(sigma_l)) over retained covariance modes
  Index kl_modes = 0;
};

struct Sample {
  DiscreteFunction X;
  Scalar Y;
};

// Karhunen-Loeve draw X = sum_l sqrt(sigma_l) xi_l psi_l from an arbitrary
// covariance eigensystem (standalone form; instances cache the factor).
DiscreteFunction sample_X(const SpectralDecomposition& LC_dec, RandomStream& rng);

DiscreteFunction sample_X(const ModelInstance& instance, RandomStream& rng);

// Y = <beta*, X>_2 + sigma * zeta
Sample sample_pair(const ModelInstance& instance, RandomStream& rng);

struct PredictionConstruction {
  DiscreteFunction beta_star;
  DiscreteFunction g_effective;  // projection of g* the construction can realize
  Scalar g_norm = 0.0;
  Scalar residual_rel = 0.0;     // ||L_C^{1/2} beta* - T_K^theta g_eff|| / ||T_K^theta g_eff||
  Scalar discarded_fraction = 0.0;
};

// beta* from L_C^{1/2} beta* = T_K^theta g*, realized through the pseudo-inverse
// of L_C^{1/2}. Throws IllPosedSourceError when more than 1% of the energy of
// T_K^theta g* is outside the resolvable range.
PredictionConstruction make_beta_star_prediction(Scalar theta, const DiscreteFunction& g_star,
                                                 const SpectralDecomposition& TK_dec,
                                                 const SpectralDecomposition& LC_dec,
                                                 Scalar rel_cutoff);

struct EstimationConstruction {
  DiscreteFunction beta_star;
  Scalar k_norm = 0.0;  // ||beta*||_K = ||T_C^r g_*||_2 by the isometry
};

// beta* = L_K^{1/2} T_C^r g_*; bounded forward maps only, beta* lands in H_K
// by construction.
EstimationConstruction make_beta_star_estimation(Scalar r, const DiscreteFunction& g_star_,
                                                 const SpectralDecomposition& LK_dec,
                                                 const SpectralDecomposition& TC_dec);

// Population Tikhonov solution: (lambda I + L_K L_C) beta = L_K L_C beta*,
// solved as a dense linear system.
DiscreteFunction beta_lambda(const ModelInstance& instance, Scalar lambda);

// f_lambda = (lambda I + T_C)^{-1} L_K^{1/2} L_C beta*
DiscreteFunction f_lambda(const ModelInstance& instance, Scalar lambda);

struct CommutingConfig {
  Scalar p_k = 2.0;
  Scalar p_c = 2.0;
  Index length = 16;
  Index grid_size = 129;
  QuadScheme scheme = QuadScheme::GaussLegendre;
  SourceKind source_kind = SourceKind::Prediction;
  Scalar exponent = 0.5;                  // theta or r
  std::optional<Scalar> dual_exponent;    // exponent for the other source kind
  Scalar seed_decay = 0.51;               // g_l = seed_scale * l^-seed_decay
  Scalar seed_scale = 1.0;
  std::optional<Vector> seed_coeffs;
  Scalar noise_sigma = 0.5;
};

// K and C cosine-series with decays p_k, p_c sharing eigenfunctions; source
// conditions hold in closed form and both g-profiles are recorded exactly.
ModelInstance build_commuting_instance(const CommutingConfig& config);

struct GeneralConfig {
  KernelSpec kernel_k;
  KernelSpec kernel_c;
  Index grid_size = 129;
  QuadScheme scheme = QuadScheme::GaussLegendre;
  SourceKind source_kind = SourceKind::Prediction;
  Scalar exponent = 0.5;
  Scalar seed_decay = 1.0;
  Scalar seed_scale = 1.0;
  Index seed_modes = 16;
  Scalar noise_sigma = 0.5;
  Scalar rel_cutoff = 1e-10;
};

// Non-commuting kernel pair; g is seeded in the leading eigenbasis of the
// relevant composite operator and beta* built through make_beta_star_*.
ModelInstance build_general_instance(const GeneralConfig& config);

}  // namespace funreg
