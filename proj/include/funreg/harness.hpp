#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "funreg/bounds.hpp"
#include "funreg/learner.hpp"
#include "funreg/model.hpp"
#include "funreg/types.hpp"

namespace funreg {

enum class TheoremTag { T1, T2, T3, T4, T5, UnregularizedBaseline };

TheoremTag theorem_tag_from_string(const std::string& name);
std::string to_string(TheoremTag tag);

struct ScheduleChoice {
  Scalar mu = 0.0;
  Scalar lambda = 0.0;
  StepSchedule::Kind kind = StepSchedule::Kind::Polynomial;
  std::string branch;
};

// (mu, lambda, step kind) prescribed by the tagged theorem for sample size n.
// epsilon feeds the lambda exponent where the theorem has an epsilon branch
// and must lie in the theorem's allowed interval.
ScheduleChoice theorem_schedule(TheoremTag tag, Scalar theta_or_r, std::optional<Scalar> s,
                                Index n, Scalar epsilon);

struct ExperimentConfig {
  Index grid_size = 129;
  QuadScheme scheme = QuadScheme::GaussLegendre;

  bool commuting = true;
  Scalar p_k = 1.1;
  Scalar p_c = 1.1;
  Index length = 32;
  std::optional<KernelSpec> kernel_k;  // general (non-commuting) path
  std::optional<KernelSpec> kernel_c;

  SourceKind source_kind = SourceKind::Prediction;
  Scalar exponent = 0.5;
  std::optional<Scalar> dual_exponent;
  Scalar seed_decay = 0.51;
  Scalar seed_scale = 1.0;
  Scalar noise_sigma = 0.5;

  bool theorem_auto = true;
  StepSchedule::Kind schedule_kind = StepSchedule::Kind::Constant;
  Scalar gamma = 0.0;  // gamma1 / gamma0 for an explicit schedule
  Scalar schedule_mu = 0.0;

  TheoremTag theorem = TheoremTag::T3;
  Scalar epsilon = 0.05;
  std::optional<Scalar> capacity_s;

  std::vector<Index> n_list;
  Index trials = 50;
  std::uint64_t seed = 42;
  Scalar rel_cutoff = 1e-10;
  std::optional<Scalar> step_override;
  int jobs = 1;
  std::string out_dir = ".";
};

// Strict parse: unknown keys anywhere in the document are an error.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig default_config();

ModelInstance build_instance(const ExperimentConfig& config);

struct RatePoint {
  Index n = 0;
  Scalar mean = 0.0;
  Scalar stderr_ = 0.0;
  Scalar mu = 0.0;
  Scalar lambda = 0.0;
};

struct RateTrialRow {
  Index n = 0;
  Index trial = 0;
  Scalar pred_error = 0.0;
  Scalar est_error_K = 0.0;
  Scalar mu = 0.0;
  Scalar lambda = 0.0;
  std::uint64_t seed = 0;
};

struct FitResult {
  Scalar slope = 0.0;
  Scalar intercept = 0.0;
  Scalar slope_stderr = 0.0;
};

// Weighted least squares of log(mean) on log(n); weights from the delta-method
// stderr of the log when stderrs are positive.
FitResult fit_loglog(std::span<const Scalar> n, std::span<const Scalar> mean,
                     std::span<const Scalar> stderr_);

struct RateReport {
  std::vector<RatePoint> points;
  std::vector<RateTrialRow> raw;
  Scalar fitted_slope = 0.0;
  Scalar slope_stderr = 0.0;
  // slope of log(error / log(n+1)) when the active theorem prints a log factor
  std::optional<Scalar> fitted_slope_logadj;
  Scalar theoretical_slope = 0.0;
  Scalar tolerance = 0.15;
  bool pass = false;
  bool degenerate = false;
  bool step_cap_respected = true;
  bool step_override_used = false;
  Scalar epsilon_used = 0.0;
  std::string annotation;
};

RateReport run_rate_experiment(const ExperimentConfig& config);

struct AuditRow {
  Index k = 0;
  Scalar lambda = 0.0;
  Scalar measured = 0.0;
  Scalar bound_approx = 0.0;
  Scalar bound_sample = 0.0;
  Scalar bound_total = 0.0;
  Scalar mc_stderr = 0.0;
};

struct AuditCheck {
  std::string name;
  bool pass = false;
  Scalar worst_margin = 0.0;  // max of (measured - allowed); negative when passing
  std::string detail;
  std::vector<AuditRow> rows;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  bool pass = false;
};

// Dominance lattices: Lemma 3 over random diagonal operators, Lemma 4 over the
// printed-branch lattice, the uniform bound along trajectories, and the four
// error-decomposition right-hand sides against Monte Carlo error estimates.
AuditReport run_bound_audit(const ExperimentConfig& config);

// Curve CSV: header y,x_1,...,x_m then one row per observation.
std::vector<Sample> ingest_curves(const std::string& path, const Grid& grid);
void export_curves(const std::string& path, std::span<const Sample> data);

std::string format_double(Scalar v);

// rates CSVs: raw rows, per-n summary, and a plain-text report; returns the
// paths written.
std::vector<std::string> write_rate_outputs(const RateReport& report,
                                            const ExperimentConfig& config,
                                            const std::string& out_dir);
std::vector<std::string> write_audit_outputs(const AuditReport& report,
                                             const std::string& out_dir);

void parallel_for(int jobs, Index count, const std::function<void(Index)>& fn);

}  // namespace funreg
