#include "funreg/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "funreg/bounds.hpp"
#include "funreg/errors.hpp"

namespace funreg {

StepSchedule StepSchedule::polynomial(Scalar gamma1, Scalar mu) {
  if (!(gamma1 > 0.0)) throw std::invalid_argument("StepSchedule: gamma1 must be > 0");
  if (!(mu > 0.0) || !(mu < 1.0)) throw std::invalid_argument("StepSchedule: mu must be in (0,1)");
  StepSchedule s;
  s.kind = Kind::Polynomial;
  s.gamma1 = gamma1;
  s.mu = mu;
  return s;
}

StepSchedule StepSchedule::constant(Scalar gamma0, Scalar mu, Index horizon) {
  if (!(gamma0 > 0.0)) throw std::invalid_argument("StepSchedule: gamma0 must be > 0");
  if (mu < 0.0 || mu >= 1.0) throw std::invalid_argument("StepSchedule: mu must be in [0,1)");
  if (horizon < 1) throw std::invalid_argument("StepSchedule: horizon must be >= 1");
  StepSchedule s;
  s.kind = Kind::Constant;
  s.gamma0 = gamma0;
  s.mu = mu;
  s.horizon = horizon;
  return s;
}

Scalar StepSchedule::at(Index k) const {
  if (k < 1) throw std::invalid_argument("StepSchedule::at: k starts at 1");
  if (kind == Kind::Polynomial)
    return gamma1 * std::pow(static_cast<Scalar>(k), -mu);
  return gamma0 * std::pow(static_cast<Scalar>(horizon), -mu);
}

Scalar StepSchedule::max_step() const { return at(1); }

std::vector<Scalar> StepSchedule::first(Index k) const {
  std::vector<Scalar> g(static_cast<std::size_t>(k));
  for (Index i = 1; i <= k; ++i) g[static_cast<std::size_t>(i - 1)] = at(i);
  return g;
}

LearnerState make_learner(const Grid& grid, StepSchedule schedule, Scalar lambda) {
  if (lambda < 0.0) throw std::invalid_argument("make_learner: lambda must be >= 0");
  return LearnerState{zero_function(grid), 1, std::move(schedule), lambda};
}

void sgd_step(LearnerState& state, const DiscreteFunction& X, Scalar Y,
              const DiscreteOperator& LK) {
  if (!std::isfinite(Y) || !X.values.allFinite())
    throw DataError("sgd_step: non-finite sample", state.k);
  require_same_grid(state.beta.grid, X.grid, "sgd_step");
  const Scalar gamma = state.schedule.at(state.k);
  const Scalar r = inner_product(state.beta, X) - Y;
  const Vector lk_x = LK.apply(X.values);
  state.beta.values -= gamma * (r * lk_x + state.lambda * state.beta.values);
  ++state.k;
}

AdmissibilityReport admissibility_check(const StepSchedule& schedule, Scalar lambda,
                                        Scalar kappa1_sq, Scalar kappa2_sq, Scalar c,
                                        std::optional<CapacityInfo> capacity) {
  AdmissibilityReport report;
  const Scalar kk = kappa1_sq * kappa2_sq;
  // theorem caps constrain gamma1 / gamma0; Prop 1 constrains the realized step
  const bool polynomial = schedule.kind == StepSchedule::Kind::Polynomial;
  report.configured = polynomial ? schedule.gamma1 : schedule.gamma0;
  // the Prop-1 condition gamma_k (kk + lambda) <= 1, expressed as a cap on the
  // configured constant (the largest realized step is gamma_1 for polynomial
  // and gamma0 n^-mu for constant)
  report.prop1_cap =
      polynomial ? 1.0 / (kk + lambda)
                 : std::pow(static_cast<Scalar>(schedule.horizon), schedule.mu) / (kk + lambda);

  std::optional<Scalar> s;
  std::optional<Scalar> trace;
  if (capacity) {
    s = capacity->s;
    trace = capacity->trace_TK_s;
  }
  if (polynomial) {
    const CorollaryCaps caps = corollary_caps(schedule.mu, c, kk, s, trace);
    report.theorem_cap = caps.cap_c1;
    report.capacity_cap = caps.cap_c1S;
  } else {
    // mu = 0 leaves the constant-step theorems inapplicable; only Prop-1 binds
    report.theorem_cap = schedule.mu > 0.0 ? theorem5_cap(schedule.mu, c, kk)
                                           : std::numeric_limits<Scalar>::infinity();
    if (capacity) report.capacity_cap = theorem3_capacity_cap(capacity->s, c, kk,
                                                              capacity->trace_TK_s);
  }

  report.max_admissible = std::min(report.prop1_cap, report.theorem_cap);
  report.binding = report.prop1_cap <= report.theorem_cap
                       ? "Prop-1 precondition"
                       : (polynomial ? "Theorem-1 cap" : "Theorem-5 cap");
  if (report.capacity_cap && *report.capacity_cap < report.max_admissible) {
    report.max_admissible = *report.capacity_cap;
    report.binding = polynomial ? "Corollary-2 cap C1^S" : "Theorem-3 cap C2*^S";
  }
  report.pass = report.configured <= report.max_admissible * (1.0 + 1e-12);
  if (schedule.max_step() * (kk + lambda) > 1.0 + 1e-12) {
    report.pass = false;
    report.binding = "Prop-1 precondition";
  }
  return report;
}

Trajectory run_trajectory(const ModelInstance& instance, const StepSchedule& schedule,
                          const RegularizationPlan& plan, Index n,
                          std::span<const Index> record_at, RandomStream& rng,
                          bool record_estimation, Scalar rel_cutoff) {
  if (n < 0) throw std::invalid_argument("run_trajectory: n must be >= 0");
  for (const Index k : record_at)
    if (k < 1 || k > n + 1)
      throw std::invalid_argument("run_trajectory: record index outside [1, n+1]");

  LearnerState state = make_learner(instance.grid, schedule, plan.lambda);
  Trajectory traj;
  traj.records.reserve(record_at.size());

  auto record_if_requested = [&](Index k) {
    if (std::find(record_at.begin(), record_at.end(), k) == record_at.end()) return;
    ErrorRecord rec;
    rec.k = k;
    rec.pred_error = excess_prediction_error(state.beta, instance);
    if (record_estimation) {
      const KNormResult kn = estimation_error_K(state.beta, instance, rel_cutoff);
      rec.est_error_K = kn.value;
      rec.discarded_energy = kn.discarded_energy;
    }
    traj.records.push_back(std::move(rec));
  };

  record_if_requested(1);
  for (Index step = 1; step <= n; ++step) {
    const Sample sample = sample_pair(instance, rng);
    sgd_step(state, sample.X, sample.Y, instance.LK);
    record_if_requested(state.k);
  }
  traj.beta_final = std::move(state.beta);
  traj.steps = n;
  return traj;
}

}  // namespace funreg
