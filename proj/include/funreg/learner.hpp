#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "funreg/metrics.hpp"
#include "funreg/model.hpp"
#include "funreg/random.hpp"
#include "funreg/types.hpp"

namespace funreg {

// Step-size schedule: polynomially decaying gamma_k = gamma1 k^-mu, or the
// constant sequence gamma_k = gamma0 n^-mu tied to the horizon n.
struct StepSchedule {
  enum class Kind { Polynomial, Constant };
  Kind kind = Kind::Polynomial;
  Scalar gamma1 = 0.0;  // polynomial
  Scalar gamma0 = 0.0;  // constant
  Scalar mu = 0.0;
  Index horizon = 0;  // constant: the n the step is tied to

  static StepSchedule polynomial(Scalar gamma1, Scalar mu);
  static StepSchedule constant(Scalar gamma0, Scalar mu, Index horizon);

  Scalar at(Index k) const;  // k >= 1
  Scalar max_step() const;   // the largest gamma_k along the run
  std::vector<Scalar> first(Index k) const;
};

// lambda fixed within a run; rule records which theorem tied it to n.
struct RegularizationPlan {
  Scalar lambda = 0.0;
  std::string rule = "fixed";
  Scalar epsilon = 0.0;
};

struct LearnerState {
  DiscreteFunction beta;  // starts at 0
  Index k = 1;
  StepSchedule schedule;
  Scalar lambda = 0.0;
};

LearnerState make_learner(const Grid& grid, StepSchedule schedule, Scalar lambda);

// One pass of beta_{k+1} = beta_k - gamma_k [ (<beta_k, X>_2 - Y) L_K X + lambda beta_k ].
// Throws DataError (with the step index) on non-finite inputs.
void sgd_step(LearnerState& state, const DiscreteFunction& X, Scalar Y,
              const DiscreteOperator& LK);

struct CapacityInfo {
  Scalar s = 1.0;
  Scalar trace_TK_s = 0.0;
};

struct AdmissibilityReport {
  Scalar configured = 0.0;      // gamma1 or the constant step
  Scalar prop1_cap = 0.0;       // 1 / (kappa1^2 kappa2^2 + lambda) on the max step
  Scalar theorem_cap = 0.0;     // step-size cap of the matching theorem
  std::optional<Scalar> capacity_cap;  // C_1^S (polynomial) or C_2*^S (constant)
  std::string binding;          // name of the smallest cap
  Scalar max_admissible = 0.0;
  bool pass = false;
};

// Evaluates the printed step-size caps for the schedule kind and reports
// whether the configured step passes and which constant binds.
AdmissibilityReport admissibility_check(const StepSchedule& schedule, Scalar lambda,
                                        Scalar kappa1_sq, Scalar kappa2_sq, Scalar c,
                                        std::optional<CapacityInfo> capacity = std::nullopt);

struct Trajectory {
  std::vector<ErrorRecord> records;
  DiscreteFunction beta_final;
  Index steps = 0;
};

// Runs n updates from beta_1 = 0 consuming exactly n fresh samples; records
// errors of the current iterate at each index in record_at (indices live in
// [1, n+1]; index k means the iterate beta_k). Deterministic under a fixed
// stream.
Trajectory run_trajectory(const ModelInstance& instance, const StepSchedule& schedule,
                          const RegularizationPlan& plan, Index n,
                          std::span<const Index> record_at, RandomStream& rng,
                          bool record_estimation = false, Scalar rel_cutoff = 1e-10);

}  // namespace funreg
