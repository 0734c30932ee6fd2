#include <doctest.h>

#include <cmath>
#include <vector>

#include "funreg/bounds.hpp"
#include "funreg/errors.hpp"
#include "funreg/learner.hpp"
#include "funreg/metrics.hpp"
#include "funreg/model.hpp"

using namespace funreg;

namespace {

ModelInstance two_mode_instance(Scalar sigma_noise) {
  CommutingConfig c;
  c.p_k = 2.0;
  c.p_c = 2.0;
  c.length = 4;  // minimum catalog length; trajectory oracle uses all modes
  c.grid_size = 64;
  c.noise_sigma = sigma_noise;
  return build_commuting_instance(c);
}

}  // namespace

TEST_CASE("schedule validation and shapes") {
  CHECK_THROWS_AS(StepSchedule::polynomial(0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule::polynomial(0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule::constant(0.1, 0.5, 0), std::invalid_argument);

  const StepSchedule poly = StepSchedule::polynomial(0.2, 0.5);
  CHECK(poly.at(4) == doctest::Approx(0.1));
  for (Index k = 1; k < 20; ++k) CHECK(poly.at(k + 1) < poly.at(k));  // strictly decreasing

  const StepSchedule cons = StepSchedule::constant(0.3, 0.5, 100);
  CHECK(cons.at(1) == doctest::Approx(0.03));
  CHECK(cons.at(77) == cons.at(1));
}

TEST_CASE("sgd_step algebra") {
  const ModelInstance inst = two_mode_instance(0.0);
  const StepSchedule sched = StepSchedule::polynomial(0.1, 0.5);

  // zero target keeps the zero iterate
  LearnerState st = make_learner(inst.grid, sched, 0.7);
  DiscreteFunction x = inst.LC_dec.eigenfunction(0);
  sgd_step(st, x, 0.0, inst.LK);
  CHECK(l2_norm(st.beta) == 0.0);
  CHECK(st.k == 2);

  // beta_k = 0, Y = 1, gamma = 0.1, lambda = 0 -> beta = 0.1 L_K X
  LearnerState st2 = make_learner(inst.grid, sched, 0.0);
  sgd_step(st2, x, 1.0, inst.LK);
  DiscreteFunction expected = inst.LK.apply(x);
  expected.values *= 0.1;
  DiscreteFunction diff = st2.beta;
  diff.values -= expected.values;
  CHECK(l2_norm(diff) <= 1e-14);

  // non-finite data is rejected with the step index
  LearnerState st3 = make_learner(inst.grid, sched, 0.0);
  try {
    sgd_step(st3, x, std::nan(""), inst.LK);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(e.step_index() == 1);
  }
}

TEST_CASE("three-step trajectory matches the eigenbasis scalar recursion") {
  const ModelInstance inst = two_mode_instance(0.0);
  const CommutingInfo& info = *inst.commuting;
  const Index L = info.a.size();
  const Scalar lambda = 0.05;
  const StepSchedule sched = StepSchedule::polynomial(0.2, 0.5);

  // hand-specified stream in the shared eigenbasis
  std::vector<Vector> xs;
  std::vector<Scalar> ys = {0.7, -0.4, 1.1};
  RandomStream rng(51);
  for (int i = 0; i < 3; ++i) {
    Vector c(L);
    for (Index l = 0; l < L; ++l) c(l) = rng.normal();
    xs.push_back(c);
  }

  // grid-space run
  LearnerState st = make_learner(inst.grid, sched, lambda);
  for (int i = 0; i < 3; ++i) {
    const DiscreteFunction x{info.basis * xs[static_cast<std::size_t>(i)], inst.grid};
    sgd_step(st, x, ys[static_cast<std::size_t>(i)], inst.LK);
  }

  // scalar recursion: beta_{k+1,l} = beta_{k,l} - gamma_k [ (sum_j beta_j x_j - y) a_l x_l + lambda beta_l ]
  Vector beta = Vector::Zero(L);
  for (int i = 0; i < 3; ++i) {
    const Vector& x = xs[static_cast<std::size_t>(i)];
    const Scalar gamma = sched.at(i + 1);
    const Scalar resid = beta.dot(x) - ys[static_cast<std::size_t>(i)];
    for (Index l = 0; l < L; ++l)
      beta(l) -= gamma * (resid * info.a(l) * x(l) + lambda * beta(l));
  }
  for (Index l = 0; l < L; ++l) {
    const DiscreteFunction mode{info.basis.col(l), inst.grid};
    CHECK(inner_product(st.beta, mode) == doctest::Approx(beta(l)).epsilon(1e-9));
  }
}

TEST_CASE("run_trajectory basics") {
  const ModelInstance inst = two_mode_instance(0.0);
  const StepSchedule sched = StepSchedule::polynomial(0.05, 0.5);
  const RegularizationPlan plan{0.01, "fixed", 0.0};

  // n = 0: only beta_1 = 0 with error ||L_C^{1/2} beta*||^2
  RandomStream rng(53);
  const Index rec0[] = {1};
  const Trajectory t0 = run_trajectory(inst, sched, plan, 0, rec0, rng);
  CHECK(t0.records.size() == 1);
  CHECK(t0.records[0].pred_error ==
        doctest::Approx(excess_prediction_error(zero_function(inst.grid), inst)).epsilon(1e-12));

  // out-of-range record index
  const Index bad[] = {5};
  CHECK_THROWS_AS(run_trajectory(inst, sched, plan, 3, bad, rng), std::invalid_argument);

  // sigma = 0 and beta* = 0 -> all errors zero
  CommutingConfig zc;
  zc.p_k = 2.0;
  zc.p_c = 2.0;
  zc.length = 4;
  zc.grid_size = 64;
  zc.seed_scale = 0.0;
  zc.noise_sigma = 0.0;
  const ModelInstance zero_inst = build_commuting_instance(zc);
  const Index recs[] = {1, 3, 5};
  RandomStream rng2(55);
  const Trajectory tz = run_trajectory(zero_inst, sched, plan, 4, recs, rng2);
  for (const ErrorRecord& r : tz.records) CHECK(r.pred_error <= 1e-20);

  // determinism: identical streams give identical trajectories
  RandomStream ra(57), rb(57);
  const Index rec[] = {9};
  const Trajectory a = run_trajectory(inst, sched, plan, 8, rec, ra);
  const Trajectory b = run_trajectory(inst, sched, plan, 8, rec, rb);
  CHECK((a.beta_final.values - b.beta_final.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lambda = 0 reduction and stream homogeneity") {
  const ModelInstance inst = two_mode_instance(0.3);
  const StepSchedule sched = StepSchedule::polynomial(0.05, 0.5);

  // identical streams, lambda = 0 plan vs direct unregularized recursion
  RandomStream ra(61), rb(61);
  const Index rec[] = {17};
  const Trajectory a =
      run_trajectory(inst, sched, RegularizationPlan{0.0, "fixed", 0.0}, 16, rec, ra);
  LearnerState st = make_learner(inst.grid, sched, 0.0);
  for (int i = 0; i < 16; ++i) {
    const Sample s = sample_pair(inst, rb);
    const Scalar gamma = sched.at(st.k);
    const Scalar resid = inner_product(st.beta, s.X) - s.Y;
    st.beta.values -= gamma * (resid * inst.LK.apply(s.X.values));
    ++st.k;
  }
  CHECK((a.beta_final.values - st.beta.values).cwiseAbs().maxCoeff() <= 1e-14);

  // degree-1 homogeneity in Y for a fixed X stream
  const int n = 12;
  std::vector<Sample> stream;
  RandomStream rs(63);
  for (int i = 0; i < n; ++i) stream.push_back(sample_pair(inst, rs));
  auto run_stream = [&](Scalar scale) {
    LearnerState state = make_learner(inst.grid, sched, 0.02);
    for (const Sample& s : stream) sgd_step(state, s.X, scale * s.Y, inst.LK);
    return state.beta;
  };
  const DiscreteFunction b1 = run_stream(1.0);
  const DiscreteFunction b3 = run_stream(3.0);
  CHECK((b3.values - 3.0 * b1.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("admissibility_check") {
  // kappa1 = kappa2 = 1, c = 3, mu = 1/2: Theorem-5 cap = 1/96
  const StepSchedule cons = StepSchedule::constant(1.0 / 100.0, 0.5, 1024);
  const AdmissibilityReport rep = admissibility_check(cons, 0.01, 1.0, 1.0, 3.0);
  CHECK(rep.theorem_cap == doctest::Approx(1.0 / 96.0).epsilon(1e-12));
  CHECK(rep.configured == doctest::Approx(0.01).epsilon(1e-12));
  // Prop-1 cap expressed in gamma0 units: n^mu / (kk + lambda)
  CHECK(rep.prop1_cap == doctest::Approx(32.0 / 1.01).epsilon(1e-12));

  // Prop-1 precondition failure is reported as the binding reason
  const StepSchedule big = StepSchedule::constant(2.0, 0.0, 1024);
  const AdmissibilityReport rep2 = admissibility_check(big, 0.5, 1.0, 1.0, 3.0);
  CHECK_FALSE(rep2.pass);
  CHECK(rep2.binding == "Prop-1 precondition");

  // Theorem-1 cap equals an independent recomputation from the appendix constants
  const Scalar mu = 0.6, c = 3.0, kk = 2.0;
  const StepSchedule poly = StepSchedule::polynomial(1e-5, mu);
  const AdmissibilityReport rep3 = admissibility_check(poly, 0.01, 2.0, 1.0, c);
  const Scalar c_mu_free =
      1.0 + 4.0 / (std::abs(2 * mu - 1) * (1 - std::pow(2.0, mu - 1))) +
      18.0 / (1 - mu) * (1 - mu + std::log(2 - std::pow(2.0, mu - 1)));
  const Scalar expected =
      1.0 / (4.0 * c_mu_free * (1 + c) * std::pow(1 + kk, 2) *
             (std::log(2.0) + 1.0 / std::min(mu, 1 - mu)));
  CHECK(rep3.theorem_cap == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep3.pass);
}
