#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "funreg/errors.hpp"
#include "funreg/harness.hpp"

using namespace funreg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("funreg_test_" + tag);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("theorem_schedule formulas") {
  // T1, theta = 1/2 -> mu = 1/2, lambda = n^-1/2
  const ScheduleChoice t1 = theorem_schedule(TheoremTag::T1, 0.5, std::nullopt, 256, 0.05);
  CHECK(t1.mu == doctest::Approx(0.5));
  CHECK(t1.lambda == doctest::Approx(std::pow(256.0, -0.5)).epsilon(1e-14));
  CHECK(t1.kind == StepSchedule::Kind::Polynomial);

  // T1, theta = 1 -> epsilon branch
  const ScheduleChoice t1b = theorem_schedule(TheoremTag::T1, 1.0, std::nullopt, 8192, 0.05);
  CHECK(t1b.mu == doctest::Approx(2.0 / 3.0));
  CHECK(t1b.lambda == doctest::Approx(std::pow(8192.0, -1.0 / 3.0 + 0.05 / 2.0)).epsilon(1e-14));

  // T2, theta = 1, s = 0.5 -> min{2, 1.5} = 1.5: mu = 0.6, lambda = n^-0.4
  const ScheduleChoice t2 = theorem_schedule(TheoremTag::T2, 1.0, 0.5, 1000, 0.05);
  CHECK(t2.mu == doctest::Approx(0.6));
  CHECK(t2.lambda == doctest::Approx(std::pow(1000.0, -0.4)).epsilon(1e-14));

  // T4, r = 0.25, s = 0.25 -> 2r+s = 0.75 < 1: lambda = n^{-4/7}
  const ScheduleChoice t4 = theorem_schedule(TheoremTag::T4, 0.25, 0.25, 128, 0.05);
  CHECK(t4.mu == doctest::Approx(0.75 / 1.75));
  CHECK(t4.lambda == doctest::Approx(std::pow(128.0, -4.0 / 7.0)).epsilon(1e-14));
  CHECK(t4.branch == "2r+s<1");

  // T5 constant kind
  const ScheduleChoice t5 = theorem_schedule(TheoremTag::T5, 0.5, 0.5, 128, 0.05);
  CHECK(t5.kind == StepSchedule::Kind::Constant);
  CHECK(t5.mu == doctest::Approx(1.5 / 2.5));

  // epsilon outside the allowed interval
  CHECK_THROWS_AS(theorem_schedule(TheoremTag::T1, 1.0, std::nullopt, 128, 0.9),
                  std::invalid_argument);
  CHECK_THROWS_AS(theorem_schedule(TheoremTag::T2, 0.5, std::nullopt, 128, 0.05),
                  std::invalid_argument);
}

TEST_CASE("fit_loglog reproduces synthetic slopes exactly") {
  std::vector<Scalar> ns, means, ses;
  for (const Scalar n : {128.0, 256.0, 512.0, 1024.0, 2048.0}) {
    ns.push_back(n);
    means.push_back(3.7 * std::pow(n, -0.62));
    ses.push_back(0.0);
  }
  const FitResult fit = fit_loglog(ns, means, ses);
  CHECK(std::abs(fit.slope - (-0.62)) < 1e-10);
  CHECK(std::abs(fit.intercept - std::log(3.7)) < 1e-10);

  // weighted variant with positive stderrs keeps the exact slope on exact data
  for (auto& s : ses) s = 0.01;
  CHECK(std::abs(fit_loglog(ns, means, ses).slope - (-0.62)) < 1e-10);
}

TEST_CASE("config loading") {
  const std::string dir = temp_dir("config");
  const std::string path = dir + "/config.json";
  {
    std::ofstream out(path);
    out << R"({
      "grid": {"size": 64, "scheme": "gauss-legendre"},
      "model": {
        "commuting": {"p_k": 2.0, "p_c": 2.0, "length": 8},
        "source": {"kind": "prediction", "exponent": 0.5},
        "noise_sigma": 0.3
      },
      "schedule": {"kind": "theorem-auto"},
      "theorem": "T3",
      "epsilon": 0.05,
      "n_list": [16, 32, 64, 128],
      "trials": 20,
      "seed": 99,
      "jobs": 2
    })";
  }
  const ExperimentConfig c = load_config(path);
  CHECK(c.grid_size == 64);
  CHECK(c.commuting);
  CHECK(c.length == 8);
  CHECK(c.theorem == TheoremTag::T3);
  CHECK(c.seed == 99);
  CHECK(c.n_list.size() == 4);

  // unknown keys are rejected
  {
    std::ofstream out(path);
    out << R"({"grid": {"size": 64}, "bogus": 1})";
  }
  CHECK_THROWS_AS(load_config(path), std::invalid_argument);
  {
    std::ofstream out(path);
    out << R"({"model": {"source": {"kind": "prediction", "theta": 0.5}}})";
  }
  CHECK_THROWS_AS(load_config(path), std::invalid_argument);

  // non-increasing n_list
  {
    std::ofstream out(path);
    out << R"({"n_list": [16, 16, 32, 64]})";
  }
  CHECK_THROWS_AS(load_config(path), std::invalid_argument);
}

TEST_CASE("curve CSV round trip is bit exact") {
  const Grid g = build_grid(16, QuadScheme::GaussLegendre);
  RandomStream rng(71);
  std::vector<Sample> data;
  for (int i = 0; i < 5; ++i) {
    Vector v(g.size());
    for (Index j = 0; j < g.size(); ++j) v(j) = rng.normal() * std::pow(10.0, i - 2);
    data.push_back(Sample{make_function(g, v), rng.normal()});
  }
  const std::string dir = temp_dir("curves");
  const std::string path = dir + "/curves.csv";
  export_curves(path, data);
  const std::vector<Sample> back = ingest_curves(path, g);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].Y == data[i].Y);
    CHECK((back[i].X.values - data[i].X.values).cwiseAbs().maxCoeff() == 0.0);
  }

  // empty data section -> empty list
  {
    std::ofstream out(dir + "/empty.csv", std::ios::binary);
    out << "y";
    for (Index i = 1; i <= g.size(); ++i) out << ",x_" << i;
    out << "\n";
  }
  CHECK(ingest_curves(dir + "/empty.csv", g).empty());

  // malformed row -> parse error with the line number
  {
    std::ofstream out(dir + "/bad.csv", std::ios::binary);
    out << "y";
    for (Index i = 1; i <= g.size(); ++i) out << ",x_" << i;
    out << "\n1.0";
    for (Index i = 1; i < g.size(); ++i) out << ",0.5";
    out << ",oops\n";
  }
  try {
    ingest_curves(dir + "/bad.csv", g);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  // node-count mismatch -> grid mismatch
  const Grid g2 = build_grid(8, QuadScheme::GaussLegendre);
  CHECK_THROWS_AS(ingest_curves(path, g2), GridMismatchError);
}

namespace {

ExperimentConfig tiny_rate_config() {
  ExperimentConfig c = default_config();
  c.grid_size = 64;
  c.p_k = 2.0;
  c.p_c = 2.0;
  c.length = 8;
  c.exponent = 0.5;
  c.noise_sigma = 0.3;
  c.theorem = TheoremTag::T3;
  c.n_list = {16, 32, 64, 128};
  c.trials = 20;
  c.seed = 7;
  c.jobs = 2;
  c.step_override = 0.05;
  return c;
}

}  // namespace

TEST_CASE("rate experiment: determinism and structure") {
  const ExperimentConfig c = tiny_rate_config();
  const RateReport r1 = run_rate_experiment(c);
  const RateReport r2 = run_rate_experiment(c);
  REQUIRE(r1.raw.size() == r2.raw.size());
  for (std::size_t i = 0; i < r1.raw.size(); ++i) {
    CHECK(r1.raw[i].pred_error == r2.raw[i].pred_error);
    CHECK(r1.raw[i].est_error_K == r2.raw[i].est_error_K);
    CHECK(r1.raw[i].seed == r2.raw[i].seed);
  }
  CHECK(r1.fitted_slope == r2.fitted_slope);
  CHECK(r1.points.size() == 4);
  CHECK(r1.raw.size() == 4 * 20);
  CHECK(r1.step_override_used);

  // byte-identical CSVs
  const std::string d1 = temp_dir("rates1");
  const std::string d2 = temp_dir("rates2");
  write_rate_outputs(r1, c, d1);
  write_rate_outputs(r2, c, d2);
  CHECK(slurp(d1 + "/rates_raw.csv") == slurp(d2 + "/rates_raw.csv"));
  CHECK(slurp(d1 + "/rates_summary.csv") == slurp(d2 + "/rates_summary.csv"));
  CHECK(!slurp(d1 + "/rates_raw.csv").empty());

  // different seed changes the raw errors
  ExperimentConfig c2 = tiny_rate_config();
  c2.seed = 8;
  const RateReport r3 = run_rate_experiment(c2);
  CHECK(r3.raw[0].pred_error != r1.raw[0].pred_error);
}

TEST_CASE("rate experiment: degenerate all-zero model reports no fit") {
  ExperimentConfig c = tiny_rate_config();
  c.seed_scale = 0.0;
  c.noise_sigma = 0.0;
  const RateReport r = run_rate_experiment(c);
  CHECK(r.degenerate);
  CHECK_FALSE(r.pass);
}

TEST_CASE("rate experiment: theorem-auto passes admissibility") {
  ExperimentConfig c = tiny_rate_config();
  c.step_override.reset();
  c.theorem_auto = true;
  c.n_list = {16, 32, 64, 128};
  c.trials = 20;
  const RateReport r = run_rate_experiment(c);
  CHECK(r.step_cap_respected);
  CHECK_FALSE(r.step_override_used);
  CHECK(r.annotation.empty());
}

TEST_CASE("rate experiment validates config") {
  ExperimentConfig c = tiny_rate_config();
  c.n_list = {16, 32};
  CHECK_THROWS_AS(run_rate_experiment(c), std::invalid_argument);
  c = tiny_rate_config();
  c.trials = 5;
  CHECK_THROWS_AS(run_rate_experiment(c), std::invalid_argument);
}

TEST_CASE("parallel_for covers every index exactly once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(8, 1000, [&](Index i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (const int h : hits) CHECK(h == 1);

  CHECK_THROWS_AS(parallel_for(4, 100,
                               [](Index i) {
                                 if (i == 50) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("format_double round trips") {
  for (const Scalar v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("every theorem tag runs end to end") {
  ExperimentConfig c = tiny_rate_config();
  c.exponent = 0.5;

  c.theorem = TheoremTag::T1;
  CHECK_FALSE(run_rate_experiment(c).degenerate);

  c.theorem = TheoremTag::T2;
  c.capacity_s = 0.5;
  CHECK_FALSE(run_rate_experiment(c).degenerate);

  ExperimentConfig e = tiny_rate_config();
  e.source_kind = SourceKind::Estimation;
  e.capacity_s = 0.5;
  e.theorem = TheoremTag::T4;
  const RateReport t4 = run_rate_experiment(e);
  CHECK_FALSE(t4.degenerate);
  CHECK(t4.raw[0].est_error_K > 0.0);

  e.theorem = TheoremTag::T5;
  CHECK_FALSE(run_rate_experiment(e).degenerate);

  // explicit (non-auto) schedule path
  ExperimentConfig x = tiny_rate_config();
  x.step_override.reset();
  x.theorem_auto = false;
  x.schedule_kind = StepSchedule::Kind::Polynomial;
  x.gamma = 0.05;
  x.schedule_mu = 0.5;
  CHECK_FALSE(run_rate_experiment(x).degenerate);
}
