#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "funreg/errors.hpp"
#include "funreg/harness.hpp"
#include "funreg/metrics.hpp"

namespace {

using namespace funreg;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> step_override;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config file (JSON)");
  cmd->add_option("--seed", flags.seed, "master seed (overrides config)");
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--override-step-size", flags.step_override,
                  "use this step size instead of the theoretical caps "
                  "(reports gain an outside-theorem-regime annotation)");
  cmd->add_option("--jobs", flags.jobs, "worker threads for trial loops");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig config =
      flags.config_path.empty() ? default_config() : load_config(flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.step_override) config.step_override = *flags.step_override;
  if (flags.jobs) config.jobs = *flags.jobs;
  return config;
}

int cmd_simulate(const ExperimentConfig& config) {
  const ModelInstance instance = build_instance(config);
  const Index n = config.n_list.empty() ? 1024 : config.n_list.back();
  const ScheduleChoice choice =
      theorem_schedule(config.theorem, config.exponent, config.capacity_s, n, config.epsilon);
  StepSchedule schedule =
      choice.kind == StepSchedule::Kind::Polynomial
          ? StepSchedule::polynomial(config.step_override.value_or(
                                         0.9 / (instance.kappa1_sq * instance.kappa2_sq +
                                                choice.lambda)),
                                     choice.mu)
          : StepSchedule::constant(config.step_override.value_or(
                                       0.9 / (instance.kappa1_sq * instance.kappa2_sq +
                                              choice.lambda)),
                                   choice.mu, n);
  RegularizationPlan plan{choice.lambda, to_string(config.theorem), config.epsilon};

  std::vector<Index> record;
  for (Index k = 1; k <= n + 1; k *= 2) record.push_back(k);
  if (record.back() != n + 1) record.push_back(n + 1);

  RandomStream rng = derive_stream(config.seed, 0x51ULL);
  const Trajectory traj =
      run_trajectory(instance, schedule, plan, n, record, rng, true, config.rel_cutoff);

  std::filesystem::create_directories(config.out_dir);
  const std::string path =
      (std::filesystem::path(config.out_dir) / "trajectory.csv").string();
  std::ofstream out(path, std::ios::binary);
  out << "k,pred_error,est_error_K,discarded_energy\n";
  for (const ErrorRecord& r : traj.records)
    out << r.k << "," << format_double(r.pred_error) << ","
        << format_double(r.est_error_K.value_or(0.0)) << ","
        << format_double(r.discarded_energy) << "\n";
  std::cout << "wrote " << path << " (" << traj.records.size() << " records, n=" << n
            << ", lambda=" << format_double(plan.lambda) << ")\n";
  return 0;
}

int cmd_rates(const ExperimentConfig& config) {
  const RateReport report = run_rate_experiment(config);
  for (const std::string& p : write_rate_outputs(report, config, config.out_dir))
    std::cout << "wrote " << p << "\n";
  std::cout << "theorem " << to_string(config.theorem) << ": fitted slope "
            << format_double(report.fitted_slope) << " vs theoretical "
            << format_double(report.theoretical_slope) << " (tolerance "
            << format_double(report.tolerance) << ") -> " << (report.pass ? "PASS" : "FAIL")
            << "\n";
  if (!report.annotation.empty()) std::cout << "note: " << report.annotation << "\n";
  return report.pass ? 0 : 2;
}

int cmd_audit(const ExperimentConfig& config) {
  const AuditReport report = run_bound_audit(config);
  for (const std::string& p : write_audit_outputs(report, config.out_dir))
    std::cout << "wrote " << p << "\n";
  for (const AuditCheck& c : report.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (worst margin "
              << format_double(c.worst_margin) << "; " << c.detail << ")\n";
  return report.pass ? 0 : 2;
}

int cmd_spectrum(const ExperimentConfig& config) {
  const ModelInstance instance = build_instance(config);
  std::filesystem::create_directories(config.out_dir);
  const auto dump = [&](const std::string& name, const SpectralDecomposition& dec) {
    const std::string path =
        (std::filesystem::path(config.out_dir) / ("spectrum_" + name + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    out << "ell,lambda_ell\n";
    for (Index l = 0; l < dec.eigenvalues().size(); ++l)
      out << (l + 1) << "," << format_double(dec.eigenvalues()(l)) << "\n";
    std::cout << "wrote " << path << "\n";
  };
  dump("LK", instance.LK_dec);
  dump("LC", instance.LC_dec);
  dump("TK", instance.TK_dec);
  dump("TC", instance.TC_dec);
  return 0;
}

int cmd_schedule(const ExperimentConfig& config) {
  const ModelInstance instance = build_instance(config);
  std::optional<CapacityInfo> capacity;
  if (config.capacity_s)
    capacity = CapacityInfo{*config.capacity_s, trace_power(instance.TK_dec, *config.capacity_s)};
  std::cout << "theorem " << to_string(config.theorem) << ", exponent "
            << format_double(config.exponent) << ", epsilon " << format_double(config.epsilon)
            << "\n";
  for (const Index n : config.n_list) {
    const ScheduleChoice choice =
        theorem_schedule(config.theorem, config.exponent, config.capacity_s, n, config.epsilon);
    StepSchedule schedule;
    Scalar gamma = config.step_override.value_or(0.0);
    if (gamma <= 0.0) {
      StepSchedule probe = choice.kind == StepSchedule::Kind::Polynomial
                               ? StepSchedule::polynomial(1e-6, choice.mu)
                               : StepSchedule::constant(1e-6, choice.mu, n);
      gamma = admissibility_check(probe, choice.lambda, instance.kappa1_sq, instance.kappa2_sq,
                                  instance.kurtosis_c, capacity)
                  .max_admissible;
    }
    schedule = choice.kind == StepSchedule::Kind::Polynomial
                   ? StepSchedule::polynomial(gamma, choice.mu)
                   : StepSchedule::constant(gamma, choice.mu, n);
    const AdmissibilityReport rep =
        admissibility_check(schedule, choice.lambda, instance.kappa1_sq, instance.kappa2_sq,
                            instance.kurtosis_c, capacity);
    std::cout << "n=" << n << ": mu=" << format_double(choice.mu)
              << " lambda=" << format_double(choice.lambda) << " branch=" << choice.branch
              << " kind="
              << (choice.kind == StepSchedule::Kind::Polynomial ? "polynomial" : "constant")
              << " step=" << format_double(rep.configured)
              << " max_admissible=" << format_double(rep.max_admissible)
              << " binding=" << rep.binding << " -> " << (rep.pass ? "admissible" : "OUTSIDE")
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online regularized functional linear regression: simulation and bound audits"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* simulate = app.add_subcommand("simulate", "run one trajectory, emit error curve");
  CLI::App* rates = app.add_subcommand("rates", "Monte Carlo rate experiment with slope fit");
  CLI::App* audit = app.add_subcommand("audit", "dominance audits for the bound evaluators");
  CLI::App* spectrum = app.add_subcommand("spectrum", "dump operator eigenvalues");
  CLI::App* schedule = app.add_subcommand("schedule", "print theorem schedule and admissibility");
  for (CLI::App* cmd : {simulate, rates, audit, spectrum, schedule}) add_common(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig config = resolve_config(flags);
    if (simulate->parsed()) return cmd_simulate(config);
    if (rates->parsed()) return cmd_rates(config);
    if (audit->parsed()) return cmd_audit(config);
    if (spectrum->parsed()) return cmd_spectrum(config);
    if (schedule->parsed()) return cmd_schedule(config);
    return 1;
  } catch (const funreg::DataError& e) {
    std::cerr << "data error: " << e.what() << " (step " << e.step_index() << ")\n";
    return 3;
  } catch (const funreg::ParseError& e) {
    std::cerr << "parse error: " << e.what() << " (line " << e.line() << ")\n";
    return 3;
  } catch (const funreg::GridMismatchError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
