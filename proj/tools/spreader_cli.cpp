// Command-line front end: run one experiment, compare controllers, or validate inputs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "spreader/config.hpp"
#include "spreader/errors.hpp"
#include "spreader/simulation.hpp"

#ifndef SPREADER_CONFIG_DIR
#define SPREADER_CONFIG_DIR "config"
#endif

namespace fs = std::filesystem;
using namespace spreader;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalFailure = 2, kPartialFailure = 3 };

struct RunConfig {
  fs::path scenario_path = fs::path(SPREADER_CONFIG_DIR) / "scenario.yaml";
  fs::path calibration_path = fs::path(SPREADER_CONFIG_DIR) / "calibration.yaml";
  fs::path output_dir = "out";
  std::optional<std::string> controller;
  std::optional<int> horizon;
  std::optional<std::string> scaling;
  std::optional<std::string> triangle_support;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iterations;
  std::optional<int> multi_start;
  std::optional<double> gradient_tolerance;
  std::optional<double> step_tolerance;
  std::string only;
  bool only_given = false;
  bool verbose = false;
};

struct Loaded {
  ScenarioFile scenario;
  MachineFile machine;
};

Loaded load(const RunConfig& cfg) {
  Loaded l;
  l.machine = load_calibration(cfg.calibration_path);
  l.scenario = load_scenario(cfg.scenario_path);
  Scenario& s = l.scenario.scenario;
  OptimizerSettings& o = l.scenario.optimizer;
  if (cfg.controller) s.controller = parse_controller(*cfg.controller);
  if (cfg.horizon) s.horizon = *cfg.horizon;
  if (cfg.scaling) s.scaling = parse_scaling(*cfg.scaling);
  if (cfg.triangle_support) s.triangle_support = parse_triangle_support(*cfg.triangle_support);
  if (cfg.threads) s.threads = *cfg.threads;
  if (cfg.seed) o.seed = *cfg.seed;
  if (cfg.max_iterations) o.max_iterations = *cfg.max_iterations;
  if (cfg.multi_start) o.multi_start = *cfg.multi_start;
  if (cfg.gradient_tolerance) o.gradient_tolerance = *cfg.gradient_tolerance;
  if (cfg.step_tolerance) o.step_tolerance = *cfg.step_tolerance;
  if (s.threads == 0) s.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  o.validate();
  s.validate(l.machine.constraints);
  return l;
}

void warn_greedy_horizon(const RunConfig& cfg, ControllerKind kind) {
  if (kind == ControllerKind::Greedy && cfg.horizon && *cfg.horizon != 1) {
    std::cerr << "warning: --horizon " << *cfg.horizon
              << " ignored, the greedy controller always uses a horizon of 1\n";
  }
}

IterationLog make_log(std::ostream& out, bool echo) {
  return [&out, echo](const IterationInfo& info) {
    std::ostringstream line;
    line << "start=" << info.start << " iter=" << info.iteration
         << " cost=" << format_double(info.cost) << " grad_norm=" << format_double(info.gradient_norm)
         << " step=" << format_double(info.step_size) << " damping=" << format_double(info.damping)
         << '\n';
    out << line.str();
    if (echo) std::clog << line.str();
  };
}

void write_outputs(const fs::path& dir, const RunRecord& record, const Loaded& l) {
  fs::create_directories(dir);
  write_csv(dir / "A.csv", record.final_applied.values());
  {
    std::ofstream trace(dir / "trace.csv");
    write_trace_csv(trace, record);
  }
  std::ofstream summary(dir / "summary.yaml");
  write_summary(summary, record, l.scenario, l.machine);
  if (!summary) throw ConfigError("cannot write outputs to " + dir.string());
}

int report_abort(const fs::path& dir, const RunRecord& record) {
  const fs::path diag = dir / "diagnostics.txt";
  std::ofstream(diag) << record.diagnostic << '\n';
  std::cerr << "error: run aborted: " << record.diagnostic.substr(0, record.diagnostic.find('\n'))
            << "\n  diagnostics: " << diag.string() << '\n';
  return kNumericalFailure;
}

int cmd_run(const RunConfig& cfg) {
  const Loaded l = load(cfg);
  const Scenario& s = l.scenario.scenario;
  warn_greedy_horizon(cfg, s.controller);
  fs::create_directories(cfg.output_dir);
  std::ofstream log(cfg.output_dir / "run.log");
  const RunRecord record = run(s, l.machine.calibration, l.machine.constraints, l.scenario.optimizer,
                               make_log(log, cfg.verbose));
  write_outputs(cfg.output_dir, record, l);
  if (record.aborted) return report_abort(cfg.output_dir, record);
  std::cout << to_string(s.controller) << ": final cost " << format_double(record.final_cost)
            << ", controller time " << record.controller_wall_clock << " s\n";
  return kOk;
}

std::vector<ControllerKind> parse_only(const RunConfig& cfg) {
  if (!cfg.only_given) {
    return {ControllerKind::Greedy, ControllerKind::MpcTriangle, ControllerKind::MpcFull};
  }
  std::vector<ControllerKind> kinds;
  std::stringstream ss(cfg.only);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) kinds.push_back(parse_controller(item));
  }
  if (kinds.empty()) throw CLI::ValidationError("--only", "expects a non-empty controller list");
  return kinds;
}

int cmd_compare(const RunConfig& cfg) {
  const auto kinds = parse_only(cfg);
  const Loaded l = load(cfg);
  std::vector<Scenario> variants;
  for (ControllerKind k : kinds) {
    warn_greedy_horizon(cfg, k);
    Scenario v = l.scenario.scenario;
    v.controller = k;
    variants.push_back(v);
  }
  fs::create_directories(cfg.output_dir);

  std::vector<std::unique_ptr<std::ofstream>> logs;
  const auto summary = compare(variants, l.machine.calibration, l.machine.constraints,
                               l.scenario.optimizer, [&](const Scenario& v) {
                                 const fs::path dir = cfg.output_dir / to_string(v.controller);
                                 fs::create_directories(dir);
                                 logs.push_back(std::make_unique<std::ofstream>(dir / "run.log"));
                                 return make_log(*logs.back(), cfg.verbose);
                               });

  std::ofstream table(cfg.output_dir / "comparison.csv");
  table << "controller,final_cost,wall_clock\n";
  int failures = 0;
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const auto& row = summary.rows[i];
    const fs::path dir = cfg.output_dir / to_string(row.controller);
    if (row.failed) {
      ++failures;
      std::cerr << "error: " << to_string(row.controller) << " failed: " << row.error << '\n';
      table << to_string(row.controller) << ",nan,nan\n";
      std::ofstream(dir / "diagnostics.txt") << row.error << '\n';
      continue;
    }
    Loaded variant = l;
    variant.scenario.scenario = variants[i];
    write_outputs(dir, summary.runs[i], variant);
    table << to_string(row.controller) << ',' << format_double(row.final_cost) << ','
          << format_double(row.wall_clock) << '\n';
    std::cout << to_string(row.controller) << ": final cost " << format_double(row.final_cost)
              << ", controller time " << row.wall_clock << " s\n";
  }
  std::cout << "ranking:";
  for (ControllerKind k : summary.ranking) std::cout << ' ' << to_string(k);
  std::cout << '\n';
  if (failures == 0) return kOk;
  return failures == static_cast<int>(summary.rows.size()) ? kNumericalFailure : kPartialFailure;
}

int cmd_validate(const RunConfig& cfg) {
  std::vector<std::string> problems;
  std::optional<MachineFile> machine;
  std::optional<ScenarioFile> scenario;
  try {
    machine = load_calibration(cfg.calibration_path);
  } catch (const Error& e) {
    problems.push_back(std::string("calibration: ") + e.what());
  }
  try {
    RunConfig c = cfg;
    scenario = load_scenario(cfg.scenario_path);
    if (machine) {
      Loaded l = load(c);
      scenario = l.scenario;
    }
  } catch (const Error& e) {
    problems.push_back(std::string("scenario: ") + e.what());
  }
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "error: " << p << '\n';
    return kConfigError;
  }
  const Scenario& s = scenario->scenario;
  std::cout << "# valid: N=" << s.grid.n_cells() << " dt=" << format_double(s.dt)
            << " H=" << s.horizon << " steps="
            << static_cast<int>(trajectory(s.plan, s.dt, s.integrator).size()) - 1 << '\n'
            << "# scenario\n"
            << to_yaml(*scenario) << "# calibration\n"
            << to_yaml(*machine);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-disc fertilizer spreader simulation and control"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenario_path, "Scenario YAML file");
    sub->add_option("--calibration", cfg.calibration_path, "Calibration YAML file");
    sub->add_option("--out", cfg.output_dir, "Output directory");
    sub->add_option("--controller", cfg.controller, "greedy | mpc-triangle | mpc-full");
    sub->add_option("--horizon", cfg.horizon, "MPC prediction horizon [steps]");
    sub->add_option("--scaling", cfg.scaling, "literal | conservative");
    sub->add_option("--triangle-support", cfg.triangle_support, "literal | sigma-scaled");
    sub->add_option("--threads", cfg.threads, "Deposition threads (0 = auto)");
    sub->add_option("--seed", cfg.seed, "Seed for multi-start restarts");
    sub->add_option("--max-iterations", cfg.max_iterations, "Optimizer iteration limit");
    sub->add_option("--multi-start", cfg.multi_start, "Extra random feasible starts");
    sub->add_option("--gradient-tolerance", cfg.gradient_tolerance, "Projected gradient stop");
    sub->add_option("--step-tolerance", cfg.step_tolerance, "Relative step stop");
    sub->add_flag("--verbose", cfg.verbose, "Echo optimizer iterations to stderr");
  };

  auto* run_cmd = app.add_subcommand("run", "Run one closed-loop experiment");
  auto* compare_cmd = app.add_subcommand("compare", "Run several controllers on one scenario");
  auto* validate_cmd = app.add_subcommand("validate", "Check inputs and print the effective config");
  add_common(run_cmd);
  add_common(compare_cmd);
  add_common(validate_cmd);
  compare_cmd->add_option("--only", cfg.only, "Comma-separated controller subset")
      ->each([&cfg](const std::string&) { cfg.only_given = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(cfg);
    if (*compare_cmd) return cmd_compare(cfg);
    return cmd_validate(cfg);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << '\n' << e.diagnostics() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
