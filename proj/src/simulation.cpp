#include "spreader/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <numbers>

#include "spreader/errors.hpp"

namespace spreader {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Greedy:
      return "greedy";
    case ControllerKind::MpcTriangle:
      return "mpc-triangle";
    case ControllerKind::MpcFull:
      return "mpc-full";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "greedy") return ControllerKind::Greedy;
  if (name == "mpc-triangle") return ControllerKind::MpcTriangle;
  if (name == "mpc-full") return ControllerKind::MpcFull;
  throw ConfigError("unknown controller '" + name + "' (expected greedy|mpc-triangle|mpc-full)");
}

void Scenario::validate(const ControlConstraints& constraints) const {
  if (!(dt > 0.0)) throw ConfigError("scenario: dt must be positive");
  if (horizon < 1) throw ConfigError("scenario: horizon must be >= 1");
  if (threads < 0) throw ConfigError("scenario: threads must be >= 0");
  if (prescription.n() != grid.n_cells()) {
    throw ShapeError("scenario: prescription is " + std::to_string(prescription.n()) +
                     " cells per side, grid has " + std::to_string(grid.n_cells()));
  }
  spreader::validate(plan);
  for (const auto& seg : plan.segments) steps_in(seg.duration, dt);
  if (!in_box(initial_controls, constraints)) {
    throw ConfigError("scenario: initial_controls outside the constraint boxes");
  }
}

DrivePlan three_tramline_plan() {
  const double turn = std::numbers::pi / 16.0;
  DrivePlan plan;
  plan.start = {50.0, 100.0, 0.0};
  plan.segments = {{10.0, 0.0, 10.0},
                   {4.0, -turn, 16.0},
                   {10.0, 0.0, 10.0},
                   {4.0, turn, 16.0},
                   {10.0, 0.0, 10.0}};
  return plan;
}

Scenario three_tramline_scenario() {
  Scenario s;
  s.plan = three_tramline_plan();
  return s;
}

std::unique_ptr<Controller> make_controller(const Scenario& scenario,
                                            const CalibrationModel& calibration,
                                            const ControlConstraints& constraints,
                                            const OptimizerSettings& settings, IterationLog log) {
  const ModelOptions base = scenario.plant_options();
  switch (scenario.controller) {
    case ControllerKind::Greedy:
      return make_greedy(calibration, constraints, settings, base, std::move(log));
    case ControllerKind::MpcTriangle:
      return make_mpc(DepositionModel::Triangle, scenario.horizon, calibration, constraints,
                      settings, base, std::move(log));
    case ControllerKind::MpcFull:
      return make_mpc(DepositionModel::FullNormal, scenario.horizon, calibration, constraints,
                      settings, base, std::move(log));
  }
  throw ConfigError("unknown controller kind");
}

RunRecord run_with(const Scenario& scenario, const CalibrationModel& calibration,
                   const ControlConstraints& constraints, Controller& controller) {
  scenario.validate(constraints);
  const std::vector<TractorState> states =
      trajectory(scenario.plan, scenario.dt, scenario.integrator);
  const int n = static_cast<int>(states.size()) - 1;
  const ModelOptions plant = scenario.plant_options();
  const std::span<const TractorState> all(states);

  RunRecord record;
  record.controller = controller.name();
  record.final_applied = AmountMap(scenario.grid.n_cells());
  record.steps.reserve(static_cast<std::size_t>(n));
  SpreaderControls previous = scenario.initial_controls;

  for (int k = 1; k <= n; ++k) {
    const ControllerInput input{scenario.grid, scenario.prescription, record.final_applied,
                                all.subspan(static_cast<std::size_t>(k)), previous};
    SpreaderControls u;
    const auto started = std::chrono::steady_clock::now();
    try {
      u = controller.step(input);
    } catch (const NumericalFailure& e) {
      record.aborted = true;
      record.diagnostic = "step " + std::to_string(k) + ": " + e.what() + "\n" + e.diagnostics();
      break;
    } catch (const Error& e) {
      record.aborted = true;
      record.diagnostic = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.controller_wall_clock += seconds;

    std::string why;
    if (!is_feasible(u, previous, constraints, &why)) {
      record.aborted = true;
      record.diagnostic = "step " + std::to_string(k) + ": controller emitted infeasible control (" +
                          why + ")";
      break;
    }

    const TractorState& pose = states[static_cast<std::size_t>(k)];
    const AmountMap deposit =
        total_deposit(pose, pattern_from_controls(u.rpm_left, u.d_left, calibration, Side::Left),
                      pattern_from_controls(u.rpm_right, u.d_right, calibration, Side::Right),
                      scenario.grid, plant, scenario.threads);
    record.final_applied.mutable_values() += deposit.values();

    StepRecord step;
    step.k = k;
    step.t = k * scenario.dt;
    step.pose = pose;
    step.controls = u;
    step.deposit_mass = deposit.sum();
    step.cost = cost(record.final_applied, scenario.prescription);
    step.plant_model = plant.kind;
    step.controller_seconds = seconds;
    step.optimizer_iterations = controller.last_stats().iterations;
    record.steps.push_back(step);
    previous = u;
  }
  record.final_cost = cost(record.final_applied, scenario.prescription);
  return record;
}

RunRecord run(const Scenario& scenario, const CalibrationModel& calibration,
              const ControlConstraints& constraints, const OptimizerSettings& settings,
              IterationLog log) {
  auto controller = make_controller(scenario, calibration, constraints, settings, std::move(log));
  return run_with(scenario, calibration, constraints, *controller);
}

namespace {

void require_same_base(const Scenario& a, const Scenario& b) {
  auto fail = [](const char* what) {
    throw ConfigError(std::string("compare: variants differ in ") + what);
  };
  if (!(a.grid == b.grid)) fail("grid");
  if (!(a.prescription == b.prescription)) fail("prescription");
  if (!(a.plan == b.plan)) fail("drive plan");
  if (a.dt != b.dt) fail("dt");
  if (!(a.initial_controls == b.initial_controls)) fail("initial controls");
  if (a.scaling != b.scaling) fail("scaling");
  if (a.triangle_support != b.triangle_support) fail("triangle support");
  if (a.integrator != b.integrator) fail("integrator");
}

}  // namespace

ComparisonSummary compare(const std::vector<Scenario>& variants,
                          const CalibrationModel& calibration,
                          const ControlConstraints& constraints,
                          const OptimizerSettings& settings,
                          const std::function<IterationLog(const Scenario&)>& log_for) {
  if (variants.empty()) throw ConfigError("compare: no variants");
  for (const auto& v : variants) require_same_base(variants.front(), v);

  ComparisonSummary summary;
  for (const auto& v : variants) {
    ComparisonRow row;
    row.controller = v.controller;
    try {
      RunRecord rec = run(v, calibration, constraints, settings, log_for ? log_for(v) : IterationLog{});
      row.final_cost = rec.final_cost;
      row.wall_clock = rec.controller_wall_clock;
      row.failed = rec.aborted;
      row.error = rec.diagnostic;
      summary.runs.push_back(std::move(rec));
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
      summary.runs.emplace_back();
    }
    summary.rows.push_back(row);
  }

  std::vector<const ComparisonRow*> ok;
  for (const auto& row : summary.rows) {
    if (!row.failed) ok.push_back(&row);
  }
  std::stable_sort(ok.begin(), ok.end(), [](const ComparisonRow* a, const ComparisonRow* b) {
    return a->final_cost < b->final_cost;
  });
  for (const auto* row : ok) summary.ranking.push_back(row->controller);
  return summary;
}

}  // namespace spreader
