#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spreader/calibration.hpp"
#include "spreader/controllers.hpp"
#include "spreader/field_grid.hpp"
#include "spreader/kinematics.hpp"
#include "spreader/spread_model.hpp"

namespace spreader {

enum class ControllerKind { Greedy, MpcTriangle, MpcFull };

std::string to_string(ControllerKind kind);
/// Accepts greedy | mpc-triangle | mpc-full.
ControllerKind parse_controller(const std::string& name);

struct Scenario {
  FieldGrid grid{150.0, 90};
  PrescriptionMap prescription{90, 20.0};
  DrivePlan plan;
  double dt = 1.0;
  SpreaderControls initial_controls{45.0, 45.0, 600.0, 600.0};
  ControllerKind controller = ControllerKind::MpcFull;
  int horizon = 5;
  DepositScaling scaling = DepositScaling::LiteralPaper;
  TriangleSupport triangle_support = TriangleSupport::Literal;
  Integrator integrator = Integrator::ForwardEuler;
  int threads = 1;

  /// Options the plant deposits with (always the full normal model).
  ModelOptions plant_options() const {
    return {DepositionModel::FullNormal, scaling, triangle_support};
  }

  /// Throws ConfigError describing the first violated invariant.
  void validate(const ControlConstraints& constraints) const;
};

/// S-shaped drive over three tramlines on a 150 m field with 20 g everywhere.
Scenario three_tramline_scenario();
DrivePlan three_tramline_plan();

struct StepRecord {
  int k = 0;
  double t = 0.0;
  TractorState pose;
  SpreaderControls controls;
  double deposit_mass = 0.0;  // sum of this step's deposit map
  double cost = 0.0;          // cost of the accumulated map after this step
  DepositionModel plant_model = DepositionModel::FullNormal;
  double controller_seconds = 0.0;
  int optimizer_iterations = 0;
};

struct RunRecord {
  std::string controller;
  std::vector<StepRecord> steps;
  AmountMap final_applied;
  double final_cost = 0.0;
  double controller_wall_clock = 0.0;  // [s], summed over controller calls
  bool aborted = false;
  std::string diagnostic;
};

std::unique_ptr<Controller> make_controller(const Scenario& scenario,
                                            const CalibrationModel& calibration,
                                            const ControlConstraints& constraints,
                                            const OptimizerSettings& settings,
                                            IterationLog log = {});

/// Closed loop over the drive plan with the scenario's controller.
RunRecord run(const Scenario& scenario, const CalibrationModel& calibration,
              const ControlConstraints& constraints, const OptimizerSettings& settings,
              IterationLog log = {});

/// Closed loop with a caller-supplied controller. A controller exception ends
/// the run early; the record keeps the steps done so far and the message.
RunRecord run_with(const Scenario& scenario, const CalibrationModel& calibration,
                   const ControlConstraints& constraints, Controller& controller);

struct ComparisonRow {
  ControllerKind controller;
  double final_cost = 0.0;
  double wall_clock = 0.0;
  bool failed = false;
  std::string error;
};

struct ComparisonSummary {
  std::vector<ComparisonRow> rows;
  std::vector<ControllerKind> ranking;  // ascending final cost, failed variants excluded
  std::vector<RunRecord> runs;
};

/// Runs each variant in turn. Variants must differ only in controller / horizon;
/// otherwise ConfigError. A failing variant is recorded and the rest still run.
/// `log_for`, when set, supplies the iteration log of each variant.
ComparisonSummary compare(const std::vector<Scenario>& variants,
                          const CalibrationModel& calibration,
                          const ControlConstraints& constraints,
                          const OptimizerSettings& settings,
                          const std::function<IterationLog(const Scenario&)>& log_for = {});

}  // namespace spreader
