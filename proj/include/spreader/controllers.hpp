#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spreader/calibration.hpp"
#include "spreader/controls.hpp"
#include "spreader/field_grid.hpp"
#include "spreader/kinematics.hpp"
#include "spreader/optimizer.hpp"
#include "spreader/spread_model.hpp"

namespace spreader {

/// Everything a horizon prediction needs besides the schedule itself.
/// `poses` holds the tractor pose at each horizon step (known from the plan).
struct HorizonContext {
  const FieldGrid& grid;
  const PrescriptionMap& prescribed;
  const AmountMap& applied;
  std::span<const TractorState> poses;
  SpreaderControls previous;
  const CalibrationModel& calibration;
  ControlConstraints constraints;
  ModelOptions model;
};

/// Terminal cost of the horizon as a least-squares objective over the flattened
/// schedule. Gradients are analytic (chain rule through the density and the
/// calibration polynomials).
class HorizonObjective final : public LeastSquaresObjective {
 public:
  explicit HorizonObjective(const HorizonContext& ctx);

  Eigen::Index dimension() const override;
  double cost(const Eigen::VectorXd& z) const override;
  Linearization linearize(const Eigen::VectorXd& z) const override;

  /// Applied map after all predicted deposits.
  AmountMap predicted_map(const Eigen::VectorXd& z) const;

 private:
  struct Block {
    std::vector<std::size_t> cells;
    std::vector<double> value, d_flow, d_rpm;
  };

  void deposit_into(const Eigen::VectorXd& z, CellMatrix& applied,
                    std::vector<Block>* blocks) const;

  const HorizonContext& ctx_;
  mutable CellMatrix step_;
};

/// Throws InfeasibleScheduleError unless every step satisfies the boxes and the
/// 2-norm rate limits relative to the step before it.
void check_feasible(const ControlSchedule& schedule, const SpreaderControls& previous,
                    const ControlConstraints& constraints);

/// Cost after depositing the schedule over the horizon poses.
double predict_cost(const ControlSchedule& schedule, const HorizonContext& ctx);

/// d predict_cost / d control, flattened like ControlSchedule::flatten.
std::vector<double> gradient(const ControlSchedule& schedule, const HorizonContext& ctx);

/// Feasible set used by the optimizer: boxes plus componentwise rate / sqrt 2 windows.
StepwiseBox schedule_box(const ControlConstraints& constraints, const SpreaderControls& previous,
                         std::size_t horizon);

struct ScheduleResult {
  ControlSchedule schedule;
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

/// Minimizes predict_cost starting from `initial` (projected onto the optimizer's
/// feasible set first).
ScheduleResult optimize_schedule(const ControlSchedule& initial, const HorizonContext& ctx,
                                 const OptimizerSettings& settings, const IterationLog& log = {});

/// State shared by every controller call within a run.
struct ControllerInput {
  const FieldGrid& grid;
  const PrescriptionMap& prescribed;
  const AmountMap& applied;
  std::span<const TractorState> horizon_poses;  // current pose first
  SpreaderControls previous;
};

struct ControllerStats {
  int iterations = 0;
  double predicted_cost = 0.0;
  std::string stop_reason;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual SpreaderControls step(const ControllerInput& in) = 0;
  virtual std::string name() const = 0;
  virtual DepositionModel prediction_model() const = 0;
  const ControllerStats& last_stats() const { return stats_; }

 protected:
  ControllerStats stats_;
};

/// Optimizes `horizon` steps with the given prediction model and applies the
/// first. Later calls warm-start from the previous solution shifted by one step
/// with the last entry repeated. Horizon 1 with FullNormal is the greedy controller.
class RecedingHorizonController final : public Controller {
 public:
  RecedingHorizonController(std::string name, DepositionModel prediction, int horizon,
                            const CalibrationModel& calibration,
                            const ControlConstraints& constraints, OptimizerSettings settings,
                            ModelOptions base_options, IterationLog log = {});

  SpreaderControls step(const ControllerInput& in) override;
  std::string name() const override { return name_; }
  DepositionModel prediction_model() const override { return options_.kind; }
  int horizon() const { return horizon_; }

  /// Shifted previous solution, truncated or padded to `steps`.
  ControlSchedule warm_start(const SpreaderControls& previous, std::size_t steps) const;

 private:
  std::string name_;
  int horizon_;
  CalibrationModel calibration_;
  ControlConstraints constraints_;
  OptimizerSettings settings_;
  ModelOptions options_;
  IterationLog log_;
  ControlSchedule last_solution_;
};

std::unique_ptr<RecedingHorizonController> make_greedy(const CalibrationModel& calibration,
                                                       const ControlConstraints& constraints,
                                                       const OptimizerSettings& settings,
                                                       ModelOptions base, IterationLog log = {});

std::unique_ptr<RecedingHorizonController> make_mpc(DepositionModel prediction, int horizon,
                                                    const CalibrationModel& calibration,
                                                    const ControlConstraints& constraints,
                                                    const OptimizerSettings& settings,
                                                    ModelOptions base, IterationLog log = {});

/// One greedy decision: horizon 1, full normal model.
SpreaderControls greedy_step(const ControllerInput& in, const CalibrationModel& calibration,
                             const ControlConstraints& constraints,
                             const OptimizerSettings& settings, ModelOptions base = {});

/// One MPC solve from an explicit initial schedule; returns the full optimized
/// schedule (the caller applies its first step).
ControlSchedule mpc_step(const ControllerInput& in, DepositionModel prediction, int horizon,
                         const ControlSchedule& initial, const CalibrationModel& calibration,
                         const ControlConstraints& constraints, const OptimizerSettings& settings,
                         ModelOptions base = {});

}  // namespace spreader
