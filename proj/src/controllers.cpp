#include "spreader/controllers.hpp"

#include <cmath>

#include "spreader/errors.hpp"

namespace spreader {

std::vector<double> ControlSchedule::flatten() const {
  std::vector<double> z;
  z.reserve(steps.size() * SpreaderControls::kSize);
  for (const auto& u : steps) {
    for (double v : u.as_array()) z.push_back(v);
  }
  return z;
}

ControlSchedule ControlSchedule::unflatten(const std::vector<double>& z) {
  ControlSchedule s;
  for (std::size_t i = 0; i + SpreaderControls::kSize <= z.size(); i += SpreaderControls::kSize) {
    s.steps.push_back({z[i], z[i + 1], z[i + 2], z[i + 3]});
  }
  return s;
}

namespace {

constexpr Eigen::Index kWidth = SpreaderControls::kSize;

Eigen::VectorXd to_vector(const ControlSchedule& s) {
  const auto z = s.flatten();
  return Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
}

ControlSchedule to_schedule(const Eigen::VectorXd& z) {
  return ControlSchedule::unflatten(std::vector<double>(z.data(), z.data() + z.size()));
}

}  // namespace

HorizonObjective::HorizonObjective(const HorizonContext& ctx) : ctx_(ctx) {
  if (ctx.applied.n() != ctx.grid.n_cells() || ctx.prescribed.n() != ctx.grid.n_cells()) {
    throw ShapeError("horizon objective: maps do not match the grid");
  }
}

Eigen::Index HorizonObjective::dimension() const {
  return kWidth * static_cast<Eigen::Index>(ctx_.poses.size());
}

void HorizonObjective::deposit_into(const Eigen::VectorXd& z, CellMatrix& applied,
                                    std::vector<Block>* blocks) const {
  const int n = ctx_.grid.n_cells();
  if (step_.rows() != n) step_.resize(n, n);
  double* step = step_.data();

  for (std::size_t j = 0; j < ctx_.poses.size(); ++j) {
    const auto base = static_cast<Eigen::Index>(j) * kWidth;
    step_.setZero();
    for (int side = 0; side < 2; ++side) {
      const Side s = side == 0 ? Side::Left : Side::Right;
      const double flow = z(base + side);
      const double rpm = z(base + 2 + side);
      const PatternParams p = pattern_from_controls(rpm, flow, ctx_.calibration, s);
      if (blocks == nullptr) {
        visit_disc_deposit<false>(ctx_.grid, ctx_.poses[j], p, ctx_.model,
                                  [step](std::size_t i, const DensityPartials& q) {
                                    step[i] += q.value;
                                  });
        continue;
      }
      const PatternSlope slope = pattern_slope(rpm, ctx_.calibration, s);
      Block& b = (*blocks)[2 * j + static_cast<std::size_t>(side)];
      visit_disc_deposit<true>(ctx_.grid, ctx_.poses[j], p, ctx_.model,
                               [&](std::size_t i, const DensityPartials& q) {
                                 step[i] += q.value;
                                 b.cells.push_back(i);
                                 b.value.push_back(q.value);
                                 b.d_flow.push_back(q.mass_flow);
                                 b.d_rpm.push_back(q.center_distance * slope.center_distance +
                                                   q.sigma_d * slope.sigma_d +
                                                   q.psi * slope.psi +
                                                   q.sigma_psi * slope.sigma_psi);
                               });
    }
    applied += step_;
  }
}

double HorizonObjective::cost(const Eigen::VectorXd& z) const {
  CellMatrix applied = ctx_.applied.values();
  deposit_into(z, applied, nullptr);
  return (ctx_.prescribed.values() - applied).squaredNorm();
}

AmountMap HorizonObjective::predicted_map(const Eigen::VectorXd& z) const {
  CellMatrix applied = ctx_.applied.values();
  deposit_into(z, applied, nullptr);
  return AmountMap(std::move(applied));
}

Linearization HorizonObjective::linearize(const Eigen::VectorXd& z) const {
  const std::size_t steps = ctx_.poses.size();
  std::vector<Block> blocks(2 * steps);
  CellMatrix applied = ctx_.applied.values();
  deposit_into(z, applied, &blocks);
  const CellMatrix residual = ctx_.prescribed.values() - applied;

  Linearization lin;
  lin.cost = residual.squaredNorm();
  lin.gradient = Eigen::VectorXd::Zero(dimension());
  lin.gauss_newton = Eigen::MatrixXd::Zero(dimension(), dimension());

  // Block k covers step k / 2, side k % 2.
  auto flow_var = [](std::size_t k) {
    return static_cast<Eigen::Index>(k / 2) * kWidth + static_cast<Eigen::Index>(k % 2);
  };
  auto rpm_var = [](std::size_t k) {
    return static_cast<Eigen::Index>(k / 2) * kWidth + 2 + static_cast<Eigen::Index>(k % 2);
  };

  const double* r = residual.data();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Block& b = blocks[k];
    double gf = 0.0, gr = 0.0;
    for (std::size_t c = 0; c < b.cells.size(); ++c) {
      gf += r[b.cells[c]] * b.d_flow[c];
      gr += r[b.cells[c]] * b.d_rpm[c];
    }
    lin.gradient(flow_var(k)) = -2.0 * gf;
    lin.gradient(rpm_var(k)) = -2.0 * gr;
  }

  std::vector<double> scatter_flow(ctx_.grid.size(), 0.0);
  std::vector<double> scatter_rpm(ctx_.grid.size(), 0.0);
  for (std::size_t k1 = 0; k1 < blocks.size(); ++k1) {
    const Block& b1 = blocks[k1];
    for (std::size_t c = 0; c < b1.cells.size(); ++c) {
      scatter_flow[b1.cells[c]] = b1.d_flow[c];
      scatter_rpm[b1.cells[c]] = b1.d_rpm[c];
    }
    for (std::size_t k2 = k1; k2 < blocks.size(); ++k2) {
      const Block& b2 = blocks[k2];
      double ff = 0.0, fr = 0.0, rf = 0.0, rr = 0.0;
      for (std::size_t c = 0; c < b2.cells.size(); ++c) {
        const std::size_t i = b2.cells[c];
        ff += scatter_flow[i] * b2.d_flow[c];
        fr += scatter_flow[i] * b2.d_rpm[c];
        rf += scatter_rpm[i] * b2.d_flow[c];
        rr += scatter_rpm[i] * b2.d_rpm[c];
      }
      auto set = [&](Eigen::Index a, Eigen::Index b, double v) {
        lin.gauss_newton(a, b) = 2.0 * v;
        lin.gauss_newton(b, a) = 2.0 * v;
      };
      set(flow_var(k1), flow_var(k2), ff);
      set(flow_var(k1), rpm_var(k2), fr);
      set(rpm_var(k1), flow_var(k2), rf);
      set(rpm_var(k1), rpm_var(k2), rr);
    }
    for (std::size_t i : b1.cells) {
      scatter_flow[i] = 0.0;
      scatter_rpm[i] = 0.0;
    }
  }
  return lin;
}

void check_feasible(const ControlSchedule& schedule, const SpreaderControls& previous,
                    const ControlConstraints& constraints) {
  SpreaderControls before = previous;
  for (std::size_t j = 0; j < schedule.steps.size(); ++j) {
    std::string why;
    if (!is_feasible(schedule.steps[j], before, constraints, &why)) {
      throw InfeasibleScheduleError("schedule step " + std::to_string(j) + ": " + why);
    }
    before = schedule.steps[j];
  }
}

namespace {

void check_horizon(const ControlSchedule& schedule, const HorizonContext& ctx) {
  if (schedule.horizon() != ctx.poses.size()) {
    throw ShapeError("schedule has " + std::to_string(schedule.horizon()) + " steps but " +
                     std::to_string(ctx.poses.size()) + " horizon poses were given");
  }
}

}  // namespace

double predict_cost(const ControlSchedule& schedule, const HorizonContext& ctx) {
  check_horizon(schedule, ctx);
  check_feasible(schedule, ctx.previous, ctx.constraints);
  return HorizonObjective(ctx).cost(to_vector(schedule));
}

std::vector<double> gradient(const ControlSchedule& schedule, const HorizonContext& ctx) {
  check_horizon(schedule, ctx);
  check_feasible(schedule, ctx.previous, ctx.constraints);
  const Linearization lin = HorizonObjective(ctx).linearize(to_vector(schedule));
  return {lin.gradient.data(), lin.gradient.data() + lin.gradient.size()};
}

StepwiseBox schedule_box(const ControlConstraints& constraints, const SpreaderControls& previous,
                         std::size_t horizon) {
  const ControlConstraints c = constraints.componentwise_rates();
  Eigen::VectorXd lower(kWidth), upper(kWidth), rate(kWidth), anchor(kWidth);
  lower << c.d_min, c.d_min, c.rpm_min, c.rpm_min;
  upper << c.d_max, c.d_max, c.rpm_max, c.rpm_max;
  rate << c.d_rate_max, c.d_rate_max, c.rpm_rate_max, c.rpm_rate_max;
  anchor << previous.d_left, previous.d_right, previous.rpm_left, previous.rpm_right;
  return StepwiseBox(lower, upper, rate, anchor, static_cast<Eigen::Index>(horizon));
}

ScheduleResult optimize_schedule(const ControlSchedule& initial, const HorizonContext& ctx,
                                 const OptimizerSettings& settings, const IterationLog& log) {
  check_horizon(initial, ctx);
  if (!in_box(ctx.previous, ctx.constraints)) {
    throw InfeasibleScheduleError("previous control outside box constraints");
  }
  const StepwiseBox box = schedule_box(ctx.constraints, ctx.previous, initial.horizon());
  const HorizonObjective objective(ctx);
  const OptimizeResult r = minimize(objective, box, box.project(to_vector(initial)), settings, log);

  ScheduleResult out;
  out.schedule = to_schedule(r.z);
  out.cost = r.cost;
  out.initial_cost = r.initial_cost;
  out.iterations = r.iterations;
  out.stop_reason = r.stop_reason;
  return out;
}

RecedingHorizonController::RecedingHorizonController(std::string name, DepositionModel prediction,
                                                     int horizon,
                                                     const CalibrationModel& calibration,
                                                     const ControlConstraints& constraints,
                                                     OptimizerSettings settings,
                                                     ModelOptions base_options, IterationLog log)
    : name_(std::move(name)),
      horizon_(horizon),
      calibration_(calibration),
      constraints_(constraints),
      settings_(settings),
      options_(base_options),
      log_(std::move(log)) {
  if (horizon < 1) throw ConfigError("controller horizon must be >= 1");
  options_.kind = prediction;
}

ControlSchedule RecedingHorizonController::warm_start(const SpreaderControls& previous,
                                                      std::size_t steps) const {
  ControlSchedule s;
  if (last_solution_.steps.size() > 1) {
    s.steps.assign(last_solution_.steps.begin() + 1, last_solution_.steps.end());
  }
  if (s.steps.empty()) s.steps.push_back(previous);
  s.steps.resize(steps, s.steps.back());
  return s;
}

SpreaderControls RecedingHorizonController::step(const ControllerInput& in) {
  if (in.horizon_poses.empty()) throw ConfigError("controller called without a pose");
  const std::size_t steps =
      std::min(static_cast<std::size_t>(horizon_), in.horizon_poses.size());
  const HorizonContext ctx{in.grid,   in.prescribed, in.applied,   in.horizon_poses.first(steps),
                           in.previous, calibration_, constraints_, options_};
  const ScheduleResult r = optimize_schedule(warm_start(in.previous, steps), ctx, settings_, log_);
  last_solution_ = r.schedule;
  stats_ = {r.iterations, r.cost, r.stop_reason};
  return r.schedule.steps.front();
}

std::unique_ptr<RecedingHorizonController> make_greedy(const CalibrationModel& calibration,
                                                       const ControlConstraints& constraints,
                                                       const OptimizerSettings& settings,
                                                       ModelOptions base, IterationLog log) {
  return std::make_unique<RecedingHorizonController>("greedy", DepositionModel::FullNormal, 1,
                                                     calibration, constraints, settings, base,
                                                     std::move(log));
}

std::unique_ptr<RecedingHorizonController> make_mpc(DepositionModel prediction, int horizon,
                                                    const CalibrationModel& calibration,
                                                    const ControlConstraints& constraints,
                                                    const OptimizerSettings& settings,
                                                    ModelOptions base, IterationLog log) {
  const char* name = prediction == DepositionModel::FullNormal ? "mpc-full" : "mpc-triangle";
  return std::make_unique<RecedingHorizonController>(name, prediction, horizon, calibration,
                                                     constraints, settings, base, std::move(log));
}

SpreaderControls greedy_step(const ControllerInput& in, const CalibrationModel& calibration,
                             const ControlConstraints& constraints,
                             const OptimizerSettings& settings, ModelOptions base) {
  return make_greedy(calibration, constraints, settings, base)->step(in);
}

ControlSchedule mpc_step(const ControllerInput& in, DepositionModel prediction, int horizon,
                         const ControlSchedule& initial, const CalibrationModel& calibration,
                         const ControlConstraints& constraints, const OptimizerSettings& settings,
                         ModelOptions base) {
  if (horizon < 1) throw ConfigError("mpc horizon must be >= 1");
  const std::size_t steps = std::min(static_cast<std::size_t>(horizon), in.horizon_poses.size());
  base.kind = prediction;
  const HorizonContext ctx{in.grid,   in.prescribed, in.applied,  in.horizon_poses.first(steps),
                           in.previous, calibration,  constraints, base};
  ControlSchedule start = initial;
  start.steps.resize(steps, start.steps.empty() ? in.previous : start.steps.back());
  return optimize_schedule(start, ctx, settings).schedule;
}

}  // namespace spreader
