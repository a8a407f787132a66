#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spreader/controllers.hpp"
#include "spreader/simulation.hpp"

namespace spreader::testing {

/// Replays a fixed list of controls, one per call.
class ScriptedController final : public Controller {
 public:
  explicit ScriptedController(std::vector<SpreaderControls> script) : script_(std::move(script)) {}

  SpreaderControls step(const ControllerInput&) override { return script_.at(next_++); }
  std::string name() const override { return "scripted"; }
  DepositionModel prediction_model() const override { return DepositionModel::FullNormal; }

 private:
  std::vector<SpreaderControls> script_;
  std::size_t next_ = 0;
};

/// Random schedule satisfying the boxes and the 2-norm rate limits.
inline ControlSchedule random_schedule(const ControlConstraints& c, const SpreaderControls& prev,
                                       std::size_t horizon, std::mt19937_64& rng) {
  const StepwiseBox box = schedule_box(c, prev, horizon);
  const Eigen::VectorXd z = box.random_point(rng);
  return ControlSchedule::unflatten(std::vector<double>(z.data(), z.data() + z.size()));
}

/// Max-norm relative error of an analytic gradient against central differences.
inline double gradient_error(const ControlSchedule& s, const HorizonContext& ctx, double eps) {
  const std::vector<double> g = gradient(s, ctx);
  const HorizonObjective f(ctx);
  const auto flat = s.flatten();
  const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  const Eigen::VectorXd fd = central_difference_gradient(f, z, eps);
  double err = 0.0;
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    err = std::max(err, std::abs(g[static_cast<std::size_t>(i)] - fd(i)));
  }
  return err / std::max(fd.lpNorm<Eigen::Infinity>(), 1e-300);
}

}  // namespace spreader::testing
