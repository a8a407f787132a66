#include "spreader/kinematics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "spreader/errors.hpp"

namespace spreader {

namespace {

bool finite(const TractorState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.phi);
}

}  // namespace

double DrivePlan::total_duration() const {
  return std::accumulate(segments.begin(), segments.end(), 0.0,
                         [](double acc, const DriveCommand& c) { return acc + c.duration; });
}

TractorState step(const TractorState& state, const DriveCommand& cmd, double dt,
                  Integrator integrator) {
  if (!finite(state) || !std::isfinite(cmd.speed) || !std::isfinite(cmd.turn_rate) ||
      !std::isfinite(dt)) {
    throw InvalidStateError("kinematics step: non-finite state or command");
  }
  if (dt <= 0.0) {
    throw InvalidStateError("kinematics step: dt must be positive");
  }

  if (integrator == Integrator::ExactArc && cmd.turn_rate != 0.0) {
    const double radius = cmd.speed / cmd.turn_rate;
    const double phi_next = state.phi + cmd.turn_rate * dt;
    return {state.x + radius * (std::sin(phi_next) - std::sin(state.phi)),
            state.y - radius * (std::cos(phi_next) - std::cos(state.phi)), phi_next};
  }

  return {state.x + std::cos(state.phi) * cmd.speed * dt,
          state.y + std::sin(state.phi) * cmd.speed * dt, state.phi + cmd.turn_rate * dt};
}

void validate(const DrivePlan& plan) {
  if (!finite(plan.start)) {
    throw InvalidStateError("drive plan: non-finite start pose");
  }
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const auto& c = plan.segments[i];
    const std::string where = "drive plan segment " + std::to_string(i);
    if (!std::isfinite(c.speed) || !std::isfinite(c.turn_rate) || !std::isfinite(c.duration)) {
      throw ConfigError(where + ": non-finite value");
    }
    if (c.speed < 0.0) {
      throw ConfigError(where + ": speed must be >= 0");
    }
    if (c.duration <= 0.0) {
      throw ConfigError(where + ": duration must be > 0");
    }
  }
}

int steps_in(double duration, double dt) {
  if (!(dt > 0.0)) {
    throw ConfigError("dt must be positive");
  }
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("segment duration " + std::to_string(duration) +
                      " is not a multiple of dt " + std::to_string(dt));
  }
  return static_cast<int>(rounded);
}

std::vector<TractorState> trajectory(const DrivePlan& plan, double dt, Integrator integrator) {
  validate(plan);
  std::vector<int> counts;
  int total = 0;
  for (const auto& seg : plan.segments) {
    counts.push_back(steps_in(seg.duration, dt));
    total += counts.back();
  }

  std::vector<TractorState> states;
  states.reserve(static_cast<std::size_t>(total) + 1);
  states.push_back(plan.start);
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    for (int k = 0; k < counts[i]; ++k) {
      states.push_back(step(states.back(), plan.segments[i], dt, integrator));
    }
  }
  return states;
}

}  // namespace spreader
