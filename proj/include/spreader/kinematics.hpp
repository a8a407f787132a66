#pragma once

#include <vector>

namespace spreader {

/// Pose of the tractor. Heading accumulates without wrapping.
struct TractorState {
  double x = 0.0;    // east [m]
  double y = 0.0;    // north [m]
  double phi = 0.0;  // heading [rad]

  bool operator==(const TractorState&) const = default;
};

/// Constant (speed, turn rate) input held for `duration` seconds.
struct DriveCommand {
  double speed = 0.0;      // [m/s], >= 0
  double turn_rate = 0.0;  // [rad/s]
  double duration = 0.0;   // [s], > 0

  bool operator==(const DriveCommand&) const = default;
};

struct DrivePlan {
  TractorState start;
  std::vector<DriveCommand> segments;

  double total_duration() const;

  bool operator==(const DrivePlan&) const = default;
};

enum class Integrator {
  ForwardEuler,  // heading taken at the start of the step
  ExactArc,      // closed-form unicycle arc, for sensitivity studies
};

/// One integration step of the unicycle model.
/// Throws InvalidStateError for non-finite inputs or dt <= 0.
TractorState step(const TractorState& state, const DriveCommand& cmd, double dt,
                  Integrator integrator = Integrator::ForwardEuler);

/// Checks command invariants (speed >= 0, duration > 0, finite values).
void validate(const DrivePlan& plan);

/// States at t0, t0 + dt, ..., T inclusive.
/// Throws ConfigError if a segment duration is not an integer multiple of dt.
std::vector<TractorState> trajectory(const DrivePlan& plan, double dt,
                                     Integrator integrator = Integrator::ForwardEuler);

/// Number of whole dt steps in `duration`; throws ConfigError if not integral.
int steps_in(double duration, double dt);

}  // namespace spreader
