#pragma once

#include <array>
#include <vector>

namespace spreader {

/// Decision variables at one time step.
struct SpreaderControls {
  double d_left = 0.0;     // [g/step]
  double d_right = 0.0;    // [g/step]
  double rpm_left = 0.0;   // [1/min]
  double rpm_right = 0.0;  // [1/min]

  static constexpr std::size_t kSize = 4;

  std::array<double, kSize> as_array() const { return {d_left, d_right, rpm_left, rpm_right}; }
  static SpreaderControls from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3]};
  }

  bool operator==(const SpreaderControls&) const = default;
};

/// Controls for consecutive steps of a prediction horizon.
struct ControlSchedule {
  std::vector<SpreaderControls> steps;

  std::size_t horizon() const noexcept { return steps.size(); }

  /// Flattened as [D_l, D_r, rpm_l, rpm_r] per step.
  std::vector<double> flatten() const;
  static ControlSchedule unflatten(const std::vector<double>& z);

  bool operator==(const ControlSchedule&) const = default;
};

}  // namespace spreader
