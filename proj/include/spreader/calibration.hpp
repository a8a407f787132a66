#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "spreader/controls.hpp"
#include "spreader/spread_model.hpp"

namespace spreader {

/// Regression of the pattern geometry on disc RPM. Coefficients are stored
/// highest power first. psi is the right-disc angle; the left disc mirrors it.
struct CalibrationModel {
  std::array<double, 2> d_coeffs{};          // d = c1 rpm + c0
  std::array<double, 3> sigma_d_coeffs{};    // quadratic
  std::array<double, 3> psi_coeffs{};        // quadratic
  std::array<double, 3> sigma_psi_coeffs{};  // quadratic

  /// Synthetic machine: 15 m throw, 2 m radial spread at 600 RPM.
  static CalibrationModel defaults();
};

/// Box and rate limits on the controls.
struct ControlConstraints {
  double d_min = 0.0;
  double d_max = 200.0;
  double rpm_min = 300.0;
  double rpm_max = 900.0;
  double d_rate_max = 20.0;     // |dD| per step, 2-norm over (left, right)
  double rpm_rate_max = 100.0;  // |dRPM| per step, 2-norm over (left, right)

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  /// Componentwise rate window that implies the 2-norm limits (rate / sqrt 2).
  ControlConstraints componentwise_rates() const;
};

enum class Side { Left, Right };

/// Derivative of each calibrated parameter with respect to RPM.
struct PatternSlope {
  double center_distance = 0.0;
  double sigma_d = 0.0;
  double psi = 0.0;
  double sigma_psi = 0.0;
};

/// Evaluates the calibration at one RPM. Throws CalibrationDomainError when
/// the result violates PatternParams invariants.
PatternParams pattern_from_controls(double rpm, double mass_flow, const CalibrationModel& cal,
                                    Side side);

PatternSlope pattern_slope(double rpm, const CalibrationModel& cal, Side side);

/// Checks the calibration over [rpm_min, rpm_max] at 1 RPM resolution.
void validate_calibration(const CalibrationModel& cal, const ControlConstraints& c);

/// Projects each component onto its box intersected with [prev - rate, prev + rate].
SpreaderControls clamp_controls(const SpreaderControls& u, const SpreaderControls& prev,
                                const ControlConstraints& c);

/// Exact check: boxes and the 2-norm rate limits relative to prev.
bool is_feasible(const SpreaderControls& u, const SpreaderControls& prev,
                 const ControlConstraints& c, std::string* why = nullptr);

bool in_box(const SpreaderControls& u, const ControlConstraints& c);

/// One row of a spreading chart (right-disc angle convention).
struct ChartSample {
  double rpm = 0.0;
  double center_distance = 0.0;
  double sigma_d = 0.0;
  double psi = 0.0;
  double sigma_psi = 0.0;
};

struct CalibrationFit {
  CalibrationModel model;
  // RMS residual per fitted quantity: d, sigma_d, psi, sigma_psi.
  std::array<double, 4> rms_residual{};
  // Standard errors of the coefficients, same layout as the model.
  std::array<double, 2> d_stderr{};
  std::array<double, 3> sigma_d_stderr{};
  std::array<double, 3> psi_stderr{};
  std::array<double, 3> sigma_psi_stderr{};
};

struct PolynomialFit {
  std::vector<double> coeffs;           // highest power first
  std::vector<double> standard_errors;  // NaN without residual degrees of freedom
  double rms = 0.0;
};

/// Least-squares polynomial of the given degree.
/// Throws FitError with fewer than degree + 1 distinct abscissae.
PolynomialFit fit_polynomial(std::span<const double> x, std::span<const double> y, int degree);

/// Least-squares linear fit of d and quadratic fits of the others.
/// Throws FitError if fewer than 2 (linear) / 3 (quadratic) distinct RPMs.
CalibrationFit fit_calibration(std::span<const ChartSample> chart);

inline double polyval(std::span<const double> coeffs_high_first, double x) {
  double acc = 0.0;
  for (double c : coeffs_high_first) acc = acc * x + c;
  return acc;
}

}  // namespace spreader
