#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "spreader/calibration.hpp"
#include "spreader/errors.hpp"

using namespace spreader;

namespace {

std::vector<ChartSample> exact_chart(const CalibrationModel& m, double from, double to, double by) {
  std::vector<ChartSample> chart;
  for (double rpm = from; rpm <= to + 1e-9; rpm += by) {
    chart.push_back({rpm, polyval(m.d_coeffs, rpm), polyval(m.sigma_d_coeffs, rpm),
                     polyval(m.psi_coeffs, rpm), polyval(m.sigma_psi_coeffs, rpm)});
  }
  return chart;
}

bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= rel * std::abs(b) + abs_floor;
}

}  // namespace

TEST_SUITE("machine-calibration") {

TEST_CASE("default calibration at 600 rpm") {
  const auto cal = CalibrationModel::defaults();
  const PatternParams r = pattern_from_controls(600, 45, cal, Side::Right);
  CHECK(r.mass_flow == 45);
  CHECK(r.center_distance == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(r.sigma_d == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.psi == doctest::Approx(std::numbers::pi / 4 + 0.036).epsilon(1e-15));
  CHECK(r.sigma_psi == doctest::Approx(0.3036).epsilon(1e-15));
}

TEST_CASE("narrowest admissible pattern is valid") {
  const auto cal = CalibrationModel::defaults();
  const ControlConstraints c;
  for (Side s : {Side::Left, Side::Right}) {
    const PatternParams p = pattern_from_controls(c.rpm_min, 0, cal, s);
    CHECK(p.center_distance > 0);
    CHECK(p.sigma_d > 0);
    CHECK(p.sigma_psi > 0);
    CHECK(std::isfinite(p.psi));
  }
  CHECK_NOTHROW(validate_calibration(cal, c));
}

TEST_CASE("left and right angles are antisymmetric") {
  const auto cal = CalibrationModel::defaults();
  for (double rpm = 300; rpm <= 900; rpm += 37.5) {
    const auto l = pattern_from_controls(rpm, 1, cal, Side::Left);
    const auto r = pattern_from_controls(rpm, 1, cal, Side::Right);
    CHECK(l.psi == -r.psi);
    CHECK(l.psi < 0);
    CHECK(l.center_distance == r.center_distance);
    CHECK(l.sigma_psi == r.sigma_psi);
  }
}

TEST_CASE("pattern slope matches central differences") {
  const auto cal = CalibrationModel::defaults();
  for (Side s : {Side::Left, Side::Right}) {
    for (double rpm : {310.0, 600.0, 880.0}) {
      const double h = 1e-3;
      const auto plus = pattern_from_controls(rpm + h, 1, cal, s);
      const auto minus = pattern_from_controls(rpm - h, 1, cal, s);
      const PatternSlope g = pattern_slope(rpm, cal, s);
      CHECK(g.center_distance == doctest::Approx((plus.center_distance - minus.center_distance) / (2 * h)));
      CHECK(g.sigma_d == doctest::Approx((plus.sigma_d - minus.sigma_d) / (2 * h)));
      CHECK(g.psi == doctest::Approx((plus.psi - minus.psi) / (2 * h)).epsilon(1e-6));
      CHECK(g.sigma_psi == doctest::Approx((plus.sigma_psi - minus.sigma_psi) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("calibration domain errors") {
  CalibrationModel cal = CalibrationModel::defaults();
  cal.sigma_psi_coeffs = {-1e-6, 0, 0.3};  // negative beyond about 548 rpm
  CHECK_THROWS_AS(validate_calibration(cal, ControlConstraints{}), CalibrationDomainError);
  CHECK_THROWS_AS(pattern_from_controls(900, 10, cal, Side::Right), CalibrationDomainError);
  CHECK_NOTHROW(pattern_from_controls(400, 10, cal, Side::Right));

  // Only the admissible range is checked.
  ControlConstraints narrow;
  narrow.rpm_max = 500;
  CHECK_NOTHROW(validate_calibration(cal, narrow));
}

TEST_CASE("constraint invariants") {
  ControlConstraints c;
  CHECK_NOTHROW(c.validate());
  c.rpm_min = 1000;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("rpm_min > rpm_max"), ConfigError);
  c = {};
  c.d_rate_max = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.d_min = 300;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto w = ControlConstraints{}.componentwise_rates();
  CHECK(std::hypot(w.d_rate_max, w.d_rate_max) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(std::hypot(w.rpm_rate_max, w.rpm_rate_max) == doctest::Approx(100.0).epsilon(1e-15));
}

TEST_CASE("clamp examples") {
  const ControlConstraints c;
  const SpreaderControls prev{45, 45, 900, 600};
  const SpreaderControls a = clamp_controls({45, 45, 950, 600}, prev, c);
  CHECK(a.rpm_left == 900);
  const SpreaderControls b = clamp_controls({100, 45, 900, 600}, prev, c);
  CHECK(b.d_left == 65);
  const SpreaderControls ok{50, 40, 880, 650};
  CHECK(clamp_controls(ok, prev, c) == ok);
}

TEST_CASE("clamp is an idempotent projection into boxes and windows") {
  const ControlConstraints c;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(0, 200), rpm(300, 900), wild(-500, 1500);
  for (int i = 0; i < 1000; ++i) {
    const SpreaderControls prev{d(rng), d(rng), rpm(rng), rpm(rng)};
    const SpreaderControls u{wild(rng), wild(rng), wild(rng), wild(rng)};
    const SpreaderControls once = clamp_controls(u, prev, c);
    CHECK(clamp_controls(once, prev, c) == once);
    CHECK(in_box(once, c));
    CHECK(std::abs(once.d_left - prev.d_left) <= c.d_rate_max + 1e-12);
    CHECK(std::abs(once.d_right - prev.d_right) <= c.d_rate_max + 1e-12);
    CHECK(std::abs(once.rpm_left - prev.rpm_left) <= c.rpm_rate_max + 1e-12);
    CHECK(std::abs(once.rpm_right - prev.rpm_right) <= c.rpm_rate_max + 1e-12);
  }
}

TEST_CASE("feasibility uses the 2-norm over both discs") {
  const ControlConstraints c;
  const SpreaderControls prev{45, 45, 600, 600};
  CHECK(is_feasible({57, 57, 600, 600}, prev, c));   // |(12,12)| = 16.97
  CHECK_FALSE(is_feasible({60, 60, 600, 600}, prev, c));  // 21.2
  CHECK(is_feasible({65, 45, 600, 600}, prev, c));
  CHECK_FALSE(is_feasible({45, 45, 680, 680}, prev, c));  // 113
  std::string why;
  CHECK_FALSE(is_feasible({45, 45, 200, 600}, prev, c, &why));
  CHECK(why.find("box") != std::string::npos);
}

TEST_CASE("exact charts are recovered") {
  CalibrationModel truth;
  truth.d_coeffs = {0.025, 1.5};
  truth.sigma_d_coeffs = {2e-7, 0.003, 0.1};
  truth.psi_coeffs = {-3e-7, 4e-4, 0.5};
  truth.sigma_psi_coeffs = {1e-8, 1e-5, 0.25};
  const auto chart = exact_chart(truth, 300, 900, 50);
  const CalibrationFit fit = fit_calibration(chart);
  for (std::size_t k = 0; k < 2; ++k) CHECK(close(fit.model.d_coeffs[k], truth.d_coeffs[k], 1e-9, 1e-15));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(close(fit.model.sigma_d_coeffs[k], truth.sigma_d_coeffs[k], 1e-9, 1e-15));
    CHECK(close(fit.model.psi_coeffs[k], truth.psi_coeffs[k], 1e-9, 1e-15));
    CHECK(close(fit.model.sigma_psi_coeffs[k], truth.sigma_psi_coeffs[k], 1e-9, 1e-15));
  }
  for (double rpm = 300; rpm <= 900; rpm += 7) {
    CHECK(polyval(fit.model.psi_coeffs, rpm) ==
          doctest::Approx(polyval(truth.psi_coeffs, rpm)).epsilon(1e-9));
  }
  for (double r : fit.rms_residual) CHECK(r < 1e-9);
}

TEST_CASE("two samples give the line through both points") {
  const std::vector<double> x{300, 900}, y{9, 21};
  const PolynomialFit f = fit_polynomial(x, y, 1);
  CHECK(f.coeffs[0] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(f.coeffs[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::isnan(f.standard_errors[0]));
}

TEST_CASE("rank deficient charts") {
  std::vector<ChartSample> same(5, ChartSample{600, 15, 2, 0.8, 0.3});
  CHECK_THROWS_AS(fit_calibration(same), FitError);
  std::vector<ChartSample> two{{300, 9, 1, 0.8, 0.3}, {900, 21, 3, 0.9, 0.3}};
  CHECK_THROWS_AS(fit_calibration(two), FitError);
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  CHECK_THROWS_AS(fit_polynomial(x, y, 1), FitError);
}

TEST_CASE("noisy charts: standard errors are calibrated") {
  // Monte Carlo over 1000 refits with N(0, 0.1) noise on d.
  const CalibrationModel truth = CalibrationModel::defaults();
  const auto clean = exact_chart(truth, 300, 900, 50);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.1);
  const int refits = 1000;
  // With 11 residual dof, P(|t| > 3) is about 1.2% per coefficient.
  int slope_inside = 0, offset_inside = 0;
  double sum_slope = 0, sum_slope2 = 0, reported = 0;
  for (int i = 0; i < refits; ++i) {
    auto chart = clean;
    for (auto& s : chart) s.center_distance += noise(rng);
    const CalibrationFit f = fit_calibration(chart);
    slope_inside += std::abs(f.model.d_coeffs[0] - truth.d_coeffs[0]) <= 3 * f.d_stderr[0];
    offset_inside += std::abs(f.model.d_coeffs[1] - truth.d_coeffs[1]) <= 3 * f.d_stderr[1];
    sum_slope += f.model.d_coeffs[0];
    sum_slope2 += f.model.d_coeffs[0] * f.model.d_coeffs[0];
    reported += f.d_stderr[0];
  }
  const double mean = sum_slope / refits;
  const double spread = std::sqrt(sum_slope2 / refits - mean * mean);
  CHECK(slope_inside >= 975);
  CHECK(offset_inside >= 975);
  CHECK(mean == doctest::Approx(truth.d_coeffs[0]).epsilon(1e-3));
  // Analytic standard error of the slope with 13 points 50 rpm apart.
  double sxx = 0, xbar = 600;
  for (const auto& s : clean) sxx += (s.rpm - xbar) * (s.rpm - xbar);
  const double analytic = 0.1 / std::sqrt(sxx);
  CHECK(spread == doctest::Approx(analytic).epsilon(0.1));
  CHECK(reported / refits == doctest::Approx(analytic).epsilon(0.1));
}

}
