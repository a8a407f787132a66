#include "spreader/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "spreader/errors.hpp"

namespace spreader {

CalibrationModel CalibrationModel::defaults() {
  CalibrationModel cal;
  cal.d_coeffs = {0.02, 3.0};
  cal.sigma_d_coeffs = {0.0, 1.0 / 300.0, 0.0};
  cal.psi_coeffs = {1e-7, 0.0, std::numbers::pi / 4.0};
  cal.sigma_psi_coeffs = {1e-8, 0.0, 0.3};
  return cal;
}

void ControlConstraints::validate() const {
  const double all[] = {d_min, d_max, rpm_min, rpm_max, d_rate_max, rpm_rate_max};
  for (double v : all) {
    if (!std::isfinite(v)) throw ConfigError("constraints: non-finite value");
  }
  if (d_min > d_max) throw ConfigError("constraints: d_min > d_max");
  if (rpm_min > rpm_max) throw ConfigError("constraints: rpm_min > rpm_max");
  if (d_min < 0.0) throw ConfigError("constraints: d_min < 0");
  if (rpm_min <= 0.0) throw ConfigError("constraints: rpm_min must be positive");
  if (d_rate_max <= 0.0) throw ConfigError("constraints: d_rate_max must be positive");
  if (rpm_rate_max <= 0.0) throw ConfigError("constraints: rpm_rate_max must be positive");
}

ControlConstraints ControlConstraints::componentwise_rates() const {
  ControlConstraints c = *this;
  c.d_rate_max = d_rate_max / std::numbers::sqrt2;
  c.rpm_rate_max = rpm_rate_max / std::numbers::sqrt2;
  return c;
}

PatternParams pattern_from_controls(double rpm, double mass_flow, const CalibrationModel& cal,
                                    Side side) {
  PatternParams p;
  p.mass_flow = mass_flow;
  p.center_distance = polyval(cal.d_coeffs, rpm);
  p.sigma_d = polyval(cal.sigma_d_coeffs, rpm);
  p.psi = polyval(cal.psi_coeffs, rpm);
  p.sigma_psi = polyval(cal.sigma_psi_coeffs, rpm);
  if (side == Side::Left) p.psi = -p.psi;
  validate(p);
  return p;
}

PatternSlope pattern_slope(double rpm, const CalibrationModel& cal, Side side) {
  auto dquad = [rpm](const std::array<double, 3>& c) { return 2.0 * c[0] * rpm + c[1]; };
  PatternSlope s;
  s.center_distance = cal.d_coeffs[0];
  s.sigma_d = dquad(cal.sigma_d_coeffs);
  s.psi = side == Side::Left ? -dquad(cal.psi_coeffs) : dquad(cal.psi_coeffs);
  s.sigma_psi = dquad(cal.sigma_psi_coeffs);
  return s;
}

void validate_calibration(const CalibrationModel& cal, const ControlConstraints& c) {
  const auto check = [&](double rpm) {
    const double d = polyval(cal.d_coeffs, rpm);
    const double sd = polyval(cal.sigma_d_coeffs, rpm);
    const double psi = polyval(cal.psi_coeffs, rpm);
    const double sp = polyval(cal.sigma_psi_coeffs, rpm);
    const std::string at = " at rpm " + std::to_string(rpm);
    if (!(d > 0.0)) throw CalibrationDomainError("calibration: d <= 0" + at);
    if (!(sd > 0.0)) throw CalibrationDomainError("calibration: sigma_d <= 0" + at);
    if (!(sp > 0.0)) throw CalibrationDomainError("calibration: sigma_psi <= 0" + at);
    if (!(std::abs(psi) > 0.0 && std::abs(psi) < std::numbers::pi)) {
      throw CalibrationDomainError("calibration: |psi| outside (0, pi)" + at);
    }
  };
  for (double rpm = c.rpm_min; rpm < c.rpm_max; rpm += 1.0) check(rpm);
  check(c.rpm_max);
}

SpreaderControls clamp_controls(const SpreaderControls& u, const SpreaderControls& prev,
                                const ControlConstraints& c) {
  const auto project = [](double v, double p, double lo, double hi, double rate) {
    const double a = std::max(lo, p - rate);
    const double b = std::min(hi, p + rate);
    if (a > b) throw Error("clamp_controls: empty feasible interval");
    return std::clamp(v, a, b);
  };
  return {project(u.d_left, prev.d_left, c.d_min, c.d_max, c.d_rate_max),
          project(u.d_right, prev.d_right, c.d_min, c.d_max, c.d_rate_max),
          project(u.rpm_left, prev.rpm_left, c.rpm_min, c.rpm_max, c.rpm_rate_max),
          project(u.rpm_right, prev.rpm_right, c.rpm_min, c.rpm_max, c.rpm_rate_max)};
}

bool in_box(const SpreaderControls& u, const ControlConstraints& c) {
  const auto within = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  return within(u.d_left, c.d_min, c.d_max) && within(u.d_right, c.d_min, c.d_max) &&
         within(u.rpm_left, c.rpm_min, c.rpm_max) && within(u.rpm_right, c.rpm_min, c.rpm_max);
}

bool is_feasible(const SpreaderControls& u, const SpreaderControls& prev,
                 const ControlConstraints& c, std::string* why) {
  auto reject = [why](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (!in_box(u, c)) return reject("control outside box constraints");
  const double dd = std::hypot(u.d_left - prev.d_left, u.d_right - prev.d_right);
  const double dr = std::hypot(u.rpm_left - prev.rpm_left, u.rpm_right - prev.rpm_right);
  if (dd > c.d_rate_max) return reject("mass-flow rate limit exceeded");
  if (dr > c.rpm_rate_max) return reject("rpm rate limit exceeded");
  return true;
}

namespace {

PolynomialFit fit_named(std::span<const double> x, std::span<const double> y, int degree,
                        const char* name) {
  if (x.size() != y.size()) throw ShapeError(std::string("fit: ") + name + " x and y differ in length");
  if (degree < 0) throw FitError("fit: negative degree");
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const auto n_params = static_cast<std::size_t>(degree + 1);
  if (distinct.size() < n_params) {
    throw FitError(std::string("fit_calibration: ") + name + " needs at least " +
                   std::to_string(n_params) + " distinct rpm values, got " +
                   std::to_string(distinct.size()));
  }

  // Scaled abscissa keeps the Vandermonde matrix well conditioned.
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;

  const auto n = static_cast<Eigen::Index>(x.size());
  const auto p = static_cast<Eigen::Index>(n_params);
  Eigen::MatrixXd V(n, p);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = x[static_cast<std::size_t>(i)] / scale;
    double power = 1.0;
    for (Eigen::Index k = p - 1; k >= 0; --k) {
      V(i, k) = power;
      power *= t;
    }
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
  if (qr.rank() < p) {
    throw FitError(std::string("fit_calibration: rank-deficient design for ") + name);
  }
  const Eigen::VectorXd beta = qr.solve(rhs);
  const Eigen::VectorXd resid = rhs - V * beta;
  const double rss = resid.squaredNorm();

  PolynomialFit fit;
  fit.rms = std::sqrt(rss / static_cast<double>(n));
  const Eigen::MatrixXd cov_unit = (V.transpose() * V).inverse();
  const double dof = static_cast<double>(n - p);
  const double sigma2 = dof > 0 ? rss / dof : std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double power = static_cast<double>(p - 1 - k);
    const double unscale = std::pow(scale, power);
    fit.coeffs.push_back(beta(k) / unscale);
    fit.standard_errors.push_back(std::sqrt(sigma2 * cov_unit(k, k)) / unscale);
  }
  return fit;
}

template <std::size_t N>
void copy_to(const std::vector<double>& v, std::array<double, N>& out) {
  std::copy_n(v.begin(), N, out.begin());
}

}  // namespace

PolynomialFit fit_polynomial(std::span<const double> x, std::span<const double> y, int degree) {
  return fit_named(x, y, degree, "polynomial");
}

CalibrationFit fit_calibration(std::span<const ChartSample> chart) {
  std::vector<double> rpm, d, sd, psi, sp;
  for (const auto& s : chart) {
    rpm.push_back(s.rpm);
    d.push_back(s.center_distance);
    sd.push_back(s.sigma_d);
    psi.push_back(s.psi);
    sp.push_back(s.sigma_psi);
  }
  const PolynomialFit fd = fit_named(rpm, d, 1, "d");
  const PolynomialFit fsd = fit_named(rpm, sd, 2, "sigma_d");
  const PolynomialFit fpsi = fit_named(rpm, psi, 2, "psi");
  const PolynomialFit fsp = fit_named(rpm, sp, 2, "sigma_psi");

  CalibrationFit out;
  copy_to(fd.coeffs, out.model.d_coeffs);
  copy_to(fsd.coeffs, out.model.sigma_d_coeffs);
  copy_to(fpsi.coeffs, out.model.psi_coeffs);
  copy_to(fsp.coeffs, out.model.sigma_psi_coeffs);
  copy_to(fd.standard_errors, out.d_stderr);
  copy_to(fsd.standard_errors, out.sigma_d_stderr);
  copy_to(fpsi.standard_errors, out.psi_stderr);
  copy_to(fsp.standard_errors, out.sigma_psi_stderr);
  out.rms_residual = {fd.rms, fsd.rms, fpsi.rms, fsp.rms};
  return out;
}

}  // namespace spreader
