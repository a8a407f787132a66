#include "spreader/spread_model.hpp"

#include <string>
#include <thread>
#include <vector>

#include "spreader/errors.hpp"

namespace spreader {

void validate(const PatternParams& p) {
  auto fail = [](const std::string& what) {
    throw CalibrationDomainError("pattern parameters: " + what);
  };
  if (!std::isfinite(p.mass_flow) || !std::isfinite(p.center_distance) ||
      !std::isfinite(p.sigma_d) || !std::isfinite(p.psi) || !std::isfinite(p.sigma_psi)) {
    fail("non-finite value");
  }
  if (p.mass_flow < 0.0) fail("mass flow " + std::to_string(p.mass_flow) + " < 0");
  if (p.center_distance <= 0.0) fail("d = " + std::to_string(p.center_distance) + " <= 0");
  if (p.sigma_d <= 0.0) fail("sigma_d = " + std::to_string(p.sigma_d) + " <= 0");
  if (p.sigma_psi <= 0.0) fail("sigma_psi = " + std::to_string(p.sigma_psi) + " <= 0");
  if (!(std::abs(p.psi) < std::numbers::pi)) fail("psi = " + std::to_string(p.psi) + " outside (-pi, pi)");
}

DensityPartials density_normal_partials(double X, double Y, const PatternParams& p) {
  const double sd2 = p.sigma_d * p.sigma_d;
  const double sp2 = p.sigma_psi * p.sigma_psi;
  const double base = std::exp(-X * X / (2.0 * sd2)) * std::exp(-Y * Y / (2.0 * sp2)) /
                      (2.0 * std::numbers::pi * p.sigma_d * p.sigma_psi);
  const double q = p.mass_flow * base;

  DensityPartials out;
  out.value = q;
  out.mass_flow = base;
  out.center_distance = q * X / sd2;
  out.sigma_d = q * (X * X / (sd2 * p.sigma_d) - 1.0 / p.sigma_d);
  out.psi = q * Y / sp2;
  out.sigma_psi = q * (Y * Y / (sp2 * p.sigma_psi) - 1.0 / p.sigma_psi);
  return out;
}

DensityPartials density_triangle_partials(double X, double Y, const PatternParams& p,
                                          TriangleSupport support) {
  const double s2pi = std::sqrt(2.0 * std::numbers::pi);
  const bool scaled = support == TriangleSupport::SigmaScaled;
  const double half_x = scaled ? s2pi * p.sigma_d : 1.0;
  const double half_y = scaled ? s2pi * p.sigma_psi : 1.0;
  const double ax = std::abs(X);
  const double ay = std::abs(Y);
  const double tx = std::max(0.0, 1.0 - ax / half_x);
  const double ty = std::max(0.0, 1.0 - ay / half_y);
  const double norm = 1.0 / (2.0 * std::numbers::pi * p.sigma_d * p.sigma_psi);
  const double base = norm * tx * ty;
  const double q = p.mass_flow * base;

  // Derivatives of the tent factors; zero outside the support.
  const double sx = X > 0.0 ? 1.0 : (X < 0.0 ? -1.0 : 0.0);
  const double sy = Y > 0.0 ? 1.0 : (Y < 0.0 ? -1.0 : 0.0);
  const double dtx_dd = tx > 0.0 ? sx / half_x : 0.0;    // dX/dd = -1
  const double dty_dpsi = ty > 0.0 ? sy / half_y : 0.0;  // dY/dpsi = -1
  const double dtx_dsd = (scaled && tx > 0.0) ? ax / (half_x * p.sigma_d) : 0.0;
  const double dty_dsp = (scaled && ty > 0.0) ? ay / (half_y * p.sigma_psi) : 0.0;

  DensityPartials out;
  out.value = q;
  out.mass_flow = base;
  out.center_distance = p.mass_flow * norm * dtx_dd * ty;
  out.sigma_d = -q / p.sigma_d + p.mass_flow * norm * dtx_dsd * ty;
  out.psi = p.mass_flow * norm * tx * dty_dpsi;
  out.sigma_psi = -q / p.sigma_psi + p.mass_flow * norm * tx * dty_dsp;
  return out;
}

double pattern_reach(const PatternParams& p, const ModelOptions& opts) {
  if (opts.kind == DepositionModel::Triangle) {
    const double half_x = opts.triangle_support == TriangleSupport::Literal
                              ? 1.0
                              : std::sqrt(2.0 * std::numbers::pi) * p.sigma_d;
    return p.center_distance + half_x;
  }
  return p.center_distance + 10.0 * p.sigma_d;
}

AmountMap total_deposit(const TractorState& pose, const PatternParams& left,
                        const PatternParams& right, const FieldGrid& grid,
                        const ModelOptions& opts, int threads) {
  AmountMap out(grid.n_cells());
  double* data = out.mutable_values().data();
  auto band = [&](int row_begin, int row_end) {
    auto add = [data](std::size_t index, const DensityPartials& s) { data[index] += s.value; };
    visit_disc_deposit<false>(grid, pose, left, opts, add, row_begin, row_end);
    visit_disc_deposit<false>(grid, pose, right, opts, add, row_begin, row_end);
  };

  const int n = grid.n_cells();
  const int bands = std::clamp(threads, 1, n);
  if (bands == 1) {
    band(0, n);
    return out;
  }
  {
    std::vector<std::jthread> workers;
    workers.reserve(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b) {
      workers.emplace_back(band, b * n / bands, (b + 1) * n / bands);
    }
  }
  return out;
}

}  // namespace spreader
