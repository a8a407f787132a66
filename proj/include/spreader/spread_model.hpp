#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <numbers>

#include "spreader/field_grid.hpp"
#include "spreader/kinematics.hpp"

namespace spreader {

/// Crescent-lobe parameters of one disc at one time step.
struct PatternParams {
  double mass_flow = 0.0;        // D [g/step]
  double center_distance = 0.0;  // d [m]
  double sigma_d = 1.0;          // radial spread [m]
  double psi = 0.0;              // lobe angle from reverse heading [rad]; left < 0 < right
  double sigma_psi = 1.0;        // angular spread [rad]
};

/// Throws CalibrationDomainError when the invariants (D >= 0, d > 0, sigmas > 0,
/// |psi| < pi, all finite) do not hold.
void validate(const PatternParams& p);

enum class DepositionModel { FullNormal, Triangle };

/// How a (distance, angle) density becomes grams in a cell.
enum class DepositScaling {
  LiteralPaper,  // density at the cell center
  Conservative,  // density * cell_area / r, so a step deposits about D per disc
};

/// Support of the triangle surrogate.
enum class TriangleSupport {
  Literal,      // zero at |X| = 1 m and |Y| = 1 rad
  SigmaScaled,  // zero at |X| = sqrt(2 pi) sigma_d and |Y| = sqrt(2 pi) sigma_psi
};

struct ModelOptions {
  DepositionModel kind = DepositionModel::FullNormal;
  DepositScaling scaling = DepositScaling::LiteralPaper;
  TriangleSupport triangle_support = TriangleSupport::Literal;
};

struct Bearing {
  double theta = 0.0;  // signed angle from reverse heading to the cell [rad]
  double cross = 0.0;  // orientation discriminant [m]
  bool degenerate = false;
};

/// Cells closer than this to the tractor use theta = 0 and X = -d.
inline constexpr double kDegenerateDistance = 1e-9;

/// Distance from the tractor to the cell minus d.
inline double radial_offset(Point cell, Point tractor, double center_distance) {
  return std::hypot(tractor.x - cell.x, tractor.y - cell.y) - center_distance;
}

/// Angle between the reverse heading (phi + pi) and the tractor -> cell vector,
/// negative when the cross product with the reverse heading is negative.
/// Evaluated through atan2 of (|cross|, dot), which is the clamped arccos of the
/// normalized dot product without its loss of precision near 0 and pi.
inline Bearing bearing(Point cell, Point tractor, double phi) {
  const double dx = cell.x - tractor.x;
  const double dy = cell.y - tractor.y;
  if (std::hypot(dx, dy) < kDegenerateDistance) {
    return {0.0, 0.0, true};
  }
  const double rc = std::cos(phi + std::numbers::pi);
  const double rs = std::sin(phi + std::numbers::pi);
  const double dot = rc * dx + rs * dy;
  const double cross = dy * rc - dx * rs;
  const double theta = std::atan2(std::abs(cross), dot);
  return {cross < 0.0 ? -theta : theta, cross, false};
}

/// Value of the deposition density together with its partial derivatives with
/// respect to each pattern parameter.
struct DensityPartials {
  double value = 0.0;
  double mass_flow = 0.0;
  double center_distance = 0.0;
  double sigma_d = 0.0;
  double psi = 0.0;
  double sigma_psi = 0.0;

  DensityPartials& operator*=(double s) {
    value *= s;
    mass_flow *= s;
    center_distance *= s;
    sigma_d *= s;
    psi *= s;
    sigma_psi *= s;
    return *this;
  }
};

/// Product of a radial and an angular normal distribution, scaled by D.
inline double density_normal(double X, double Y, const PatternParams& p) {
  return p.mass_flow / (2.0 * std::numbers::pi * p.sigma_d * p.sigma_psi) *
         std::exp(-X * X / (2.0 * p.sigma_d * p.sigma_d)) *
         std::exp(-Y * Y / (2.0 * p.sigma_psi * p.sigma_psi));
}

/// Piecewise-linear surrogate of density_normal with the same peak value.
inline double density_triangle(double X, double Y, const PatternParams& p,
                               TriangleSupport support = TriangleSupport::Literal) {
  const double s2pi = std::sqrt(2.0 * std::numbers::pi);
  const double half_x = support == TriangleSupport::Literal ? 1.0 : s2pi * p.sigma_d;
  const double half_y = support == TriangleSupport::Literal ? 1.0 : s2pi * p.sigma_psi;
  const double fx = std::max(0.0, 1.0 - std::abs(X) / half_x) / (s2pi * p.sigma_d);
  const double fy = std::max(0.0, 1.0 - std::abs(Y) / half_y) / (s2pi * p.sigma_psi);
  return p.mass_flow * fx * fy;
}

DensityPartials density_normal_partials(double X, double Y, const PatternParams& p);
DensityPartials density_triangle_partials(double X, double Y, const PatternParams& p,
                                          TriangleSupport support);

inline DensityPartials density_partials(double X, double Y, const PatternParams& p,
                                        const ModelOptions& opts) {
  return opts.kind == DepositionModel::FullNormal
             ? density_normal_partials(X, Y, p)
             : density_triangle_partials(X, Y, p, opts.triangle_support);
}

inline double density(double X, double Y, const PatternParams& p, const ModelOptions& opts) {
  return opts.kind == DepositionModel::FullNormal
             ? density_normal(X, Y, p)
             : density_triangle(X, Y, p, opts.triangle_support);
}

/// Radius around the tractor beyond which a disc deposits nothing measurable
/// (below exp(-50) of the peak for the normal model, exactly zero for triangles).
double pattern_reach(const PatternParams& p, const ModelOptions& opts);

/// Calls visit(flat_index, DensityPartials) for every grid cell within reach of the
/// disc pattern, in row-major order. Only `value` is filled unless WithPartials.
/// This is the single deposition kernel shared by the plant and the predictors.
template <bool WithPartials, class Visitor>
void visit_disc_deposit(const FieldGrid& grid, const TractorState& pose, const PatternParams& p,
                        const ModelOptions& opts, Visitor&& visit, int row_begin = 0,
                        int row_end = INT_MAX) {
  const double h = grid.cell_size();
  const Point origin = grid.origin();
  const int n = grid.n_cells();
  const double reach = pattern_reach(p, opts);

  auto first_index = [&](double lo, double o) {
    return std::clamp(static_cast<int>(std::floor((lo - o) / h - 0.5)), 0, n);
  };
  auto last_index = [&](double hi, double o) {
    return std::clamp(static_cast<int>(std::ceil((hi - o) / h - 0.5)) + 1, 0, n);
  };
  const int r0 = std::max(first_index(pose.y - reach, origin.y), row_begin);
  const int r1 = std::min(last_index(pose.y + reach, origin.y), row_end);
  const int c0 = first_index(pose.x - reach, origin.x);
  const int c1 = last_index(pose.x + reach, origin.x);

  const Point tractor{pose.x, pose.y};
  const double area = grid.cell_area();
  for (int row = r0; row < r1; ++row) {
    for (int col = c0; col < c1; ++col) {
      const Point cell = grid.center(row, col);
      const double r = std::hypot(cell.x - tractor.x, cell.y - tractor.y);
      double scale = 1.0;
      if (opts.scaling == DepositScaling::Conservative) {
        // The r -> 0 singularity of area / r carries no mass.
        if (r < kDegenerateDistance) continue;
        scale = area / r;
      }
      const Bearing b = bearing(cell, tractor, pose.phi);
      const double X = r - p.center_distance;
      const double Y = b.theta - p.psi;
      const std::size_t index = static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
                                static_cast<std::size_t>(col);
      DensityPartials out;
      if constexpr (WithPartials) {
        out = density_partials(X, Y, p, opts);
        out *= scale;
      } else {
        out.value = density(X, Y, p, opts) * scale;
      }
      visit(index, out);
    }
  }
}

/// Deposit of both discs at one pose; entries are q_left + q_right.
/// `threads` > 1 splits the grid into disjoint row bands.
AmountMap total_deposit(const TractorState& pose, const PatternParams& left,
                        const PatternParams& right, const FieldGrid& grid,
                        const ModelOptions& opts, int threads = 1);

}  // namespace spreader
