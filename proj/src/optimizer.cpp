#include "spreader/optimizer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "spreader/errors.hpp"

namespace spreader {

void OptimizerSettings::validate() const {
  if (max_iterations <= 0) throw ConfigError("optimizer: max_iterations must be positive");
  if (!(gradient_tolerance > 0.0)) throw ConfigError("optimizer: gradient_tolerance must be positive");
  if (!(step_tolerance > 0.0)) throw ConfigError("optimizer: step_tolerance must be positive");
  if (!(finite_diff_epsilon > 0.0)) throw ConfigError("optimizer: finite_diff_epsilon must be positive");
  if (multi_start < 0) throw ConfigError("optimizer: multi_start must be >= 0");
}

StepwiseBox::StepwiseBox(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd rate,
                         Eigen::VectorXd anchor, Eigen::Index steps)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      rate_(std::move(rate)),
      anchor_(std::move(anchor)),
      width_(lower_.size()),
      steps_(steps) {
  if (upper_.size() != width_ || rate_.size() != width_ || anchor_.size() != width_) {
    throw ShapeError("StepwiseBox: component vectors differ in size");
  }
  if (steps < 1) throw ConfigError("StepwiseBox: need at least one step");
  for (Eigen::Index c = 0; c < width_; ++c) {
    if (lower_(c) > upper_(c) || rate_(c) <= 0.0) {
      throw ConfigError("StepwiseBox: empty box or non-positive rate");
    }
    if (anchor_(c) < lower_(c) || anchor_(c) > upper_(c)) {
      throw InfeasibleScheduleError("StepwiseBox: previous control outside its box");
    }
  }
}

std::pair<double, double> StepwiseBox::window(const Eigen::VectorXd& z, Eigen::Index i) const {
  const Eigen::Index c = i % width_;
  const double before = i < width_ ? anchor_(c) : z(i - width_);
  return {std::max(lower_(c), before - rate_(c)), std::min(upper_(c), before + rate_(c))};
}

Eigen::VectorXd StepwiseBox::project(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out = z;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto [lo, hi] = window(out, i);
    out(i) = std::clamp(out(i), lo, hi);
  }
  return out;
}

bool StepwiseBox::contains(const Eigen::VectorXd& z, double slack) const {
  if (z.size() != dimension()) return false;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto [lo, hi] = window(z, i);
    if (z(i) < lo - slack || z(i) > hi + slack) return false;
  }
  return true;
}

Eigen::VectorXd StepwiseBox::random_point(std::mt19937_64& rng) const {
  Eigen::VectorXd z(dimension());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto [lo, hi] = window(z, i);
    z(i) = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return z;
}

Eigen::VectorXd central_difference_gradient(const LeastSquaresObjective& objective,
                                            const Eigen::VectorXd& z, double eps) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = eps * std::max(1.0, std::abs(z(i)));
    Eigen::VectorXd plus = z, minus = z;
    plus(i) += h;
    minus(i) -= h;
    g(i) = (objective.cost(plus) - objective.cost(minus)) / (2.0 * h);
  }
  return g;
}

namespace {

void require_finite(const Linearization& lin, int iteration) {
  if (std::isfinite(lin.cost) && lin.gradient.allFinite() && lin.gauss_newton.allFinite()) return;
  std::ostringstream diag;
  diag << "iteration " << iteration << ": cost=" << lin.cost
       << " gradient=" << lin.gradient.transpose();
  throw NumericalFailure("optimizer: non-finite cost or gradient", diag.str());
}

void require_finite(double cost, const Eigen::VectorXd& z, int iteration) {
  if (std::isfinite(cost)) return;
  std::ostringstream diag;
  diag << "iteration " << iteration << ": trial point " << z.transpose();
  throw NumericalFailure("optimizer: non-finite cost during line search", diag.str());
}

// Variables pinned at a window edge with the gradient pushing outward.
std::vector<bool> free_variables(const StepwiseBox& box, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& g) {
  std::vector<bool> free(static_cast<std::size_t>(z.size()), true);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto [lo, hi] = box.window(z, i);
    const double tiny = 1e-12 * (1.0 + std::abs(z(i)));
    if ((z(i) <= lo + tiny && g(i) > 0.0) || (z(i) >= hi - tiny && g(i) < 0.0)) {
      free[static_cast<std::size_t>(i)] = false;
    }
  }
  return free;
}

double relative_step(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

OptimizeResult local_search(const LeastSquaresObjective& objective, const StepwiseBox& box,
                            const Eigen::VectorXd& start, const OptimizerSettings& settings,
                            int start_index, const IterationLog& log) {
  OptimizeResult res;
  res.z = start;
  Linearization lin = objective.linearize(res.z);
  require_finite(lin, 0);
  res.cost = lin.cost;
  res.initial_cost = lin.cost;
  res.stop_reason = "max_iterations";

  const Eigen::Index n = res.z.size();
  double damping = 1e-3;

  for (int it = 1; it <= settings.max_iterations; ++it) {
    res.iterations = it;
    const auto free = free_variables(box, res.z, lin.gradient);
    double pg2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (free[static_cast<std::size_t>(i)]) pg2 += lin.gradient(i) * lin.gradient(i);
    }
    const double pg_norm = std::sqrt(pg2);
    if (pg_norm < settings.gradient_tolerance) {
      res.stop_reason = "gradient_tolerance";
      break;
    }

    Eigen::VectorXd trial;
    double trial_cost = res.cost;
    bool accepted = false;

    if (settings.gauss_newton) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
      }
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd H(m, m);
      Eigen::VectorXd g(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        g(a) = lin.gradient(idx[a]);
        for (Eigen::Index b = 0; b < m; ++b) H(a, b) = lin.gauss_newton(idx[a], idx[b]);
      }
      const double diag_floor = 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
        Eigen::MatrixXd A = H;
        for (Eigen::Index a = 0; a < m; ++a) A(a, a) += damping * (H(a, a) + diag_floor);
        const Eigen::VectorXd delta = A.ldlt().solve(-g);
        if (!delta.allFinite()) {
          damping *= 4.0;
          continue;
        }
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
        for (Eigen::Index a = 0; a < m; ++a) step(idx[a]) = delta(a);
        trial = box.project(res.z + step);
        trial_cost = objective.cost(trial);
        require_finite(trial_cost, trial, it);
        if (trial_cost < res.cost) {
          accepted = true;
          damping = std::max(damping / 3.0, 1e-9);
        } else {
          damping *= 4.0;
        }
      }
    }

    if (!accepted) {
      // Diagonally scaled projected gradient with backtracking.
      Eigen::VectorXd scale = lin.gauss_newton.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd dir = -lin.gradient.cwiseQuotient(scale);
      double alpha = 1.0;
      for (int attempt = 0; attempt < 30 && !accepted; ++attempt, alpha *= 0.5) {
        trial = box.project(res.z + alpha * dir);
        trial_cost = objective.cost(trial);
        require_finite(trial_cost, trial, it);
        accepted = trial_cost < res.cost;
      }
    }

    if (!accepted) {
      res.stop_reason = "no_descent";
      break;
    }

    const double step = relative_step(trial, res.z);
    res.z = std::move(trial);
    res.cost = trial_cost;
    if (log) log({start_index, it, res.cost, pg_norm, step, damping});
    if (step < settings.step_tolerance) {
      res.stop_reason = "step_tolerance";
      break;
    }
    lin = objective.linearize(res.z);
    require_finite(lin, it);
  }
  return res;
}

}  // namespace

OptimizeResult minimize(const LeastSquaresObjective& objective, const StepwiseBox& box,
                        const Eigen::VectorXd& initial, const OptimizerSettings& settings,
                        const IterationLog& log) {
  settings.validate();
  if (initial.size() != box.dimension() || objective.dimension() != box.dimension()) {
    throw ShapeError("minimize: dimension mismatch");
  }
  if (!box.contains(initial, 1e-9)) {
    throw InfeasibleScheduleError("minimize: initial point is not feasible");
  }
  const Eigen::VectorXd start = box.project(initial);

  if (settings.verify_gradient) {
    const Linearization lin = objective.linearize(start);
    const Eigen::VectorXd fd =
        central_difference_gradient(objective, start, settings.finite_diff_epsilon);
    const double scale = std::max(fd.lpNorm<Eigen::Infinity>(), 1e-300);
    const double err = (lin.gradient - fd).lpNorm<Eigen::Infinity>() / scale;
    if (!(err < 1e-3)) {
      std::ostringstream diag;
      diag << "analytic " << lin.gradient.transpose() << "\nfinite-diff " << fd.transpose();
      throw NumericalFailure("optimizer: analytic gradient disagrees with finite differences",
                             diag.str());
    }
  }

  OptimizeResult best = local_search(objective, box, start, settings, 0, log);
  if (settings.multi_start > 0) {
    std::mt19937_64 rng(settings.seed);
    for (int k = 1; k <= settings.multi_start; ++k) {
      const Eigen::VectorXd z0 = box.random_point(rng);
      OptimizeResult r = local_search(objective, box, z0, settings, k, log);
      if (r.cost < best.cost) {
        r.initial_cost = best.initial_cost;
        r.iterations += best.iterations;
        best = std::move(r);
      } else {
        best.iterations += r.iterations;
      }
    }
  }
  return best;
}

}  // namespace spreader
