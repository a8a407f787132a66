#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace spreader {

struct OptimizerSettings {
  int max_iterations = 60;
  double gradient_tolerance = 1e-6;   // projected-gradient norm [g^2 per unit control]
  double step_tolerance = 1e-7;       // max step relative to 1 + |z|_inf
  double finite_diff_epsilon = 1e-5;  // relative step of the gradient self-check
  bool verify_gradient = false;       // compare analytic and central-difference gradients
  bool gauss_newton = true;           // false: plain projected gradient
  int multi_start = 0;                // extra random feasible starts
  std::uint64_t seed = 0;

  void validate() const;
};

/// Value, gradient, and Gauss-Newton Hessian (2 J^T J) of a sum of squares.
struct Linearization {
  double cost = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd gauss_newton;
};

class LeastSquaresObjective {
 public:
  virtual ~LeastSquaresObjective() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual double cost(const Eigen::VectorXd& z) const = 0;
  virtual Linearization linearize(const Eigen::VectorXd& z) const = 0;
};

/// Feasible set of a schedule: every step lies in [lower, upper] and moves at
/// most `rate` per component from the step before it; step 0 moves from `anchor`.
/// Variables are laid out step-major with `width` components per step.
class StepwiseBox {
 public:
  StepwiseBox(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd rate,
              Eigen::VectorXd anchor, Eigen::Index steps);

  Eigen::Index dimension() const { return width_ * steps_; }
  Eigen::Index width() const { return width_; }

  /// Forward pass: clamp each step into its window given the projected step before.
  /// Idempotent, and the identity on feasible points.
  Eigen::VectorXd project(const Eigen::VectorXd& z) const;

  bool contains(const Eigen::VectorXd& z, double slack = 0.0) const;

  /// Admissible interval of variable i given its predecessor in z.
  std::pair<double, double> window(const Eigen::VectorXd& z, Eigen::Index i) const;

  Eigen::VectorXd random_point(std::mt19937_64& rng) const;

 private:
  Eigen::VectorXd lower_, upper_, rate_, anchor_;
  Eigen::Index width_;
  Eigen::Index steps_;
};

struct IterationInfo {
  int start = 0;
  int iteration = 0;
  double cost = 0.0;
  double gradient_norm = 0.0;
  double step_size = 0.0;
  double damping = 0.0;
};

struct OptimizeResult {
  Eigen::VectorXd z;
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

using IterationLog = std::function<void(const IterationInfo&)>;

/// Projected Levenberg-Marquardt on a StepwiseBox, with a projected-gradient
/// fallback. Only cost decreases are accepted, so the result never costs more
/// than `initial`. Throws NumericalFailure on non-finite values.
OptimizeResult minimize(const LeastSquaresObjective& objective, const StepwiseBox& box,
                        const Eigen::VectorXd& initial, const OptimizerSettings& settings,
                        const IterationLog& log = {});

/// Central differences with step eps * max(1, |z_i|).
Eigen::VectorXd central_difference_gradient(const LeastSquaresObjective& objective,
                                            const Eigen::VectorXd& z, double eps);

}  // namespace spreader
