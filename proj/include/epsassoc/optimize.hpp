#pragma once

#include <functional>

#include <Eigen/Dense>

namespace epsassoc {

// Objective evaluated at x. When grad is non-null it must be filled with the
// gradient at x. Returning a non-finite value marks x as infeasible.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimizerOptions {
  double gradient_tolerance = 1e-8;        // sup-norm
  double relative_value_tolerance = 1e-12;
  int max_iterations = 500;
  int max_backtracks = 60;
  bool compute_information = true;
};

struct OptimizerReport {
  Eigen::VectorXd argmax;
  double max_value = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  // Negative Hessian at argmax, empty when compute_information is off.
  Eigen::MatrixXd observed_information;
};

// BFGS ascent with backtracking line search.
OptimizerReport maximize(const Objective& objective, const Eigen::VectorXd& init,
                         const OptimizerOptions& options = {});

// Wraps a value-only function with central-difference gradients.
Objective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f);

Eigen::VectorXd finite_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                     const Eigen::VectorXd& point, double step = 1e-5);

// Central differences of the objective's gradient, symmetrised. Step per
// coordinate is cbrt(eps) * max(1, |x_i|).
Eigen::MatrixXd finite_diff_hessian(const Objective& objective, const Eigen::VectorXd& point);

}  // namespace epsassoc
