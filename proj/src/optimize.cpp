#include "epsassoc/optimize.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "epsassoc/errors.hpp"

namespace epsassoc {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kRoundoff = 1e-13;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

OptimizerReport maximize(const Objective& objective, const Eigen::VectorXd& init,
                         const OptimizerOptions& options) {
  const Eigen::Index dim = init.size();
  OptimizerReport report;

  Eigen::VectorXd x = init;
  Eigen::VectorXd grad(dim);
  double value = objective(x, &grad);
  if (!std::isfinite(value) || !all_finite(grad)) {
    std::ostringstream msg;
    msg << "maximize: objective not finite at the initial point (value " << value << ")";
    throw ComputationError(msg.str());
  }

  // Work with the minimisation problem F = -f.
  double F = -value;
  Eigen::VectorXd G = -grad;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
  bool fresh_metric = true;
  int stall_count = 0;

  Eigen::VectorXd x_new(dim), grad_new(dim);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (G.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) break;

    Eigen::VectorXd direction = -H * G;
    if (direction.dot(G) >= 0.0) {
      H.setIdentity();
      fresh_metric = true;
      direction = -G;
    }
    double step = 1.0;
    if (fresh_metric) step = std::min(1.0, 1.0 / std::max(G.norm(), 1e-300));

    const double slope = direction.dot(G);
    bool accepted = false;
    bool saw_finite = false;
    double F_new = 0.0;
    for (int k = 0; k < options.max_backtracks; ++k) {
      x_new = x + step * direction;
      const double v = objective(x_new, &grad_new);
      if (std::isfinite(v) && all_finite(grad_new)) {
        saw_finite = true;
        F_new = -v;
        if (F_new <= F + kArmijo * step * slope) {
          accepted = true;
          break;
        }
        // Near the optimum the decrease drops below rounding; accept steps
        // that still shrink the gradient.
        if (F_new - F <= kRoundoff * std::max(1.0, std::abs(F)) &&
            grad_new.lpNorm<Eigen::Infinity>() < G.lpNorm<Eigen::Infinity>()) {
          accepted = true;
          break;
        }
        step *= 0.5;
      } else {
        step *= 0.1;
      }
    }

    if (!accepted) {
      if (!saw_finite) {
        std::ostringstream msg;
        msg << "maximize: objective non-finite along the search direction at iteration " << iter
            << " (gradient sup-norm " << G.lpNorm<Eigen::Infinity>() << ")";
        throw ComputationError(msg.str());
      }
      if (!fresh_metric) {
        H.setIdentity();
        fresh_metric = true;
        continue;
      }
      break;  // no descent possible even along the gradient
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = -grad_new - G;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_metric) {
        H = Eigen::MatrixXd::Identity(dim, dim) * (sy / y.squaredNorm());
        fresh_metric = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += rho * rho * (sy + y.dot(Hy)) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    const double rel_change = std::abs(F_new - F) / std::max(1.0, std::abs(F));
    const bool gradient_shrank = grad_new.lpNorm<Eigen::Infinity>() < 0.5 * G.lpNorm<Eigen::Infinity>();
    x = x_new;
    F = F_new;
    G = -grad_new;
    stall_count = (rel_change <= options.relative_value_tolerance && !gradient_shrank) ? stall_count + 1 : 0;
    if (stall_count >= 3) {
      ++iter;
      break;
    }
  }

  // BFGS can crawl on badly scaled problems close to the optimum; finish with
  // Newton steps on a finite-difference Hessian of the analytic gradient.
  for (int k = 0; k < 8 && G.lpNorm<Eigen::Infinity>() > options.gradient_tolerance &&
                  G.lpNorm<Eigen::Infinity>() < 1e-3;
       ++k) {
    const Eigen::MatrixXd curvature = -finite_diff_hessian(objective, x);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(curvature);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) break;
    const Eigen::VectorXd direction = -ldlt.solve(G);
    bool moved = false;
    for (double step = 1.0; step > 1e-4; step *= 0.5) {
      x_new = x + step * direction;
      const double v = objective(x_new, &grad_new);
      if (!std::isfinite(v) || !all_finite(grad_new)) continue;
      if (grad_new.lpNorm<Eigen::Infinity>() < G.lpNorm<Eigen::Infinity>() &&
          -v <= F + kRoundoff * std::max(1.0, std::abs(F))) {
        x = x_new;
        F = -v;
        G = -grad_new;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ++iter;
  }

  report.argmax = x;
  report.max_value = -F;
  report.iterations = iter;
  report.gradient_norm = G.lpNorm<Eigen::Infinity>();
  report.converged = report.gradient_norm <= options.gradient_tolerance;
  if (options.compute_information) {
    report.observed_information = -finite_diff_hessian(objective, x);
  }
  return report;
}

Objective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f) {
  return [f = std::move(f)](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double v = f(x);
    if (grad != nullptr) {
      const double step = std::cbrt(std::numeric_limits<double>::epsilon());
      *grad = finite_diff_gradient(f, x, step);
    }
    return v;
  };
}

Eigen::VectorXd finite_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                     const Eigen::VectorXd& point, double step) {
  Eigen::VectorXd g(point.size());
  Eigen::VectorXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(point[i]));
    probe[i] = point[i] + h;
    const double up = f(probe);
    probe[i] = point[i] - h;
    const double down = f(probe);
    probe[i] = point[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd finite_diff_hessian(const Objective& objective, const Eigen::VectorXd& point) {
  const Eigen::Index dim = point.size();
  const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd probe = point;
  Eigen::VectorXd g_up(dim), g_down(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double h = base_step * std::max(1.0, std::abs(point[i]));
    probe[i] = point[i] + h;
    objective(probe, &g_up);
    probe[i] = point[i] - h;
    objective(probe, &g_down);
    probe[i] = point[i];
    hess.col(i) = (g_up - g_down) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace epsassoc
