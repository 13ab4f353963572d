#include "epsassoc/eps_only.hpp"

#include <cmath>
#include <sstream>

#include "epsassoc/errors.hpp"
#include "epsassoc/linalg.hpp"
#include "epsassoc/linear_model.hpp"
#include "epsassoc/stats.hpp"

namespace epsassoc {

namespace {

void check_rows(const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower, double c_upper) {
  if (!(c_lower <= c_upper)) throw ValidationError("cutoffs must satisfy c_lower <= c_upper");
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] > c_lower && y[i] < c_upper) {
      std::ostringstream msg;
      msg << "row " << i << " with y = " << y[i] << " lies inside the non-extreme interval (" << c_lower << ", "
          << c_upper << ")";
      throw ValidationError(msg.str());
    }
  }
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive and finite");
}

// phi(t) t^j / D, zero for an infinite cutoff.
double tail_ratio(double t, double log_mass, int power) {
  if (!std::isfinite(t)) return 0.0;
  return std::exp(log_norm_pdf(t) - log_mass) * std::pow(t, power);
}

// Average log-likelihood over (coef, log sigma), for the optimizer.
Objective average_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double c_lower, double c_upper) {
  return [&X, &y, c_lower, c_upper](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    const Index p = X.cols();
    const double sigma = std::exp(theta[p]);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(y.size());
    const Eigen::VectorXd coef = theta.head(p);
    double value = 0.0;
    Eigen::VectorXd g_coef = Eigen::VectorXd::Zero(p);
    double g_sigma = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      const double mu = X.row(i).dot(coef);
      const double z = (y[i] - mu) / sigma;
      const TruncationTerms t = truncation_terms(mu, sigma, c_lower, c_upper);
      value += log_norm_pdf(z) - std::log(sigma) - t.log_mass;
      if (grad != nullptr) {
        g_coef.noalias() += X.row(i).transpose() * ((z + t.h0) / sigma);
        g_sigma += -1.0 + z * z + t.h1;  // already times sigma
      }
    }
    if (grad != nullptr) {
      grad->resize(p + 1);
      grad->head(p) = g_coef / n;
      (*grad)[p] = g_sigma / n;
    }
    return value / n;
  };
}

}  // namespace

TruncationTerms truncation_terms(double mu, double sigma, double c_lower, double c_upper) {
  const double l = (c_lower - mu) / sigma;
  const double u = (c_upper - mu) / sigma;
  TruncationTerms t;
  t.log_mass = log_add_exp(log_norm_cdf(l), log_norm_cdf(-u));
  if (c_lower == c_upper) return t;  // no truncation: D = 1, every h vanishes
  const double rl = tail_ratio(l, t.log_mass, 0);
  const double ru = tail_ratio(u, t.log_mass, 0);
  const double lf = std::isfinite(l) ? l : 0.0;
  const double uf = std::isfinite(u) ? u : 0.0;
  t.h0 = rl - ru;
  t.h1 = rl * lf - ru * uf;
  t.h2 = rl * lf * lf - ru * uf * uf;
  t.h3 = rl * lf * lf * lf - ru * uf * uf * uf;
  return t;
}

double loglik_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                       const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       double c_lower, double c_upper) {
  check_sigma(sigma);
  check_rows(y, c_lower, c_upper);
  double value = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = X.row(i).dot(coef);
    value += log_norm_pdf((y[i] - mu) / sigma) - std::log(sigma) -
             truncation_terms(mu, sigma, c_lower, c_upper).log_mass;
  }
  return value;
}

double loglik_eps_only(const ParameterVector& params, const RegressionView& view, double c_lower,
                       double c_upper) {
  return loglik_eps_only(params.coefficients(), params.sigma, view.design, view.y, c_lower, c_upper);
}

Eigen::VectorXd gradient_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower, double c_upper) {
  check_sigma(sigma);
  check_rows(y, c_lower, c_upper);
  const Index p = X.cols();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = X.row(i).dot(coef);
    const double f = y[i] - mu;
    const TruncationTerms t = truncation_terms(mu, sigma, c_lower, c_upper);
    grad.head(p) += X.row(i).transpose() * (f / (sigma * sigma) + t.h0 / sigma);
    grad[p] += -1.0 / sigma + f * f / std::pow(sigma, 3) + t.h1 / sigma;
  }
  return grad;
}

Eigen::MatrixXd information_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                                     const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower,
                                     double c_upper, InformationKind kind) {
  check_sigma(sigma);
  const Index p = X.cols();
  const double s2 = sigma * sigma;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p + 1, p + 1);
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(p);
  double ss = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = X.row(i).dot(coef);
    const double f = y[i] - mu;
    const TruncationTerms t = truncation_terms(mu, sigma, c_lower, c_upper);
    const double a = 1.0 - t.h1 - t.h0 * t.h0;
    const double b = t.h0 - t.h2 - t.h0 * t.h1;
    const double c = -1.0 + 2.0 * t.h1 - t.h3 - t.h1 * t.h1;
    info.topLeftCorner(p, p).selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), a / s2);
    if (kind == InformationKind::kExpected) {
      cross += X.row(i).transpose() * (b / s2);
      ss += (c + 3.0) / s2;
    } else {
      cross += X.row(i).transpose() * (2.0 * f / (s2 * sigma) + b / s2);
      ss += 3.0 * f * f / (s2 * s2) + c / s2;
    }
  }
  info.topLeftCorner(p, p) = info.topLeftCorner(p, p).selfadjointView<Eigen::Lower>();
  info.col(p).head(p) = cross;
  info.row(p).head(p) = cross.transpose();
  info(p, p) = ss;
  return info;
}

namespace {

// Newton steps with the exact Hessian from a nearby BFGS solution, so score
// statistics evaluated at the null are accurate to rounding.
void polish(TruncatedFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double c_lower, double c_upper,
            double tolerance) {
  const Index p = X.cols();
  const double n = static_cast<double>(y.size());
  // Average gradient in (coef, log sigma), the optimizer's scale.
  auto scaled_norm = [&](const Eigen::VectorXd& coef, double sigma) {
    Eigen::VectorXd g = gradient_eps_only(coef, sigma, X, y, c_lower, c_upper) / n;
    g[p] *= sigma;
    return g.lpNorm<Eigen::Infinity>();
  };
  double best = scaled_norm(fit.coef, fit.sigma);
  for (int it = 0; it < 8 && best > 1e-15; ++it) {
    const Eigen::VectorXd g = gradient_eps_only(fit.coef, fit.sigma, X, y, c_lower, c_upper);
    const Eigen::MatrixXd info =
        information_eps_only(fit.coef, fit.sigma, X, y, c_lower, c_upper, InformationKind::kObserved);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(g);
    const Eigen::VectorXd coef = fit.coef + step.head(p);
    const double sigma = fit.sigma + step[p];
    if (!(sigma > 0.0) || !coef.allFinite()) break;
    const double norm = scaled_norm(coef, sigma);
    if (!(norm < best)) break;
    fit.coef = coef;
    fit.sigma = sigma;
    best = norm;
  }
  fit.gradient_norm = best;
  fit.converged = best <= tolerance;
  fit.loglik = loglik_eps_only(fit.coef, fit.sigma, X, y, c_lower, c_upper);
}

}  // namespace

TruncatedFit fit_truncated(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double c_lower, double c_upper,
                           const OptimizerOptions& options) {
  check_rows(y, c_lower, c_upper);
  const Index p = X.cols();
  if (y.size() < p + 2) {
    std::ostringstream msg;
    msg << "truncated fit needs at least " << p + 2 << " extreme rows, got " << y.size();
    throw ValidationError(msg.str());
  }
  const OlsFit ols = fit_ols(X, y);
  const double sd = std::sqrt(ols.sigma2_mle());
  Eigen::VectorXd init(p + 1);
  init << ols.coef, std::log(sd > 0.0 ? sd : 1.0);

  const Objective objective = average_objective(X, y, c_lower, c_upper);
  const OptimizerReport report = maximize(objective, init, options);

  TruncatedFit fit;
  fit.coef = report.argmax.head(p);
  fit.sigma = std::exp(report.argmax[p]);
  fit.loglik = report.max_value * static_cast<double>(y.size());
  fit.converged = report.converged;
  fit.iterations = report.iterations;
  fit.gradient_norm = report.gradient_norm;
  if (report.gradient_norm < 1e-3) polish(fit, X, y, c_lower, c_upper, options.gradient_tolerance);
  if (options.compute_information) {
    // Rescale to the summed log-likelihood and move from log sigma to sigma.
    Eigen::MatrixXd info = report.observed_information * static_cast<double>(y.size());
    info.col(p) /= fit.sigma;
    info.row(p) /= fit.sigma;
    fit.information = info;
  }
  return fit;
}

FitResult fit_eps_only(const RegressionView& view, const ModelSpec& spec, const Dataset& data, double c_lower,
                       double c_upper, const EpsOnlyOptions& options) {
  const TruncatedFit tf = fit_truncated(view.design, view.y, c_lower, c_upper, options.optimizer);
  FitResult fit;
  fit.estimates = ParameterVector::from_coefficients(tf.coef, spec, tf.sigma);
  fit.names = spec.coefficient_names(data);
  fit.names.push_back("sigma");
  fit.values.resize(tf.coef.size() + 1);
  fit.values << tf.coef, tf.sigma;
  fit.observed_information = tf.information;
  fit.loglik = tf.loglik;
  fit.converged = tf.converged;
  fit.iterations = tf.iterations;
  if (!tf.converged) {
    std::ostringstream msg;
    msg << "optimizer stopped after " << tf.iterations << " iterations with gradient sup-norm " << tf.gradient_norm;
    fit.diagnostic = msg.str();
  }
  attach_wald_intervals(fit, options.confidence_level);
  return fit;
}

EpsOnlyNull fit_eps_only_null(Eigen::MatrixXd nuisance, Eigen::VectorXd y, double c_lower, double c_upper,
                              const OptimizerOptions& options) {
  EpsOnlyNull null;
  OptimizerOptions opts = options;
  opts.compute_information = false;
  null.fit = fit_truncated(nuisance, y, c_lower, c_upper, opts);
  if (!null.fit.converged) {
    std::ostringstream msg;
    msg << "EPS-only null model did not converge (gradient sup-norm " << null.fit.gradient_norm << ")";
    throw ComputationError(msg.str());
  }
  null.nuisance = std::move(nuisance);
  null.y = std::move(y);
  null.c_lower = c_lower;
  null.c_upper = c_upper;
  return null;
}

EpsOnlyScoreWorkspace score_workspace_eps_only(const EpsOnlyNull& null, const Eigen::MatrixXd& tested,
                                               InformationKind kind) {
  const Index n = null.y.size();
  const Index k = tested.cols();
  const Index q = null.nuisance.cols();
  if (tested.rows() != n) throw ValidationError("tested columns do not match the null model rows");
  const double sigma = null.fit.sigma;

  EpsOnlyScoreWorkspace ws;
  ws.h0.resize(n);
  ws.h1.resize(n);
  ws.h2.resize(n);
  ws.h3.resize(n);
  ws.f = null.y - null.nuisance * null.fit.coef;
  for (Index i = 0; i < n; ++i) {
    const TruncationTerms t = truncation_terms(null.y[i] - ws.f[i], sigma, null.c_lower, null.c_upper);
    ws.h0[i] = t.h0;
    ws.h1[i] = t.h1;
    ws.h2[i] = t.h2;
    ws.h3[i] = t.h3;
  }
  ws.a = 1.0 - ws.h1.array() - ws.h0.array().square();
  ws.b = ws.h0.array() - ws.h2.array() - ws.h0.array() * ws.h1.array();
  ws.c = -1.0 + 2.0 * ws.h1.array() - ws.h3.array() - ws.h1.array().square();
  ws.d = 2.0 + 2.0 * ws.h1.array() - ws.h3.array() - ws.h1.array().square();

  ws.score = tested.transpose() * (ws.f / (sigma * sigma) + ws.h0 / sigma);

  const double s2 = sigma * sigma;
  auto assemble = [&](bool observed) {
    const Eigen::VectorXd cross_w =
        observed ? Eigen::VectorXd(2.0 * ws.f / (s2 * sigma) + ws.b / s2) : Eigen::VectorXd(ws.b / s2);
    const double ss = observed ? (3.0 * ws.f.array().square() / (s2 * s2) + ws.c.array() / s2).sum()
                               : ws.d.sum() / s2;
    const Eigen::VectorXd aw = ws.a / s2;
    const Eigen::MatrixXd i00 = tested.transpose() * aw.asDiagonal() * tested;
    Eigen::MatrixXd i0t(k, q + 1);
    i0t.leftCols(q) = tested.transpose() * aw.asDiagonal() * null.nuisance;
    i0t.col(q) = tested.transpose() * cross_w;
    Eigen::MatrixXd itt(q + 1, q + 1);
    itt.topLeftCorner(q, q) = null.nuisance.transpose() * aw.asDiagonal() * null.nuisance;
    itt.col(q).head(q) = null.nuisance.transpose() * cross_w;
    itt.row(q).head(q) = itt.col(q).head(q).transpose();
    itt(q, q) = ss;
    return schur_complement(i00, i0t, itt);
  };
  ws.variance = assemble(kind == InformationKind::kObserved);
  ws.observed_variance = kind == InformationKind::kObserved ? ws.variance : assemble(true);
  return ws;
}

TestResult score_test_eps_only(const EpsOnlyNull& null, const Eigen::MatrixXd& tested,
                               const std::vector<std::string>& tested_names, InformationKind kind) {
  const EpsOnlyScoreWorkspace ws = score_workspace_eps_only(null, tested, kind);
  const double t = score_statistic(ws.score, ws.variance, tested_names);
  return make_chi2_result(t, static_cast<int>(tested.cols()), TestMethod::kScore, tested.rows());
}

TestResult score_test_eps_only(const RegressionView& view, double c_lower, double c_upper,
                               const std::vector<std::string>& tested_names, InformationKind kind,
                               const OptimizerOptions& options) {
  const EpsOnlyNull null = fit_eps_only_null(view.nuisance_columns(), view.y, c_lower, c_upper, options);
  return score_test_eps_only(null, view.tested_columns(), tested_names, kind);
}

TestResult lrt_eps_only(const RegressionView& view, double c_lower, double c_upper,
                        const OptimizerOptions& options) {
  OptimizerOptions opts = options;
  opts.compute_information = false;
  const TruncatedFit null = fit_truncated(view.nuisance_columns(), view.y, c_lower, c_upper, opts);
  const TruncatedFit alt = fit_truncated(view.design, view.y, c_lower, c_upper, opts);
  if (!null.converged || !alt.converged) throw ComputationError("EPS-only likelihood ratio fits did not converge");
  const double lambda = std::max(0.0, 2.0 * (alt.loglik - null.loglik));
  return make_chi2_result(lambda, static_cast<int>(view.tested.size()), TestMethod::kLrt, view.size());
}

}  // namespace epsassoc
