#include "epsassoc/linear_model.hpp"

#include <cmath>
#include <numbers>

#include "epsassoc/errors.hpp"
#include "epsassoc/linalg.hpp"

namespace epsassoc {

OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (X.rows() < X.cols()) throw ComputationError("least squares: fewer rows than coefficients");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) throw ComputationError("least squares: design matrix is rank deficient");
  OlsFit fit;
  fit.coef = qr.solve(y);
  fit.residuals = y - X * fit.coef;
  fit.rss = fit.residuals.squaredNorm();
  fit.n = X.rows();
  return fit;
}

LinearNull fit_linear_null(const Eigen::MatrixXd& nuisance, const Eigen::VectorXd& y) {
  const OlsFit ols = fit_ols(nuisance, y);
  LinearNull null;
  null.nuisance = nuisance;
  null.residuals = ols.residuals;
  null.sigma2 = ols.sigma2_mle();
  if (!(null.sigma2 > 0.0)) throw ComputationError("null linear model fits the phenotype exactly");
  null.gram.compute(nuisance.transpose() * nuisance);
  return null;
}

TestResult score_test_linear(const LinearNull& null, const Eigen::MatrixXd& tested,
                             const std::vector<std::string>& tested_names) {
  const Eigen::VectorXd score = tested.transpose() * null.residuals / null.sigma2;
  const Eigen::MatrixXd cross = tested.transpose() * null.nuisance;
  Eigen::MatrixXd variance = tested.transpose() * tested - cross * null.gram.solve(cross.transpose());
  variance /= null.sigma2;
  const double t = score_statistic(score, 0.5 * (variance + variance.transpose()), tested_names);
  return make_chi2_result(t, static_cast<int>(tested.cols()), TestMethod::kScore, tested.rows());
}

TestResult score_test_linear(const RegressionView& view, const std::vector<std::string>& tested_names) {
  const LinearNull null = fit_linear_null(view.nuisance_columns(), view.y);
  return score_test_linear(null, view.tested_columns(), tested_names);
}

double normal_loglik(const Eigen::VectorXd& residuals, double sigma) {
  const double n = static_cast<double>(residuals.size());
  return -n * (0.5 * std::log(2.0 * std::numbers::pi) + std::log(sigma)) -
         0.5 * residuals.squaredNorm() / (sigma * sigma);
}

FitResult fit_linear(const RegressionView& view, const ModelSpec& spec, const Dataset& data, double level) {
  const OlsFit ols = fit_ols(view.design, view.y);
  const double sigma = std::sqrt(ols.sigma2_mle());
  if (!(sigma > 0.0)) throw ComputationError("linear fit: zero residual variance");
  const Index p = view.design.cols();

  FitResult fit;
  fit.estimates = ParameterVector::from_coefficients(ols.coef, spec, sigma);
  fit.names = spec.coefficient_names(data);
  fit.names.push_back("sigma");
  fit.values.resize(p + 1);
  fit.values << ols.coef, sigma;
  fit.observed_information = Eigen::MatrixXd::Zero(p + 1, p + 1);
  fit.observed_information.topLeftCorner(p, p) = view.design.transpose() * view.design / (sigma * sigma);
  fit.observed_information.col(p).head(p) = 2.0 * view.design.transpose() * ols.residuals / std::pow(sigma, 3);
  fit.observed_information.row(p).head(p) = fit.observed_information.col(p).head(p).transpose();
  fit.observed_information(p, p) = 2.0 * static_cast<double>(view.size()) / (sigma * sigma);
  fit.loglik = normal_loglik(ols.residuals, sigma);
  fit.converged = true;
  attach_wald_intervals(fit, level);
  return fit;
}

}  // namespace epsassoc
