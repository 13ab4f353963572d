#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsassoc/model.hpp"

namespace epsassoc {

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  Index n = 0;

  // Maximum likelihood variance, RSS / n.
  double sigma2_mle() const { return rss / static_cast<double>(n); }
};

// Least squares through a column-pivoted QR. Throws ComputationError when X
// is rank deficient.
OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y);

// Shared null fit for many linear score tests on the same rows.
struct LinearNull {
  Eigen::MatrixXd nuisance;
  Eigen::VectorXd residuals;
  double sigma2 = 1.0;
  Eigen::LDLT<Eigen::MatrixXd> gram;  // of the nuisance columns
};

LinearNull fit_linear_null(const Eigen::MatrixXd& nuisance, const Eigen::VectorXd& y);

// Rao score test of the tested columns against the null, with the MLE
// variance estimate.
TestResult score_test_linear(const LinearNull& null, const Eigen::MatrixXd& tested,
                             const std::vector<std::string>& tested_names = {});

TestResult score_test_linear(const RegressionView& view, const std::vector<std::string>& tested_names = {});

// Normal-likelihood fit: OLS coefficients, sigma at its MLE, exact observed
// information in (coefficients, sigma).
FitResult fit_linear(const RegressionView& view, const ModelSpec& spec, const Dataset& data,
                     double level = 0.95);

double normal_loglik(const Eigen::VectorXd& residuals, double sigma);

}  // namespace epsassoc
