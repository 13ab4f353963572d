#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsassoc/model.hpp"
#include "epsassoc/optimize.hpp"

namespace epsassoc {

// Per-row truncation moments at (mu, sigma). h_j = (phi(l) l^j - phi(u) u^j) / D
// with l, u the standardized cutoffs and D the retained probability mass.
struct TruncationTerms {
  double log_mass = 0.0;
  double h0 = 0.0, h1 = 0.0, h2 = 0.0, h3 = 0.0;
};

TruncationTerms truncation_terms(double mu, double sigma, double c_lower, double c_upper);

// Log-likelihood of extreme-only rows under the truncated normal model.
// Rejects rows strictly inside (c_lower, c_upper) and sigma <= 0.
double loglik_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                       const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       double c_lower, double c_upper);

double loglik_eps_only(const ParameterVector& params, const RegressionView& view, double c_lower,
                       double c_upper);

// Analytic gradient with respect to (coef, sigma).
Eigen::VectorXd gradient_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower, double c_upper);

enum class InformationKind {
  kExpected,  // untruncated expectations E f = 0, E f^2 = sigma^2 substituted
  kObserved,  // exact negative Hessian of the truncated log-likelihood
};

// Negative Hessian in (coef, sigma).
Eigen::MatrixXd information_eps_only(const Eigen::Ref<const Eigen::VectorXd>& coef, double sigma,
                                     const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower,
                                     double c_upper, InformationKind kind);

struct EpsOnlyOptions {
  OptimizerOptions optimizer;
  double confidence_level = 0.95;
};

struct TruncatedFit {
  Eigen::VectorXd coef;
  double sigma = 1.0;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  Eigen::MatrixXd information;  // (coef, sigma), empty unless requested
};

// Maximum likelihood for the truncated model on a bare design matrix.
TruncatedFit fit_truncated(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double c_lower, double c_upper,
                           const OptimizerOptions& options = {});

FitResult fit_eps_only(const RegressionView& view, const ModelSpec& spec, const Dataset& data, double c_lower,
                       double c_upper, const EpsOnlyOptions& options = {});

// Null fit reused across tested columns that share the nuisance design.
struct EpsOnlyNull {
  Eigen::MatrixXd nuisance;
  Eigen::VectorXd y;
  double c_lower = 0.0;
  double c_upper = 0.0;
  TruncatedFit fit;
};

EpsOnlyNull fit_eps_only_null(Eigen::MatrixXd nuisance, Eigen::VectorXd y, double c_lower, double c_upper,
                              const OptimizerOptions& options = {});

struct EpsOnlyScoreWorkspace {
  Eigen::VectorXd h0, h1, h2, h3;
  Eigen::VectorXd a, b, c, d;
  Eigen::VectorXd f;  // residuals y - mu at the null
  Eigen::VectorXd score;
  Eigen::MatrixXd variance;           // from the requested information kind
  Eigen::MatrixXd observed_variance;  // same Schur complement from the observed information
};

EpsOnlyScoreWorkspace score_workspace_eps_only(const EpsOnlyNull& null, const Eigen::MatrixXd& tested,
                                               InformationKind kind = InformationKind::kExpected);

TestResult score_test_eps_only(const EpsOnlyNull& null, const Eigen::MatrixXd& tested,
                               const std::vector<std::string>& tested_names = {},
                               InformationKind kind = InformationKind::kExpected);

TestResult score_test_eps_only(const RegressionView& view, double c_lower, double c_upper,
                               const std::vector<std::string>& tested_names = {},
                               InformationKind kind = InformationKind::kExpected,
                               const OptimizerOptions& options = {});

// 2 (l_alt - l_null) with both models fitted on the same rows.
TestResult lrt_eps_only(const RegressionView& view, double c_lower, double c_upper,
                        const OptimizerOptions& options = {});

}  // namespace epsassoc
