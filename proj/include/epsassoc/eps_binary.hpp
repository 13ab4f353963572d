#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsassoc/model.hpp"

namespace epsassoc {

// 0 below c_lower, 1 above c_upper. Rejects rows inside the cutoffs.
Eigen::VectorXd dichotomize(const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower, double c_upper);

struct LogisticFit {
  Eigen::VectorXd coef;  // intercept first when the design has one
  Eigen::MatrixXd observed_information;
  Eigen::VectorXd fitted;  // probabilities
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // one entry per accepted iteration
  bool converged = false;
  int iterations = 0;
};

// IRLS with step halving. Throws ValidationError when one class is absent and
// ComputationError on separation (a coefficient beyond +-30).
LogisticFit fit_logistic(const Eigen::Ref<const Eigen::VectorXd>& response, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const std::vector<std::string>& column_names = {});

TestResult score_test_logistic(const Eigen::Ref<const Eigen::VectorXd>& response,
                               const Eigen::Ref<const Eigen::MatrixXd>& null_columns,
                               const Eigen::Ref<const Eigen::MatrixXd>& tested_columns,
                               const std::vector<std::string>& tested_names = {});

}  // namespace epsassoc
