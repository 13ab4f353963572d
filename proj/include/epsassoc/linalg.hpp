#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epsassoc {

// A - B C^{-1} B^T for symmetric A, C. Throws ComputationError if C is singular.
Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& C);

// S^T V^{-1} S for a score vector and its variance. Throws ComputationError
// naming the offending columns when V is not positive definite.
double score_statistic(const Eigen::VectorXd& score, const Eigen::MatrixXd& variance,
                       const std::vector<std::string>& column_names);

// Inverse of a symmetric positive definite matrix, or nullopt-like empty
// matrix when it is not numerically positive definite.
Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m);

}  // namespace epsassoc
