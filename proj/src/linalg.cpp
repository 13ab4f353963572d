#include "epsassoc/linalg.hpp"

#include <sstream>

#include "epsassoc/errors.hpp"

namespace epsassoc {

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) return {};
  const auto& values = eig.eigenvalues();
  const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  if (values.minCoeff() <= 1e-11 * scale) return {};
  return eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& C) {
  if (C.rows() == 0) return A;
  // C may be indefinite (plug-in expected information); only invertibility matters.
  const Eigen::MatrixXd sym = 0.5 * (C + C.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sym);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw ComputationError("nuisance information block is singular; the null model is not identifiable");
  }
  Eigen::MatrixXd out = A - B * lu.solve(B.transpose());
  return 0.5 * (out + out.transpose());
}

double score_statistic(const Eigen::VectorXd& score, const Eigen::MatrixXd& variance,
                       const std::vector<std::string>& column_names) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(variance);
  const auto& values = eig.eigenvalues();
  const double scale = std::max(variance.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  if (eig.info() != Eigen::Success || !score.allFinite() || values.minCoeff() <= 1e-10 * scale) {
    std::ostringstream msg;
    msg << "score variance is singular for tested column(s)";
    // Name the columns carrying the null direction.
    const Eigen::VectorXd null_dir = eig.eigenvectors().col(0);
    bool first = true;
    for (Eigen::Index k = 0; k < null_dir.size(); ++k) {
      if (std::abs(null_dir[k]) > 1e-3 || null_dir.size() == 1) {
        msg << (first ? " " : ", ") << (k < static_cast<Eigen::Index>(column_names.size()) ? column_names[k] : "#" + std::to_string(k));
        first = false;
      }
    }
    msg << " (constant or collinear with the null model)";
    throw ComputationError(msg.str());
  }
  const Eigen::VectorXd rotated = eig.eigenvectors().transpose() * score;
  return (rotated.array().square() / values.array()).sum();
}

}  // namespace epsassoc
