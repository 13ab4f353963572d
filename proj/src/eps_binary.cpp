#include "epsassoc/eps_binary.hpp"

#include <cmath>
#include <sstream>

#include "epsassoc/errors.hpp"
#include "epsassoc/linalg.hpp"

namespace epsassoc {

namespace {

constexpr double kSeparationBound = 30.0;
constexpr double kCoefTolerance = 1e-10;
constexpr int kMaxIterations = 100;

double logistic_loglik(const Eigen::VectorXd& response, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) evaluated stably
    const double log1pexp = eta[i] > 0.0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
    ll += response[i] * eta[i] - log1pexp;
  }
  return ll;
}

Eigen::VectorXd inverse_logit(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e)); });
}

// Non-constant columns carrying the diverging direction; the constant column
// only when nothing else diverges.
std::string separating_columns(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::VectorXd& coef,
                               const std::vector<std::string>& names) {
  auto label = [&](Index k) { return k < static_cast<Index>(names.size()) ? names[k] : "#" + std::to_string(k); };
  double top = 0.0;
  Index top_k = 0;
  coef.cwiseAbs().maxCoeff(&top_k);
  std::vector<Index> varying;
  for (Index k = 0; k < X.cols(); ++k) {
    if (X.col(k).maxCoeff() > X.col(k).minCoeff()) {
      varying.push_back(k);
      top = std::max(top, std::abs(coef[k]));
    }
  }
  std::string out;
  for (Index k : varying) {
    if (std::abs(coef[k]) >= 0.1 * top && top > 0.0) out += (out.empty() ? "" : ", ") + label(k);
  }
  return out.empty() ? label(top_k) : out;
}

}  // namespace

Eigen::VectorXd dichotomize(const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower, double c_upper) {
  Eigen::VectorXd out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < c_lower) {
      out[i] = 0.0;
    } else if (y[i] > c_upper) {
      out[i] = 1.0;
    } else {
      std::ostringstream msg;
      msg << "row " << i << " with y = " << y[i] << " is not in either extreme";
      throw ValidationError(msg.str());
    }
  }
  return out;
}

LogisticFit fit_logistic(const Eigen::Ref<const Eigen::VectorXd>& response, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const std::vector<std::string>& column_names) {
  const Index n = response.size();
  const double ones = response.sum();
  if (ones <= 0.0 || ones >= static_cast<double>(n)) {
    throw ValidationError("logistic fit needs both response classes, got " + std::to_string(static_cast<long>(ones)) +
                          " of " + std::to_string(n) + " in the upper class");
  }
  const Eigen::VectorXd resp = response;
  const Eigen::MatrixXd design = X;

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(X.cols());
  Eigen::VectorXd eta = design * fit.coef;
  double ll = logistic_loglik(resp, eta);
  fit.loglik_trace.push_back(ll);

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const Eigen::VectorXd pi = inverse_logit(eta);
    const Eigen::VectorXd w = pi.array() * (1.0 - pi.array());
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw ComputationError("logistic information matrix is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(design.transpose() * (resp - pi));

    double scale = 1.0;
    Eigen::VectorXd candidate = fit.coef + step;
    Eigen::VectorXd eta_new = design * candidate;
    double ll_new = logistic_loglik(resp, eta_new);
    for (int halving = 0; halving < 30 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++halving) {
      scale *= 0.5;
      candidate = fit.coef + scale * step;
      eta_new = design * candidate;
      ll_new = logistic_loglik(resp, eta_new);
    }
    if (!(ll_new >= ll - 1e-12 * std::abs(ll))) break;

    const double change = (candidate - fit.coef).cwiseAbs().maxCoeff();
    fit.coef = candidate;
    eta = eta_new;
    ll = std::max(ll, ll_new);
    fit.loglik_trace.push_back(ll_new);
    fit.iterations = iter + 1;

    if (fit.coef.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw ComputationError("logistic fit diverges (separation) in column " + separating_columns(X, fit.coef, column_names));
    }
    if (change < kCoefTolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.fitted = inverse_logit(eta);
  const Eigen::VectorXd w = fit.fitted.array() * (1.0 - fit.fitted.array());
  fit.observed_information = design.transpose() * w.asDiagonal() * design;
  fit.loglik = logistic_loglik(resp, eta);
  return fit;
}

TestResult score_test_logistic(const Eigen::Ref<const Eigen::VectorXd>& response,
                               const Eigen::Ref<const Eigen::MatrixXd>& null_columns,
                               const Eigen::Ref<const Eigen::MatrixXd>& tested_columns,
                               const std::vector<std::string>& tested_names) {
  const LogisticFit null = fit_logistic(response, null_columns);
  if (!null.converged) throw ComputationError("null logistic model did not converge");
  const Eigen::VectorXd w = null.fitted.array() * (1.0 - null.fitted.array());
  const Eigen::VectorXd score = tested_columns.transpose() * (response - null.fitted);
  const Eigen::MatrixXd i_tt = tested_columns.transpose() * w.asDiagonal() * tested_columns;
  const Eigen::MatrixXd i_tn = tested_columns.transpose() * w.asDiagonal() * null_columns;
  const Eigen::MatrixXd variance = schur_complement(i_tt, i_tn, null.observed_information);
  const double t = score_statistic(score, variance, tested_names);
  return make_chi2_result(t, static_cast<int>(tested_columns.cols()), TestMethod::kScore, response.size());
}

}  // namespace epsassoc
