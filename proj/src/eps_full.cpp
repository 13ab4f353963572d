#include "epsassoc/eps_full.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "epsassoc/errors.hpp"
#include "epsassoc/linalg.hpp"
#include "epsassoc/linear_model.hpp"
#include "epsassoc/stats.hpp"

namespace epsassoc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_design(const Dataset& data, const ExtremeDesign* design, const std::vector<Index>& gcols) {
  if (design == nullptr) return;
  for (Index i : design->extremes) {
    for (Index c : gcols) {
      if (data.geno.is_missing(i, c)) {
        std::ostringstream msg;
        msg << "missing genotype for SNP '" << data.snp_names[c] << "' at extreme row " << i;
        throw ValidationError(msg.str());
      }
    }
  }
}

std::vector<GenotypeDistribution> estimate_all(const Dataset& data, const ModelSpec& spec, bool hwe) {
  std::vector<GenotypeDistribution> dists;
  for (Index c : spec.genotype_columns()) dists.push_back(estimate_genotype_dist(data, c, hwe));
  return dists;
}

double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

double GenotypeDistribution::variance(int j) const {
  const double m = mean(j);
  return p(j, 1) + 4.0 * p(j, 2) - m * m;
}

GenotypeDistribution GenotypeDistribution::from_hwe(const Eigen::VectorXd& maf) {
  GenotypeDistribution dist;
  const Index J = maf.size();
  dist.p.resize(J, kGenotypeStates);
  for (Index j = 0; j < J; ++j) {
    const double q = maf[j];
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("allele frequency must lie in [0, 1]");
    dist.p.row(j) << (1.0 - q) * (1.0 - q), 2.0 * q * (1.0 - q), q * q;
  }
  dist.counts = Eigen::MatrixXi::Zero(J, kGenotypeStates);
  dist.totals = Eigen::VectorXi::Zero(J);
  dist.hwe = true;
  return dist;
}

GenotypeDistribution estimate_genotype_dist(const Dataset& data, Index snp_column, bool hwe) {
  if (snp_column < 0 || snp_column >= data.geno.cols()) throw ValidationError("SNP column out of range");
  const int J = data.stratum_count();
  GenotypeDistribution dist;
  dist.counts = Eigen::MatrixXi::Zero(J, kGenotypeStates);
  for (Index i = 0; i < data.size(); ++i) {
    if (auto g = data.geno.at(i, snp_column)) ++dist.counts(data.strata[i], *g);
  }
  dist.totals = dist.counts.rowwise().sum();
  dist.p.resize(J, kGenotypeStates);
  for (int j = 0; j < J; ++j) {
    if (dist.totals[j] == 0) {
      std::ostringstream msg;
      msg << "stratum " << j << " has no observed genotypes for SNP '" << data.snp_names[snp_column] << "'";
      throw ValidationError(msg.str());
    }
    const double total = dist.totals[j];
    if (hwe) {
      const double q = (dist.counts(j, 1) + 2.0 * dist.counts(j, 2)) / (2.0 * total);
      dist.p.row(j) << (1.0 - q) * (1.0 - q), 2.0 * q * (1.0 - q), q * q;
    } else {
      for (int k = 0; k < kGenotypeStates; ++k) dist.p(j, k) = dist.counts(j, k) / total;
    }
  }
  dist.hwe = hwe;
  return dist;
}

EpsFullLikelihood::EpsFullLikelihood(const Dataset& data, const ModelSpec& spec,
                                     std::vector<GenotypeDistribution> dists, bool free_genotype)
    : free_genotype_(free_genotype), dists_(std::move(dists)) {
  spec.validate(data, false);
  const std::vector<Index> gcols = spec.genotype_columns();
  snps_ = static_cast<int>(gcols.size());
  strata_ = data.stratum_count();
  coefficient_count_ = spec.coefficient_count();
  if (static_cast<int>(dists_.size()) != snps_) {
    throw ValidationError("one genotype distribution is needed per SNP column in the model");
  }
  for (const auto& d : dists_) {
    if (d.strata() != strata_) throw ValidationError("genotype distribution stratum count does not match the data");
  }
  hwe_ = snps_ > 0 && dists_.front().hwe;

  cells_.resize(static_cast<std::size_t>(snps_ * strata_));
  Index offset = coefficient_count_ + 1;
  for (int g = 0; g < snps_; ++g) {
    for (int j = 0; j < strata_; ++j) {
      CellParams& cell = cells_[g * strata_ + j];
      for (int k = 0; k < kGenotypeStates; ++k) {
        if (dists_[g].p(j, k) > 0.0) cell.active.push_back(k);
      }
      cell.offset = offset;
      if (free_genotype_) {
        if (hwe_) {
          const double q = dists_[g].minor_allele_frequency(j);
          cell.count = (q > 0.0 && q < 1.0) ? 1 : 0;
        } else {
          cell.count = static_cast<Index>(cell.active.size()) - 1;
        }
      }
      offset += cell.count;
    }
  }
  genotype_param_count_ = offset - coefficient_count_ - 1;

  // Enumerate genotype states per row.
  const Index n = data.size();
  row_start_.assign(1, 0);
  row_stratum_.resize(static_cast<std::size_t>(n));
  y_ = data.y;
  std::vector<std::vector<int>> choices(static_cast<std::size_t>(snps_));
  std::vector<std::vector<int>> all_states;
  std::vector<Index> state_row;
  for (Index i = 0; i < n; ++i) {
    const int j = data.strata[i];
    row_stratum_[i] = j;
    for (int g = 0; g < snps_; ++g) {
      auto obs = data.geno.at(i, gcols[g]);
      choices[g] = obs ? std::vector<int>{*obs} : cells_[g * strata_ + j].active;
    }
    std::vector<int> idx(static_cast<std::size_t>(snps_), 0);
    while (true) {
      std::vector<int> state(static_cast<std::size_t>(snps_));
      for (int g = 0; g < snps_; ++g) state[g] = choices[g][idx[g]];
      all_states.push_back(std::move(state));
      state_row.push_back(i);
      int g = snps_ - 1;
      while (g >= 0 && ++idx[g] == static_cast<int>(choices[g].size())) idx[g--] = 0;
      if (g < 0) break;
    }
    row_start_.push_back(static_cast<Index>(all_states.size()));
  }

  const Index S = static_cast<Index>(all_states.size());
  state_design_.resize(S, coefficient_count_);
  state_codes_.resize(S, std::max(snps_, 0));
  std::vector<double> values(static_cast<std::size_t>(snps_));
  for (Index s = 0; s < S; ++s) {
    for (int g = 0; g < snps_; ++g) {
      values[g] = all_states[s][g];
      state_codes_(s, g) = static_cast<std::int8_t>(all_states[s][g]);
    }
    spec.fill_row(data, state_row[s], values, state_design_.row(s));
  }
}

Eigen::VectorXd EpsFullLikelihood::initial_genotype_parameters() const {
  Eigen::VectorXd out(genotype_param_count_);
  for (int g = 0; g < snps_; ++g) {
    for (int j = 0; j < strata_; ++j) {
      const CellParams& cell = cells_[g * strata_ + j];
      const Index base = cell.offset - coefficient_count_ - 1;
      if (cell.count == 0) continue;
      if (hwe_) {
        const double q = dists_[g].minor_allele_frequency(j);
        out[base] = std::log(q / (1.0 - q));
      } else {
        const double ref = std::log(dists_[g].p(j, cell.active[0]));
        for (Index a = 1; a < static_cast<Index>(cell.active.size()); ++a) {
          out[base + a - 1] = std::log(dists_[g].p(j, cell.active[a])) - ref;
        }
      }
    }
  }
  return out;
}

void EpsFullLikelihood::genotype_log_probs(const Eigen::VectorXd& theta, std::vector<double>& out) const {
  out.assign(static_cast<std::size_t>(snps_ * strata_ * kGenotypeStates), kNegInf);
  for (int g = 0; g < snps_; ++g) {
    for (int j = 0; j < strata_; ++j) {
      const CellParams& cell = cells_[g * strata_ + j];
      double* row = &out[(g * strata_ + j) * kGenotypeStates];
      if (cell.count == 0) {
        for (int k = 0; k < kGenotypeStates; ++k) row[k] = dists_[g].p(j, k) > 0.0 ? std::log(dists_[g].p(j, k)) : kNegInf;
      } else if (hwe_) {
        const double q = logistic(theta[cell.offset]);
        const double lq = std::log(q), l1q = std::log1p(-q);
        row[0] = 2.0 * l1q;
        row[1] = std::log(2.0) + lq + l1q;
        row[2] = 2.0 * lq;
      } else {
        double norm = 0.0;  // eta of the reference cell
        for (Index a = 1; a < static_cast<Index>(cell.active.size()); ++a) {
          norm = log_add_exp(norm, theta[cell.offset + a - 1]);
        }
        row[cell.active[0]] = -norm;
        for (Index a = 1; a < static_cast<Index>(cell.active.size()); ++a) {
          row[cell.active[a]] = theta[cell.offset + a - 1] - norm;
        }
      }
    }
  }
}

std::vector<GenotypeDistribution> EpsFullLikelihood::distributions(const Eigen::VectorXd& theta) const {
  std::vector<double> logp;
  genotype_log_probs(theta, logp);
  std::vector<GenotypeDistribution> out = dists_;
  for (int g = 0; g < snps_; ++g) {
    for (int j = 0; j < strata_; ++j) {
      for (int k = 0; k < kGenotypeStates; ++k) out[g].p(j, k) = std::exp(logp[(g * strata_ + j) * kGenotypeStates + k]);
    }
  }
  return out;
}

double EpsFullLikelihood::value(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  const Index P = coefficient_count_;
  const double sigma = std::exp(theta[P]);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return std::numeric_limits<double>::quiet_NaN();
  const double log_sigma = theta[P];

  std::vector<double> logp;
  genotype_log_probs(theta, logp);
  const Eigen::VectorXd mu = state_design_ * theta.head(P);

  const Index S = state_design_.rows();
  Eigen::VectorXd coef_weight;
  std::vector<double> expected;
  std::vector<double> stratum_rows;
  if (grad != nullptr) {
    coef_weight.setZero(S);
    expected.assign(logp.size(), 0.0);
    stratum_rows.assign(static_cast<std::size_t>(strata_), 0.0);
  }
  double sigma_grad = 0.0;
  double total = 0.0;
  std::vector<double> terms;
  for (Index i = 0; i < rows(); ++i) {
    const Index begin = row_start_[i], end = row_start_[i + 1];
    const int j = row_stratum_[i];
    terms.resize(static_cast<std::size_t>(end - begin));
    double top = kNegInf;
    for (Index s = begin; s < end; ++s) {
      double lt = log_norm_pdf((y_[i] - mu[s]) / sigma) - log_sigma;
      for (int g = 0; g < snps_; ++g) lt += logp[(g * strata_ + j) * kGenotypeStates + state_codes_(s, g)];
      terms[s - begin] = lt;
      top = std::max(top, lt);
    }
    if (top == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double& t : terms) {
      t = std::exp(t - top);
      sum += t;
    }
    total += top + std::log(sum);
    if (grad == nullptr) continue;
    stratum_rows[j] += 1.0;
    for (Index s = begin; s < end; ++s) {
      const double w = terms[s - begin] / sum;
      const double z = (y_[i] - mu[s]) / sigma;
      coef_weight[s] = w * z / sigma;
      sigma_grad += w * (z * z - 1.0);
      for (int g = 0; g < snps_; ++g) expected[(g * strata_ + j) * kGenotypeStates + state_codes_(s, g)] += w;
    }
  }

  if (grad != nullptr) {
    grad->setZero(parameter_count());
    grad->head(P) = state_design_.transpose() * coef_weight;
    (*grad)[P] = sigma_grad;
    for (int g = 0; g < snps_; ++g) {
      for (int j = 0; j < strata_; ++j) {
        const CellParams& cell = cells_[g * strata_ + j];
        if (cell.count == 0) continue;
        const double* e = &expected[(g * strata_ + j) * kGenotypeStates];
        const double* lp = &logp[(g * strata_ + j) * kGenotypeStates];
        if (hwe_) {
          const double q = std::exp(0.5 * lp[2]);
          (*grad)[cell.offset] = e[1] + 2.0 * e[2] - 2.0 * q * stratum_rows[j];
        } else {
          for (Index a = 1; a < static_cast<Index>(cell.active.size()); ++a) {
            const int k = cell.active[a];
            (*grad)[cell.offset + a - 1] = e[k] - std::exp(lp[k]) * stratum_rows[j];
          }
        }
      }
    }
  }
  return total;
}

double loglik_eps_full(const ParameterVector& params, const Dataset& data, const ExtremeDesign* design,
                       const std::vector<GenotypeDistribution>& dists, const ModelSpec& spec) {
  if (!(params.sigma > 0.0)) throw ValidationError("sigma must be positive");
  check_design(data, design, spec.genotype_columns());
  const EpsFullLikelihood lik(data, spec, dists, false);
  const Eigen::VectorXd coef = params.coefficients();
  if (coef.size() != spec.coefficient_count()) throw ValidationError("parameter vector does not match the model");
  Eigen::VectorXd theta(coef.size() + 1);
  theta << coef, std::log(params.sigma);
  return lik.value(theta);
}

namespace {

struct FullFit {
  Eigen::VectorXd theta;  // full layout, fixed entries at zero
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  Eigen::MatrixXd information;  // over the free entries, summed scale
  std::vector<Index> free;
};

// Starting point: least squares on rows with every model genotype observed.
Eigen::VectorXd initial_theta(const Dataset& data, const ModelSpec& spec, const EpsFullLikelihood& lik,
                              const std::vector<Index>& fixed_zero) {
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) all[i] = i;
  const RegressionView view = build_design(data, spec, std::span<const Index>(all), MissingGenotypes::kDropRows);
  std::vector<Index> keep;
  for (Index k = 0; k < spec.coefficient_count(); ++k) {
    if (std::find(fixed_zero.begin(), fixed_zero.end(), k) == fixed_zero.end()) keep.push_back(k);
  }
  Eigen::MatrixXd X(view.size(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) X.col(static_cast<Index>(c)) = view.design.col(keep[c]);
  const OlsFit ols = fit_ols(X, view.y);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(lik.parameter_count());
  for (std::size_t c = 0; c < keep.size(); ++c) theta[keep[c]] = ols.coef[static_cast<Index>(c)];
  const double sd = std::sqrt(ols.sigma2_mle());
  theta[spec.coefficient_count()] = std::log(sd > 0.0 ? sd : 1.0);
  theta.tail(lik.genotype_parameter_count()) = lik.initial_genotype_parameters();
  return theta;
}

FullFit optimize_full(const EpsFullLikelihood& lik, const std::vector<Index>& fixed_zero, const Eigen::VectorXd& start,
                      const OptimizerOptions& options) {
  FullFit fit;
  for (Index k = 0; k < lik.parameter_count(); ++k) {
    if (std::find(fixed_zero.begin(), fixed_zero.end(), k) == fixed_zero.end()) fit.free.push_back(k);
  }
  const double n = static_cast<double>(lik.rows());
  const Index dim = static_cast<Index>(fit.free.size());
  Eigen::VectorXd base = start;
  for (Index k : fixed_zero) base[k] = 0.0;

  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    Eigen::VectorXd theta = base;
    for (Index c = 0; c < dim; ++c) theta[fit.free[c]] = x[c];
    Eigen::VectorXd full_grad;
    const double v = lik.value(theta, grad != nullptr ? &full_grad : nullptr);
    if (grad != nullptr) {
      grad->resize(dim);
      for (Index c = 0; c < dim; ++c) (*grad)[c] = full_grad[fit.free[c]] / n;
    }
    return v / n;
  };
  Eigen::VectorXd init(dim);
  for (Index c = 0; c < dim; ++c) init[c] = base[fit.free[c]];
  const OptimizerReport report = maximize(objective, init, options);

  fit.theta = base;
  for (Index c = 0; c < dim; ++c) fit.theta[fit.free[c]] = report.argmax[c];
  fit.loglik = report.max_value * n;
  fit.converged = report.converged;
  fit.iterations = report.iterations;
  fit.gradient_norm = report.gradient_norm;
  if (options.compute_information) fit.information = report.observed_information * n;
  return fit;
}

struct TermKey {
  int kind;  // 0 intercept, 1 env, 2 snp, 3 interaction
  Index a, b;
  auto operator<=>(const TermKey&) const = default;
};

TermKey term_key(const ModelSpec& spec, Index k) {
  if (k == 0) return {0, 0, 0};
  if (k < spec.snp_offset()) return {1, spec.env_columns[k - 1], 0};
  if (k < spec.interaction_offset()) return {2, spec.snp_columns[k - spec.snp_offset()], 0};
  const auto& term = spec.interactions[k - spec.interaction_offset()];
  return {3, term.env_column, term.snp_column};
}

}  // namespace

FitResult fit_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec,
                       const EpsFullOptions& options) {
  data.validate();
  spec.validate(data, false);
  check_design(data, design, spec.genotype_columns());
  const EpsFullLikelihood lik(data, spec, estimate_all(data, spec, options.hwe), options.optimize_genotype_dist);
  const FullFit full = optimize_full(lik, {}, initial_theta(data, spec, lik, {}), options.optimizer);

  const Index P = spec.coefficient_count();
  const double sigma = std::exp(full.theta[P]);
  FitResult fit;
  fit.estimates = ParameterVector::from_coefficients(full.theta.head(P), spec, sigma);
  fit.names = spec.coefficient_names(data);
  fit.names.push_back("sigma");
  fit.values.resize(P + 1);
  fit.values << full.theta.head(P), sigma;
  fit.loglik = full.loglik;
  fit.converged = full.converged;
  fit.iterations = full.iterations;
  if (!full.converged) {
    std::ostringstream msg;
    msg << "optimizer stopped after " << full.iterations << " iterations with gradient sup-norm "
        << full.gradient_norm;
    fit.diagnostic = msg.str();
  }
  for (const auto& d : lik.distributions(full.theta)) {
    if (d.has_empty_cells()) {
      fit.diagnostic += (fit.diagnostic.empty() ? "" : "; ");
      fit.diagnostic += "empty genotype cells dropped from the mixture";
      break;
    }
  }
  if (options.optimizer.compute_information) {
    // Profile out the genotype parameters, then move from log sigma to sigma.
    const Index r = P + 1;
    const Index gp = lik.genotype_parameter_count();
    const Eigen::MatrixXd& info = full.information;
    Eigen::MatrixXd reg = gp == 0 ? info
                                  : schur_complement(info.topLeftCorner(r, r), info.topRightCorner(r, gp),
                                                     info.bottomRightCorner(gp, gp));
    reg.col(P) /= sigma;
    reg.row(P) /= sigma;
    fit.observed_information = reg;
  }
  attach_wald_intervals(fit, options.confidence_level);
  return fit;
}

bool eps_full_score_applicable(const ModelSpec& spec) {
  for (Index k : spec.nuisance()) {
    if (k >= spec.snp_offset()) return false;
  }
  return true;
}

EpsFullNull fit_eps_full_null(const Dataset& data, const ModelSpec& spec) {
  if (!eps_full_score_applicable(spec)) {
    throw ValidationError("the null model contains genotype terms; use the likelihood ratio test");
  }
  const std::vector<Index> nuisance = spec.nuisance();
  const Index n = data.size();
  const Index q = static_cast<Index>(nuisance.size());
  EpsFullNull null;
  null.nuisance.resize(n, q);
  for (Index c = 0; c < q; ++c) {
    const Index k = nuisance[c];
    null.nuisance.col(c) = k == 0 ? Eigen::VectorXd::Ones(n) : Eigen::VectorXd(data.env.col(spec.env_columns[k - 1]));
  }
  const OlsFit ols = fit_ols(null.nuisance, data.y);
  null.residuals = ols.residuals;
  null.sigma = std::sqrt(ols.sigma2_mle());
  if (!(null.sigma > 0.0)) throw ComputationError("null linear model fits the phenotype exactly");
  const double s2 = null.sigma * null.sigma;
  null.info_nuisance.resize(q + 1, q + 1);
  null.info_nuisance.topLeftCorner(q, q) = null.nuisance.transpose() * null.nuisance / s2;
  null.info_nuisance.col(q).head(q) = 2.0 * null.nuisance.transpose() * null.residuals / (s2 * null.sigma);
  null.info_nuisance.row(q).head(q) = null.info_nuisance.col(q).head(q).transpose();
  null.info_nuisance(q, q) = -static_cast<double>(n) / s2 + 3.0 * null.residuals.squaredNorm() / (s2 * s2);
  return null;
}

EpsFullScoreWorkspace score_workspace_eps_full(const EpsFullNull& null, const Dataset& data, const ModelSpec& spec,
                                               bool hwe) {
  spec.validate(data, true);
  if (!eps_full_score_applicable(spec)) {
    throw ValidationError("the null model contains genotype terms; use the likelihood ratio test");
  }
  const Index n = data.size();
  if (null.residuals.size() != n) throw ValidationError("null model rows do not match the dataset");
  const std::vector<Index> gcols = spec.genotype_columns();
  const int G = static_cast<int>(gcols.size());
  const int J = data.stratum_count();
  const Index T = static_cast<Index>(spec.tested.size());
  const Index q = null.nuisance.cols();
  const double sigma = null.sigma, s2 = sigma * sigma;

  std::vector<GenotypeDistribution> dists = estimate_all(data, spec, hwe);
  EpsFullScoreWorkspace ws;
  ws.cond_mean.resize(J, G);
  ws.cond_variance.resize(J, G);
  std::vector<char> stratum_present(static_cast<std::size_t>(J), 0);
  for (Index i = 0; i < n; ++i) stratum_present[data.strata[i]] = 1;
  for (int g = 0; g < G; ++g) {
    for (int j = 0; j < J; ++j) {
      if (stratum_present[j] && dists[g].totals[j] < 2) {
        std::ostringstream msg;
        msg << "stratum " << j << " has fewer than 2 observed genotypes for SNP '" << data.snp_names[gcols[g]]
            << "'; its genotype variance is undefined";
        throw ValidationError(msg.str());
      }
      ws.cond_mean(j, g) = dists[g].mean(j);
      ws.cond_variance(j, g) = std::max(0.0, dists[g].variance(j));
    }
  }

  // Tested column k as b_k + sum_g A(k, g) x_g for one row.
  auto snp_slot = [&](Index col) { return static_cast<int>(std::lower_bound(gcols.begin(), gcols.end(), col) - gcols.begin()); };
  Eigen::VectorXd score = Eigen::VectorXd::Zero(T);
  Eigen::MatrixXd i_gg = Eigen::MatrixXd::Zero(T, T);
  Eigen::MatrixXd i_gx = Eigen::MatrixXd::Zero(T, q);
  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(J * G), Eigen::VectorXd::Zero(T));
  Eigen::VectorXd m(T);
  Eigen::MatrixXd A(T, G);
  Eigen::VectorXd v(G);
  for (Index i = 0; i < n; ++i) {
    const int j = data.strata[i];
    const double f = null.residuals[i];
    for (int g = 0; g < G; ++g) {
      const auto obs = data.geno.at(i, gcols[g]);
      v[g] = obs ? 0.0 : ws.cond_variance(j, g);
    }
    A.setZero();
    for (Index t = 0; t < T; ++t) {
      const Index k = spec.tested[t];
      if (k < spec.snp_offset()) {
        m[t] = data.env(i, spec.env_columns[k - 1]);
      } else if (k < spec.interaction_offset()) {
        A(t, snp_slot(spec.snp_columns[k - spec.snp_offset()])) = 1.0;
        m[t] = 0.0;
      } else {
        const auto& term = spec.interactions[k - spec.interaction_offset()];
        A(t, snp_slot(term.snp_column)) = data.env(i, term.env_column);
        m[t] = 0.0;
      }
    }
    for (int g = 0; g < G; ++g) {
      const auto obs = data.geno.at(i, gcols[g]);
      m += A.col(g) * (obs ? static_cast<double>(*obs) : ws.cond_mean(j, g));
    }
    score += m * f;
    i_gg.noalias() += m * m.transpose();
    for (int g = 0; g < G; ++g) {
      if (v[g] == 0.0 && !data.geno.is_missing(i, gcols[g])) continue;
      i_gg.noalias() += (v[g] * (1.0 - f * f / s2)) * A.col(g) * A.col(g).transpose();
      partial[j * G + g] += A.col(g) * f;
    }
    i_gx.noalias() += m * null.nuisance.row(i);
  }
  ws.score = score / s2;
  ws.info_tested = i_gg / s2;
  ws.info_cross.resize(T, q + 1);
  ws.info_cross.leftCols(q) = i_gx / s2;
  ws.info_cross.col(q) = 2.0 * ws.score / sigma;
  ws.genotype_correction = Eigen::MatrixXd::Zero(T, T);
  for (int j = 0; j < J; ++j) {
    for (int g = 0; g < G; ++g) {
      if (dists[g].totals[j] == 0) continue;
      const Eigen::VectorXd& u = partial[j * G + g];
      ws.genotype_correction += (ws.cond_variance(j, g) / (dists[g].totals[j] * s2 * s2)) * u * u.transpose();
    }
  }
  ws.variance = schur_complement(ws.info_tested, ws.info_cross, null.info_nuisance) - ws.genotype_correction;
  return ws;
}

TestResult score_test_eps_full(const EpsFullNull& null, const Dataset& data, const ModelSpec& spec, bool hwe) {
  const EpsFullScoreWorkspace ws = score_workspace_eps_full(null, data, spec, hwe);
  std::vector<std::string> names;
  const auto all = spec.coefficient_names(data);
  for (Index k : spec.tested) names.push_back(all[k]);
  const double t = score_statistic(ws.score, ws.variance, names);
  return make_chi2_result(t, static_cast<int>(spec.tested.size()), TestMethod::kScore, data.size());
}

TestResult score_test_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec, bool hwe) {
  data.validate();
  check_design(data, design, spec.genotype_columns());
  const EpsFullNull null = fit_eps_full_null(data, spec);
  return score_test_eps_full(null, data, spec, hwe);
}

TestResult lrt_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec,
                        const EpsFullOptions& options, LrtDetail* detail) {
  data.validate();
  spec.validate(data, false);
  check_design(data, design, spec.genotype_columns());
  LrtDetail local;
  LrtDetail& d = detail != nullptr ? *detail : local;
  const int df = static_cast<int>(spec.tested.size());
  if (df == 0) {
    TestResult same = make_chi2_result(0.0, 1, TestMethod::kLrt, data.size());
    same.df = 0;
    same.p_value = 1.0;
    same.log_p_value = 0.0;
    d.converged = true;
    return same;
  }

  OptimizerOptions opts = options.optimizer;
  opts.compute_information = false;
  const EpsFullLikelihood lik(data, spec, estimate_all(data, spec, options.hwe), true);
  const FullFit null = optimize_full(lik, spec.tested, initial_theta(data, spec, lik, spec.tested), opts);
  FullFit alt = optimize_full(lik, {}, initial_theta(data, spec, lik, {}), opts);
  d.restarted = false;
  if (alt.loglik < null.loglik) {
    const FullFit again = optimize_full(lik, {}, null.theta, opts);
    d.restarted = true;
    if (again.loglik > alt.loglik) alt = again;
  }
  d.alt_loglik = alt.loglik;
  d.null_loglik = null.loglik;
  double lambda = 2.0 * (alt.loglik - null.loglik);
  d.clamped = lambda < 0.0;
  lambda = std::max(lambda, 0.0);
  d.converged = alt.converged && null.converged;

  TestResult result = make_chi2_result(lambda, df, TestMethod::kLrt, data.size());
  result.converged = d.converged;
  if (d.clamped) result.note = "negative likelihood ratio clamped to zero";
  if (!d.converged) result.note += std::string(result.note.empty() ? "" : "; ") + "a likelihood fit did not converge";
  return result;
}

TestResult lrt_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& null_spec,
                        const ModelSpec& alt_spec, const EpsFullOptions& options, LrtDetail* detail) {
  std::vector<TermKey> null_terms;
  for (Index k = 0; k < null_spec.coefficient_count(); ++k) null_terms.push_back(term_key(null_spec, k));
  ModelSpec spec = alt_spec;
  spec.tested.clear();
  std::vector<TermKey> alt_terms;
  for (Index k = 0; k < alt_spec.coefficient_count(); ++k) {
    alt_terms.push_back(term_key(alt_spec, k));
    if (std::find(null_terms.begin(), null_terms.end(), alt_terms.back()) == null_terms.end()) spec.tested.push_back(k);
  }
  for (const TermKey& key : null_terms) {
    if (std::find(alt_terms.begin(), alt_terms.end(), key) == alt_terms.end()) {
      throw ValidationError("null model terms must be a subset of the alternative model terms");
    }
  }
  return lrt_eps_full(data, design, spec, options, detail);
}

}  // namespace epsassoc
