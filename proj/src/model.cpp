#include "epsassoc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "epsassoc/errors.hpp"
#include "epsassoc/stats.hpp"

namespace epsassoc {

GenotypeMatrix::GenotypeMatrix(Index rows, Index cols) : codes_(rows, cols) {
  codes_.setConstant(kMissingCode);
}

void GenotypeMatrix::set(Index row, Index col, std::optional<int> genotype) {
  if (!genotype) {
    codes_(row, col) = kMissingCode;
    return;
  }
  if (*genotype < 0 || *genotype > 2) {
    std::ostringstream msg;
    msg << "genotype at row " << row << ", column " << col << " must be 0, 1 or 2, got " << *genotype;
    throw ValidationError(msg.str());
  }
  codes_(row, col) = static_cast<std::int8_t>(*genotype);
}

Index GenotypeMatrix::missing_count(Index col) const {
  return (codes_.col(col).array() < 0).count();
}

GenotypeMatrix GenotypeMatrix::select_rows(std::span<const Index> rows) const {
  GenotypeMatrix out(static_cast<Index>(rows.size()), cols());
  for (Index c = 0; c < cols(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) out.codes_(static_cast<Index>(r), c) = codes_(rows[r], c);
  }
  return out;
}

void Dataset::validate() const {
  const Index n = size();
  if (n < 1) throw ValidationError("dataset has no rows");
  if (!y.allFinite()) throw ValidationError("phenotype contains non-finite values");
  if (env.rows() != n && !(env.rows() == 0 && env.cols() == 0)) {
    throw ValidationError("environment matrix row count does not match phenotype length");
  }
  if (env.size() > 0 && !env.allFinite()) throw ValidationError("environment matrix contains non-finite values");
  if (geno.rows() != n && geno.cols() > 0) {
    throw ValidationError("genotype matrix row count does not match phenotype length");
  }
  if (strata.size() != n) throw ValidationError("strata vector length does not match phenotype length");
  if (strata.size() > 0 && strata.minCoeff() < 0) throw ValidationError("strata codes must be >= 0");
  if (static_cast<Index>(env_names.size()) != env.cols()) throw ValidationError("env_names size mismatch");
  if (static_cast<Index>(snp_names.size()) != geno.cols()) throw ValidationError("snp_names size mismatch");
}

Dataset Dataset::select_rows(std::span<const Index> rows) const {
  Dataset out;
  const Index n = static_cast<Index>(rows.size());
  out.y.resize(n);
  out.env.resize(n, env.cols());
  out.strata.resize(n);
  for (Index r = 0; r < n; ++r) {
    out.y[r] = y[rows[r]];
    if (env.cols() > 0) out.env.row(r) = env.row(rows[r]);
    out.strata[r] = strata[rows[r]];
  }
  out.geno = geno.select_rows(rows);
  out.env_names = env_names;
  out.snp_names = snp_names;
  return out;
}

namespace {

Index find_name(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError(std::string("unknown ") + what + " column '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

}  // namespace

Index Dataset::env_index(const std::string& name) const { return find_name(env_names, name, "environmental"); }
Index Dataset::snp_index(const std::string& name) const { return find_name(snp_names, name, "SNP"); }

Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd env, GenotypeMatrix geno) {
  Dataset data;
  const Index n = y.size();
  data.y = std::move(y);
  data.env = env.rows() == 0 ? Eigen::MatrixXd(n, 0) : std::move(env);
  data.geno = geno.cols() == 0 ? GenotypeMatrix(n, 0) : std::move(geno);
  data.strata = Eigen::VectorXi::Zero(n);
  for (Index j = 0; j < data.env.cols(); ++j) data.env_names.push_back("e" + std::to_string(j + 1));
  for (Index j = 0; j < data.geno.cols(); ++j) data.snp_names.push_back("g" + std::to_string(j + 1));
  return data;
}

bool ExtremeDesign::contains(Index row) const {
  return std::binary_search(extremes.begin(), extremes.end(), row);
}

ExtremeDesign select_extremes(const Eigen::Ref<const Eigen::VectorXd>& y, Index lower_count, Index upper_count) {
  const Index n = y.size();
  if (lower_count < 0 || upper_count < 0 || lower_count + upper_count > n) {
    std::ostringstream msg;
    msg << "select_extremes: requested " << lower_count << " + " << upper_count << " extremes from " << n << " rows";
    throw ValidationError(msg.str());
  }
  std::vector<Index> ascending(static_cast<std::size_t>(n));
  std::iota(ascending.begin(), ascending.end(), Index{0});
  std::stable_sort(ascending.begin(), ascending.end(), [&](Index a, Index b) { return y[a] < y[b]; });
  std::vector<Index> descending(ascending.size());
  std::iota(descending.begin(), descending.end(), Index{0});
  std::stable_sort(descending.begin(), descending.end(), [&](Index a, Index b) { return y[a] > y[b]; });

  std::vector<char> selected(static_cast<std::size_t>(n), 0);
  double max_lower = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < lower_count; ++k) {
    selected[ascending[k]] = 1;
    max_lower = std::max(max_lower, y[ascending[k]]);
  }
  double min_upper = std::numeric_limits<double>::infinity();
  Index taken = 0;
  for (std::size_t k = 0; k < descending.size() && taken < upper_count; ++k) {
    if (selected[descending[k]]) continue;
    selected[descending[k]] = 2;
    min_upper = std::min(min_upper, y[descending[k]]);
    ++taken;
  }

  double min_rest = std::numeric_limits<double>::infinity();
  double max_rest = -std::numeric_limits<double>::infinity();
  ExtremeDesign design;
  for (Index i = 0; i < n; ++i) {
    if (selected[i]) {
      design.extremes.push_back(i);
    } else {
      min_rest = std::min(min_rest, y[i]);
      max_rest = std::max(max_rest, y[i]);
    }
  }
  const bool any_rest = design.extremes.size() < static_cast<std::size_t>(n);
  if (lower_count == 0) {
    design.c_lower = -std::numeric_limits<double>::infinity();
  } else {
    const double above = any_rest ? min_rest : min_upper;
    design.c_lower = std::isfinite(above) ? 0.5 * (max_lower + above) : max_lower;
  }
  if (upper_count == 0) {
    design.c_upper = std::numeric_limits<double>::infinity();
  } else {
    const double below = any_rest ? max_rest : max_lower;
    design.c_upper = std::isfinite(below) ? 0.5 * (min_upper + below) : -std::numeric_limits<double>::infinity();
  }
  return design;
}

ExtremeDesign select_extremes_by_cutoffs(const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower,
                                         double c_upper) {
  if (!(c_lower <= c_upper)) throw ValidationError("cutoffs must satisfy c_lower <= c_upper");
  ExtremeDesign design{c_lower, c_upper, {}};
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < c_lower || y[i] > c_upper) design.extremes.push_back(i);
  }
  return design;
}

std::vector<Index> ModelSpec::nuisance() const {
  std::vector<Index> out;
  for (Index k = 0; k < coefficient_count(); ++k) {
    if (!is_tested(k)) out.push_back(k);
  }
  return out;
}

bool ModelSpec::is_tested(Index coefficient) const {
  return std::find(tested.begin(), tested.end(), coefficient) != tested.end();
}

std::vector<std::string> ModelSpec::coefficient_names(const Dataset& data) const {
  std::vector<std::string> names{"(Intercept)"};
  for (Index c : env_columns) names.push_back(data.env_names.at(c));
  for (Index c : snp_columns) names.push_back(data.snp_names.at(c));
  for (const auto& term : interactions) {
    names.push_back(data.env_names.at(term.env_column) + "*" + data.snp_names.at(term.snp_column));
  }
  return names;
}

std::vector<Index> ModelSpec::genotype_columns() const {
  std::vector<Index> cols = snp_columns;
  for (const auto& term : interactions) cols.push_back(term.snp_column);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  return cols;
}

void ModelSpec::validate(const Dataset& data, bool require_tested) const {
  for (Index c : env_columns) {
    if (c < 0 || c >= data.env.cols()) throw ValidationError("model references a missing environmental column");
  }
  for (Index c : snp_columns) {
    if (c < 0 || c >= data.geno.cols()) throw ValidationError("model references a missing SNP column");
  }
  for (const auto& term : interactions) {
    const bool env_declared = std::find(env_columns.begin(), env_columns.end(), term.env_column) != env_columns.end();
    const bool snp_declared = std::find(snp_columns.begin(), snp_columns.end(), term.snp_column) != snp_columns.end();
    if (!env_declared || !snp_declared) {
      throw ValidationError("interaction terms must reference declared environmental and SNP columns");
    }
  }
  for (Index k : tested) {
    if (k <= 0 || k >= coefficient_count()) throw ValidationError("tested term index out of range");
  }
  if (require_tested && tested.empty()) throw ValidationError("no tested terms given");
}

void ModelSpec::fill_row(const Dataset& data, Index row, std::span<const double> genotypes,
                         Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
  const std::vector<Index> gcols = genotype_columns();
  auto genotype_of = [&](Index col) {
    const auto it = std::lower_bound(gcols.begin(), gcols.end(), col);
    return genotypes[static_cast<std::size_t>(it - gcols.begin())];
  };
  Index k = 0;
  out[k++] = 1.0;
  for (Index c : env_columns) out[k++] = data.env(row, c);
  for (Index c : snp_columns) out[k++] = genotype_of(c);
  for (const auto& term : interactions) out[k++] = data.env(row, term.env_column) * genotype_of(term.snp_column);
}

Eigen::VectorXd ParameterVector::coefficients() const {
  Eigen::VectorXd coef(1 + beta_e.size() + beta_g.size() + beta_eg.size());
  coef << alpha, beta_e, beta_g, beta_eg;
  return coef;
}

ParameterVector ParameterVector::from_coefficients(const Eigen::Ref<const Eigen::VectorXd>& coef,
                                                   const ModelSpec& spec, double sigma) {
  ParameterVector p;
  const Index ne = static_cast<Index>(spec.env_columns.size());
  const Index ng = static_cast<Index>(spec.snp_columns.size());
  const Index ni = static_cast<Index>(spec.interactions.size());
  p.alpha = coef[0];
  p.beta_e = coef.segment(1, ne);
  p.beta_g = coef.segment(1 + ne, ng);
  p.beta_eg = coef.segment(1 + ne + ng, ni);
  p.sigma = sigma;
  return p;
}

void attach_wald_intervals(FitResult& fit, double level) {
  const Index k = fit.values.size();
  fit.confidence_level = level;
  fit.standard_errors = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  fit.ci.assign(static_cast<std::size_t>(k), std::nullopt);
  if (fit.observed_information.rows() != k) return;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.observed_information);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    fit.diagnostic += (fit.diagnostic.empty() ? "" : "; ");
    fit.diagnostic += "observed information is singular; confidence intervals undefined";
    return;
  }
  const Eigen::MatrixXd cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const double z = norm_quantile(0.5 + 0.5 * level);
  for (Index j = 0; j < k; ++j) {
    const double se = std::sqrt(cov(j, j));
    fit.standard_errors[j] = se;
    fit.ci[static_cast<std::size_t>(j)] = Interval{fit.values[j] - z * se, fit.values[j] + z * se};
  }
}

std::string to_string(TestMethod method) {
  switch (method) {
    case TestMethod::kScore: return "score";
    case TestMethod::kLrt: return "lrt";
    case TestMethod::kWaldLogistic: return "wald-logistic";
  }
  return "unknown";
}

TestResult make_chi2_result(double statistic, int df, TestMethod method, Index n_used) {
  TestResult result;
  result.statistic = statistic;
  result.df = df;
  result.method = method;
  result.n_used = n_used;
  result.log_p_value = chi2_log_sf(std::max(statistic, 0.0), df);
  result.p_value = std::exp(result.log_p_value);
  return result;
}

Eigen::MatrixXd RegressionView::tested_columns() const {
  Eigen::MatrixXd out(design.rows(), static_cast<Index>(tested.size()));
  for (std::size_t k = 0; k < tested.size(); ++k) out.col(static_cast<Index>(k)) = design.col(tested[k]);
  return out;
}

Eigen::MatrixXd RegressionView::nuisance_columns() const {
  Eigen::MatrixXd out(design.rows(), static_cast<Index>(nuisance.size()));
  for (std::size_t k = 0; k < nuisance.size(); ++k) out.col(static_cast<Index>(k)) = design.col(nuisance[k]);
  return out;
}

RegressionView build_design(const Dataset& data, const ModelSpec& spec, std::span<const Index> rows,
                            MissingGenotypes policy) {
  spec.validate(data, false);
  const std::vector<Index> gcols = spec.genotype_columns();

  std::vector<double> column_means(gcols.size(), 0.0);
  if (policy == MissingGenotypes::kImputeMean) {
    for (std::size_t g = 0; g < gcols.size(); ++g) {
      double sum = 0.0;
      Index count = 0;
      for (Index r : rows) {
        if (auto v = data.geno.at(r, gcols[g])) {
          sum += *v;
          ++count;
        }
      }
      if (count == 0) throw ValidationError("cannot mean-impute SNP '" + data.snp_names[gcols[g]] + "': no observed genotypes");
      column_means[g] = sum / static_cast<double>(count);
    }
  }

  RegressionView view;
  view.tested = spec.tested;
  view.nuisance = spec.nuisance();
  std::vector<double> values(gcols.size());
  std::vector<Index> kept;
  kept.reserve(rows.size());
  for (Index r : rows) {
    bool complete = true;
    for (std::size_t g = 0; g < gcols.size(); ++g) {
      if (data.geno.is_missing(r, gcols[g])) {
        if (policy == MissingGenotypes::kReject) {
          std::ostringstream msg;
          msg << "missing genotype for SNP '" << data.snp_names[gcols[g]] << "' at row " << r
              << " where the method requires complete data";
          throw ValidationError(msg.str());
        }
        complete = false;
      }
    }
    if (!complete && policy == MissingGenotypes::kDropRows) {
      ++view.dropped_rows;
      continue;
    }
    kept.push_back(r);
  }

  const Index n = static_cast<Index>(kept.size());
  view.rows = kept;
  view.y.resize(n);
  view.design.resize(n, spec.coefficient_count());
  for (Index i = 0; i < n; ++i) {
    const Index r = kept[i];
    for (std::size_t g = 0; g < gcols.size(); ++g) {
      const auto v = data.geno.at(r, gcols[g]);
      values[g] = v ? static_cast<double>(*v) : column_means[g];
    }
    view.y[i] = data.y[r];
    spec.fill_row(data, r, values, view.design.row(i));
  }
  return view;
}

RegressionView build_design(const Dataset& data, const ModelSpec& spec, const ExtremeDesign* design,
                            MissingGenotypes policy) {
  if (design != nullptr) return build_design(data, spec, std::span<const Index>(design->extremes), policy);
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return build_design(data, spec, std::span<const Index>(all), policy);
}

}  // namespace epsassoc
