#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epsassoc {

using Index = Eigen::Index;

// Additive minor-allele counts with missingness as its own state.
class GenotypeMatrix {
 public:
  GenotypeMatrix() = default;
  // All entries start missing.
  GenotypeMatrix(Index rows, Index cols);

  Index rows() const { return codes_.rows(); }
  Index cols() const { return codes_.cols(); }

  bool is_missing(Index row, Index col) const { return codes_(row, col) < 0; }
  std::optional<int> at(Index row, Index col) const {
    const auto code = codes_(row, col);
    return code < 0 ? std::nullopt : std::optional<int>(code);
  }
  // Unchecked access for observed entries.
  int value(Index row, Index col) const { return codes_(row, col); }

  void set(Index row, Index col, std::optional<int> genotype);
  void set_missing(Index row, Index col) { codes_(row, col) = kMissingCode; }

  Index missing_count(Index col) const;
  GenotypeMatrix select_rows(std::span<const Index> rows) const;

 private:
  static constexpr std::int8_t kMissingCode = -1;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> codes_;
};

struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd env;   // N x d environmental covariates
  GenotypeMatrix geno;   // N x m
  Eigen::VectorXi strata;  // stratum code per row, 0..J-1
  std::vector<std::string> env_names;
  std::vector<std::string> snp_names;

  Index size() const { return y.size(); }
  int stratum_count() const { return strata.size() == 0 ? 1 : strata.maxCoeff() + 1; }

  // Throws ValidationError on inconsistent shapes or non-finite values.
  void validate() const;
  Dataset select_rows(std::span<const Index> rows) const;
  Index env_index(const std::string& name) const;
  Index snp_index(const std::string& name) const;
};

// Builds a dataset with one stratum and default column names.
Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd env, GenotypeMatrix geno);

struct ExtremeDesign {
  double c_lower = 0.0;
  double c_upper = 0.0;
  std::vector<Index> extremes;  // ascending row indices

  bool contains(Index row) const;
  std::size_t size() const { return extremes.size(); }
};

// The lower_count smallest and upper_count largest values. Ties at a boundary
// go to the lowest row index. Cutoffs sit halfway between the last selected
// and first unselected order statistic.
ExtremeDesign select_extremes(const Eigen::Ref<const Eigen::VectorXd>& y, Index lower_count,
                              Index upper_count);

ExtremeDesign select_extremes_by_cutoffs(const Eigen::Ref<const Eigen::VectorXd>& y, double c_lower,
                                         double c_upper);

struct InteractionTerm {
  Index env_column;
  Index snp_column;
};

// Coefficient layout: intercept, env terms, snp terms, interaction terms.
struct ModelSpec {
  std::vector<Index> env_columns;
  std::vector<Index> snp_columns;
  std::vector<InteractionTerm> interactions;
  std::vector<Index> tested;  // coefficient indices, never the intercept

  Index coefficient_count() const {
    return 1 + static_cast<Index>(env_columns.size() + snp_columns.size() + interactions.size());
  }
  Index snp_offset() const { return 1 + static_cast<Index>(env_columns.size()); }
  Index interaction_offset() const { return snp_offset() + static_cast<Index>(snp_columns.size()); }

  std::vector<Index> nuisance() const;
  std::vector<std::string> coefficient_names(const Dataset& data) const;
  // Dataset genotype columns referenced by snp or interaction terms, sorted.
  std::vector<Index> genotype_columns() const;
  bool is_tested(Index coefficient) const;

  void validate(const Dataset& data, bool require_tested) const;

  // Covariate row for one individual given values for the genotype columns
  // in genotype_columns() order.
  void fill_row(const Dataset& data, Index row, std::span<const double> genotypes,
                Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const;
};

struct ParameterVector {
  double alpha = 0.0;
  Eigen::VectorXd beta_e;
  Eigen::VectorXd beta_g;
  Eigen::VectorXd beta_eg;
  double sigma = 1.0;

  Eigen::VectorXd coefficients() const;
  static ParameterVector from_coefficients(const Eigen::Ref<const Eigen::VectorXd>& coef,
                                           const ModelSpec& spec, double sigma);
};

struct Interval {
  double lower;
  double upper;
};

struct FitResult {
  ParameterVector estimates;
  std::vector<std::string> names;  // coefficients then "sigma"
  Eigen::VectorXd values;          // matches names
  Eigen::MatrixXd observed_information;
  Eigen::VectorXd standard_errors;  // NaN where undefined
  std::vector<std::optional<Interval>> ci;
  double confidence_level = 0.95;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;
};

// Standard errors and Wald intervals from the observed information.
void attach_wald_intervals(FitResult& fit, double level = 0.95);

enum class TestMethod { kScore, kLrt, kWaldLogistic };

std::string to_string(TestMethod method);

struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double log_p_value = 0.0;
  TestMethod method = TestMethod::kScore;
  Index n_used = 0;
  bool converged = true;  // false when a fit behind the statistic did not converge
  std::string note;       // warnings worth surfacing to the user
};

TestResult make_chi2_result(double statistic, int df, TestMethod method, Index n_used);

enum class MissingGenotypes { kReject, kDropRows, kImputeMean };

// Dense regression matrices for one set of rows.
struct RegressionView {
  std::vector<Index> rows;   // dataset rows in view order
  Eigen::VectorXd y;
  Eigen::MatrixXd design;    // column 0 is the intercept
  std::vector<Index> tested;
  std::vector<Index> nuisance;
  Index dropped_rows = 0;

  Index size() const { return y.size(); }
  Eigen::MatrixXd tested_columns() const;
  Eigen::MatrixXd nuisance_columns() const;
};

RegressionView build_design(const Dataset& data, const ModelSpec& spec, std::span<const Index> rows,
                            MissingGenotypes policy = MissingGenotypes::kReject);

// All rows when design is null, otherwise the extreme set.
RegressionView build_design(const Dataset& data, const ModelSpec& spec, const ExtremeDesign* design,
                            MissingGenotypes policy = MissingGenotypes::kReject);

}  // namespace epsassoc
