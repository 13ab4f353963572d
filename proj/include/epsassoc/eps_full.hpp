#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsassoc/model.hpp"
#include "epsassoc/optimize.hpp"

namespace epsassoc {

inline constexpr int kGenotypeStates = 3;

// Stratified genotype law for one SNP: row j holds P(X_g = k | stratum j).
struct GenotypeDistribution {
  Eigen::MatrixXd p;       // J x 3
  Eigen::MatrixXi counts;  // complete-case cell counts
  Eigen::VectorXi totals;  // complete cases per stratum
  bool hwe = false;

  int strata() const { return static_cast<int>(p.rows()); }
  double mean(int j) const { return p(j, 1) + 2.0 * p(j, 2); }
  double variance(int j) const;
  double minor_allele_frequency(int j) const { return 0.5 * mean(j); }
  bool has_empty_cells() const { return (counts.array() == 0).any(); }

  static GenotypeDistribution from_hwe(const Eigen::VectorXd& maf);
};

// Cell frequencies among rows whose genotype is observed, per stratum. With
// hwe, rows follow ((1-q)^2, 2q(1-q), q^2) at the complete-case allele
// frequency. Throws ValidationError for a stratum without complete cases.
GenotypeDistribution estimate_genotype_dist(const Dataset& data, Index snp_column, bool hwe = false);

// Log-likelihood of all rows: observed genotypes contribute log p, missing
// ones are summed over the genotype states (product of per-SNP marginals).
// Parameter vector layout: coefficients, log sigma, then genotype parameters
// when they are free (softmax logits per stratum over non-empty cells, or
// the logit of q under HWE).
class EpsFullLikelihood {
 public:
  EpsFullLikelihood(const Dataset& data, const ModelSpec& spec, std::vector<GenotypeDistribution> dists,
                    bool free_genotype);

  Index rows() const { return static_cast<Index>(row_start_.size()) - 1; }
  Index coefficient_count() const { return coefficient_count_; }
  Index genotype_parameter_count() const { return genotype_param_count_; }
  Index parameter_count() const { return coefficient_count_ + 1 + genotype_param_count_; }

  // Genotype parameters reproducing the distributions given at construction.
  Eigen::VectorXd initial_genotype_parameters() const;
  std::vector<GenotypeDistribution> distributions(const Eigen::VectorXd& theta) const;

  // Summed log-likelihood; fills the gradient in the same layout when asked.
  double value(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const;

 private:
  struct CellParams {
    std::vector<int> active;  // genotype states with positive probability
    Index offset = 0;         // first free parameter
    Index count = 0;          // number of free parameters
  };
  // log p for (snp, stratum, state) at theta.
  void genotype_log_probs(const Eigen::VectorXd& theta, std::vector<double>& out) const;

  Index coefficient_count_ = 0;
  Index genotype_param_count_ = 0;
  int snps_ = 0;
  int strata_ = 1;
  bool free_genotype_ = false;
  bool hwe_ = false;
  std::vector<GenotypeDistribution> dists_;
  std::vector<CellParams> cells_;     // snp-major, then stratum
  std::vector<Index> row_start_;      // state offsets, rows() + 1 entries
  std::vector<int> row_stratum_;
  Eigen::VectorXd y_;                 // per row
  Eigen::MatrixXd state_design_;      // one covariate row per state
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> state_codes_;  // states x snps
};

double loglik_eps_full(const ParameterVector& params, const Dataset& data, const ExtremeDesign* design,
                       const std::vector<GenotypeDistribution>& dists, const ModelSpec& spec);

struct EpsFullOptions {
  OptimizerOptions optimizer;
  bool hwe = false;
  bool optimize_genotype_dist = true;
  double confidence_level = 0.95;
};

FitResult fit_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec,
                       const EpsFullOptions& options = {});

// True when no nuisance coefficient involves a genotype column, so the closed
// form score test applies.
bool eps_full_score_applicable(const ModelSpec& spec);

// Linear null over all rows, shared by every SNP tested against it.
struct EpsFullNull {
  Eigen::MatrixXd nuisance;
  Eigen::VectorXd residuals;
  double sigma = 1.0;
  Eigen::MatrixXd info_nuisance;  // (nuisance coefficients, sigma)
};

EpsFullNull fit_eps_full_null(const Dataset& data, const ModelSpec& spec);

struct EpsFullScoreWorkspace {
  Eigen::MatrixXd cond_mean;      // strata x snps
  Eigen::MatrixXd cond_variance;  // strata x snps
  Eigen::VectorXd score;
  Eigen::MatrixXd info_tested;       // I_gg
  Eigen::MatrixXd info_cross;        // I_g,theta
  Eigen::MatrixXd genotype_correction;  // sum_j (sum f)^2 Var / (N_j sigma^4)
  Eigen::MatrixXd variance;
};

EpsFullScoreWorkspace score_workspace_eps_full(const EpsFullNull& null, const Dataset& data, const ModelSpec& spec,
                                               bool hwe = false);

TestResult score_test_eps_full(const EpsFullNull& null, const Dataset& data, const ModelSpec& spec,
                               bool hwe = false);

TestResult score_test_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec,
                               bool hwe = false);

struct LrtDetail {
  double alt_loglik = 0.0;
  double null_loglik = 0.0;
  bool restarted = false;
  bool clamped = false;
  bool converged = false;
};

// Alternative: spec as given. Null: the tested coefficients fixed at zero,
// genotype law over the same SNP columns co-optimized in both fits.
TestResult lrt_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& spec,
                        const EpsFullOptions& options = {}, LrtDetail* detail = nullptr);

// Nested-model form; the tested block is every alt term missing from the null.
TestResult lrt_eps_full(const Dataset& data, const ExtremeDesign* design, const ModelSpec& null_spec,
                        const ModelSpec& alt_spec, const EpsFullOptions& options = {},
                        LrtDetail* detail = nullptr);

}  // namespace epsassoc
