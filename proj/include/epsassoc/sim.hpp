#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "epsassoc/model.hpp"

namespace epsassoc {

enum class SimModel {
  kMainEffects,             // y = a + b1 e1 + b2 e2 + bg g + e
  kBinaryInteraction,       // ... + b1g e1 g
  kContinuousInteraction,   // ... + b2g e2 g
};

struct SimScenario {
  SimModel model = SimModel::kMainEffects;
  Index N = 5000;
  Index n = 2500;
  double alpha = 50.0;
  double beta_e1 = 10.0;
  double beta_e2 = 5.0;
  double beta_g = 0.5;
  double beta_e1g = 1.0;
  double beta_e2g = 0.5;
  double sigma = 6.0;
  double q = 0.3;
  std::uint64_t seed = 20240101;

  void validate() const;
};

// Seed for stream `stream` of replicate `replicate`, derived by counter.
std::uint64_t replicate_seed(std::uint64_t root, std::uint64_t replicate, std::uint64_t stream);

// e1 ~ Bernoulli(0.4), e2 ~ N(2, 1), g ~ HWE(q), Gaussian noise. Columns are
// named e1, e2 and g; one stratum.
Dataset simulate_dataset(const SimScenario& scenario, std::mt19937_64& rng);
Dataset simulate_dataset(const SimScenario& scenario);

// Regression model matching the scenario with the given coefficient names
// tested; empty means the scenario's headline term (g, or the interaction).
ModelSpec scenario_model(const SimScenario& scenario, const Dataset& data,
                         const std::vector<std::string>& tested = {});
double true_coefficient(const SimScenario& scenario, const std::string& name);

enum class DesignKind { kFull, kRandom, kRsComplete, kEpsOnly, kEpsFull, kEesOnly, kEesFull, kCombined };

struct DesignSpec {
  DesignKind kind = DesignKind::kFull;
  Index n = 0;   // genotyped count; 0 takes the scenario's n
  Index n0 = 0;  // combined: random part
  Index n_e = 0; // combined: extreme part
  Index exposure_column = 1;  // EES: environmental column defining extremes
};

struct AppliedDesign {
  Dataset data;
  std::optional<ExtremeDesign> extremes;  // in the coordinates of data
};

// Random picks come from rng, so arms sharing a seeded stream share subsets.
AppliedDesign apply_design(const Dataset& data, const DesignSpec& spec, std::mt19937_64& rng);

enum class AnalysisMethod { kFull, kRandom, kEpsOnly, kEpsOnlyBinary, kEpsFull };
enum class TestKind { kAuto, kScore, kLrt };

std::string to_string(DesignKind kind);
std::string to_string(AnalysisMethod method);
DesignKind parse_design_kind(const std::string& text);
AnalysisMethod parse_method(const std::string& text);

// Throws ValidationError for pairings the method cannot analyze.
void check_compatible(DesignKind design, AnalysisMethod method);

struct SimArm {
  std::string label;
  DesignSpec design;
  AnalysisMethod method = AnalysisMethod::kFull;
  TestKind test = TestKind::kAuto;
};

struct SimOptions {
  int workers = 1;
  double level = 0.05;
  bool collect_estimates = false;  // fit the model and record the first tested coefficient
  bool collect_tests = true;
  std::vector<std::string> tested;  // coefficient names; empty = scenario default
};

struct SimResult {
  std::string label;
  std::string design;
  std::string method;
  Index replicates = 0;
  Index failures = 0;
  Index rejections = 0;
  double power = 0.0;
  double mc_se = 0.0;
  double mse = 0.0;
  double mean_estimate = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> p_values;   // NaN for failed replicates
  std::vector<double> estimates;  // NaN when not collected or failed
};

// Every arm is evaluated on the same simulated dataset per replicate.
std::vector<SimResult> run_arms(const SimScenario& scenario, const std::vector<SimArm>& arms, Index replicates,
                                const SimOptions& options = {});

SimResult estimate_power(const SimScenario& scenario, const DesignSpec& design, AnalysisMethod method,
                         const std::vector<std::string>& tested, Index replicates, const SimOptions& options = {});

SimResult estimate_mse(const SimScenario& scenario, const DesignSpec& design, AnalysisMethod method,
                       Index replicates, const SimOptions& options = {});

struct CurveArm {
  std::string label;
  DesignSpec design;              // n is overwritten per grid point
  AnalysisMethod method = AnalysisMethod::kEpsFull;
  double extreme_fraction = 1.0;  // combined: n_e / n
};

struct CurvePoint {
  Index n = 0;
  std::string label;
  std::string design;
  std::string method;
  double power = 0.0;
  double mc_se = 0.0;
  Index failures = 0;
};

std::vector<CurvePoint> power_curve(const SimScenario& scenario, const std::vector<CurveArm>& arms,
                                    const std::vector<Index>& n_grid, Index replicates,
                                    const SimOptions& options = {});

}  // namespace epsassoc
