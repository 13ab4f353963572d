#include "epsassoc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "epsassoc/eps_binary.hpp"
#include "epsassoc/eps_full.hpp"
#include "epsassoc/eps_only.hpp"
#include "epsassoc/errors.hpp"
#include "epsassoc/linear_model.hpp"
#include "epsassoc/parallel.hpp"

namespace epsassoc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// First `count` entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<Index> random_subset(Index n, Index count, std::mt19937_64& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index k = 0; k < count; ++k) {
    std::uniform_int_distribution<Index> pick(k, n - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  order.resize(static_cast<std::size_t>(count));
  return order;
}

void mask_genotypes_except(Dataset& data, const std::vector<Index>& keep) {
  std::vector<char> observed(static_cast<std::size_t>(data.size()), 0);
  for (Index i : keep) observed[i] = 1;
  for (Index i = 0; i < data.size(); ++i) {
    if (observed[i]) continue;
    for (Index c = 0; c < data.geno.cols(); ++c) data.geno.set_missing(i, c);
  }
}

ExtremeDesign balanced_extremes(const Eigen::Ref<const Eigen::VectorXd>& values, Index count) {
  return select_extremes(values, count / 2, count - count / 2);
}

// One-row dataset carrying the simulated column names, for resolving terms.
Dataset named_probe() {
  Dataset probe = make_dataset(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 2), GenotypeMatrix(1, 1));
  probe.env_names = {"e1", "e2"};
  probe.snp_names = {"g"};
  return probe;
}

struct ArmOutcome {
  double p_value = kNaN;
  double estimate = kNaN;
  bool failed = false;
};

ArmOutcome analyze(const AppliedDesign& applied, const SimArm& arm, const SimScenario& scenario,
                   const SimOptions& options) {
  const Dataset& data = applied.data;
  const ModelSpec spec = scenario_model(scenario, data, options.tested);
  const Index first_tested = spec.tested.front();
  ArmOutcome out;
  const double cl = applied.extremes ? applied.extremes->c_lower : 0.0;
  const double cu = applied.extremes ? applied.extremes->c_upper : 0.0;
  OptimizerOptions quiet;
  quiet.compute_information = false;

  switch (arm.method) {
    case AnalysisMethod::kFull:
    case AnalysisMethod::kRandom: {
      const RegressionView view = build_design(data, spec, nullptr);
      if (options.collect_tests) {
        if (arm.test == TestKind::kLrt) throw ValidationError("linear analysis supports the score test only");
        out.p_value = score_test_linear(view).p_value;
      }
      if (options.collect_estimates) out.estimate = fit_ols(view.design, view.y).coef[first_tested];
      break;
    }
    case AnalysisMethod::kEpsOnly: {
      const RegressionView view = build_design(data, spec, nullptr);
      if (options.collect_tests) {
        out.p_value = arm.test == TestKind::kLrt ? lrt_eps_only(view, cl, cu).p_value
                                                  : score_test_eps_only(view, cl, cu).p_value;
      }
      if (options.collect_estimates) {
        const TruncatedFit fit = fit_truncated(view.design, view.y, cl, cu, quiet);
        if (!fit.converged) out.failed = true;
        out.estimate = fit.coef[first_tested];
      }
      break;
    }
    case AnalysisMethod::kEpsOnlyBinary: {
      const RegressionView view = build_design(data, spec, nullptr);
      if (options.collect_tests) {
        if (arm.test == TestKind::kLrt) throw ValidationError("the dichotomized analysis supports the score test only");
        const Eigen::VectorXd response = dichotomize(view.y, cl, cu);
        out.p_value = score_test_logistic(response, view.nuisance_columns(), view.tested_columns()).p_value;
      }
      break;  // no linear-model estimate; its MSE is reported as NA
    }
    case AnalysisMethod::kEpsFull: {
      const ExtremeDesign* design = applied.extremes ? &*applied.extremes : nullptr;
      if (options.collect_tests) {
        const bool use_score = arm.test == TestKind::kScore ||
                               (arm.test == TestKind::kAuto && eps_full_score_applicable(spec));
        if (use_score) {
          out.p_value = score_test_eps_full(data, design, spec).p_value;
        } else {
          EpsFullOptions opts;
          opts.optimizer = quiet;
          const TestResult r = lrt_eps_full(data, design, spec, opts);
          if (!r.converged) out.failed = true;
          out.p_value = r.p_value;
        }
      }
      if (options.collect_estimates) {
        EpsFullOptions opts;
        opts.optimizer = quiet;
        const FitResult fit = fit_eps_full(data, design, spec, opts);
        if (!fit.converged) out.failed = true;
        out.estimate = fit.values[first_tested];
      }
      break;
    }
  }
  return out;
}

}  // namespace

void SimScenario::validate() const {
  if (!(q > 0.0 && q <= 0.5)) throw ValidationError("minor allele frequency q must lie in (0, 0.5]");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (N < 1) throw ValidationError("N must be positive");
  if (n < 1 || n > N) throw ValidationError("n must lie in [1, N]");
}

std::uint64_t replicate_seed(std::uint64_t root, std::uint64_t replicate, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(root) ^ replicate) ^ (stream * 0xD1B54A32D192ED03ULL));
}

Dataset simulate_dataset(const SimScenario& scenario, std::mt19937_64& rng) {
  scenario.validate();
  const Index N = scenario.N;
  const double q = scenario.q;
  const double p0 = (1.0 - q) * (1.0 - q);
  const double p1 = 2.0 * q * (1.0 - q);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd y(N);
  Eigen::MatrixXd env(N, 2);
  GenotypeMatrix geno(N, 1);
  for (Index i = 0; i < N; ++i) {
    const double e1 = unif(rng) < 0.4 ? 1.0 : 0.0;
    const double e2 = 2.0 + gauss(rng);
    const double u = unif(rng);
    const int g = u < p0 ? 0 : (u < p0 + p1 ? 1 : 2);
    double mu = scenario.alpha + scenario.beta_e1 * e1 + scenario.beta_e2 * e2 + scenario.beta_g * g;
    if (scenario.model == SimModel::kBinaryInteraction) mu += scenario.beta_e1g * e1 * g;
    if (scenario.model == SimModel::kContinuousInteraction) mu += scenario.beta_e2g * e2 * g;
    y[i] = mu + scenario.sigma * gauss(rng);
    env(i, 0) = e1;
    env(i, 1) = e2;
    geno.set(i, 0, g);
  }
  Dataset data = make_dataset(std::move(y), std::move(env), std::move(geno));
  data.env_names = {"e1", "e2"};
  data.snp_names = {"g"};
  return data;
}

Dataset simulate_dataset(const SimScenario& scenario) {
  std::mt19937_64 rng(replicate_seed(scenario.seed, 0, 0));
  return simulate_dataset(scenario, rng);
}

ModelSpec scenario_model(const SimScenario& scenario, const Dataset& data, const std::vector<std::string>& tested) {
  ModelSpec spec;
  spec.env_columns = {0, 1};
  spec.snp_columns = {0};
  if (scenario.model == SimModel::kBinaryInteraction) spec.interactions.push_back({0, 0});
  if (scenario.model == SimModel::kContinuousInteraction) spec.interactions.push_back({1, 0});
  if (tested.empty()) {
    spec.tested = {scenario.model == SimModel::kMainEffects ? spec.snp_offset() : spec.interaction_offset()};
  } else {
    const auto names = spec.coefficient_names(data);
    for (const auto& name : tested) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end() || it == names.begin()) throw ValidationError("unknown tested term '" + name + "'");
      spec.tested.push_back(static_cast<Index>(it - names.begin()));
    }
  }
  return spec;
}

double true_coefficient(const SimScenario& scenario, const std::string& name) {
  if (name == "(Intercept)") return scenario.alpha;
  if (name == "e1") return scenario.beta_e1;
  if (name == "e2") return scenario.beta_e2;
  if (name == "g") return scenario.beta_g;
  if (name == "e1*g") return scenario.model == SimModel::kBinaryInteraction ? scenario.beta_e1g : 0.0;
  if (name == "e2*g") return scenario.model == SimModel::kContinuousInteraction ? scenario.beta_e2g : 0.0;
  throw ValidationError("unknown coefficient '" + name + "'");
}

AppliedDesign apply_design(const Dataset& data, const DesignSpec& spec, std::mt19937_64& rng) {
  const Index N = data.size();
  const Index n = spec.n;
  if (n < 0 || n > N) {
    std::ostringstream msg;
    msg << "design asks for " << n << " genotyped rows out of " << N;
    throw ValidationError(msg.str());
  }
  AppliedDesign out;
  switch (spec.kind) {
    case DesignKind::kFull:
      out.data = data;
      break;
    case DesignKind::kRandom: {
      std::vector<Index> rows = random_subset(N, n, rng);
      std::sort(rows.begin(), rows.end());
      out.data = data.select_rows(rows);
      break;
    }
    case DesignKind::kRsComplete: {
      out.data = data;
      mask_genotypes_except(out.data, random_subset(N, n, rng));
      break;
    }
    case DesignKind::kEpsOnly:
    case DesignKind::kEesOnly: {
      const bool by_trait = spec.kind == DesignKind::kEpsOnly;
      if (!by_trait && (spec.exposure_column < 0 || spec.exposure_column >= data.env.cols())) {
        throw ValidationError("exposure column out of range");
      }
      const Eigen::VectorXd values = by_trait ? data.y : Eigen::VectorXd(data.env.col(spec.exposure_column));
      ExtremeDesign ex = balanced_extremes(values, n);
      out.data = data.select_rows(ex.extremes);
      std::iota(ex.extremes.begin(), ex.extremes.end(), Index{0});
      out.extremes = ex;
      break;
    }
    case DesignKind::kEpsFull:
    case DesignKind::kEesFull: {
      const bool by_trait = spec.kind == DesignKind::kEpsFull;
      if (!by_trait && (spec.exposure_column < 0 || spec.exposure_column >= data.env.cols())) {
        throw ValidationError("exposure column out of range");
      }
      const Eigen::VectorXd values = by_trait ? data.y : Eigen::VectorXd(data.env.col(spec.exposure_column));
      ExtremeDesign ex = balanced_extremes(values, n);
      out.data = data;
      mask_genotypes_except(out.data, ex.extremes);
      out.extremes = ex;
      break;
    }
    case DesignKind::kCombined: {
      if (spec.n0 < 0 || spec.n_e < 0 || spec.n0 + spec.n_e != n) {
        throw ValidationError("combined design needs n0 + n_e = n");
      }
      std::vector<Index> random_rows = random_subset(N, spec.n0, rng);
      std::vector<char> taken(static_cast<std::size_t>(N), 0);
      for (Index i : random_rows) taken[i] = 1;
      std::vector<Index> rest;
      for (Index i = 0; i < N; ++i) {
        if (!taken[i]) rest.push_back(i);
      }
      Eigen::VectorXd rest_y(static_cast<Index>(rest.size()));
      for (std::size_t k = 0; k < rest.size(); ++k) rest_y[static_cast<Index>(k)] = data.y[rest[k]];
      const ExtremeDesign ex = balanced_extremes(rest_y, spec.n_e);
      std::vector<Index> genotyped = random_rows;
      for (Index k : ex.extremes) genotyped.push_back(rest[k]);
      std::sort(genotyped.begin(), genotyped.end());
      out.data = data;
      mask_genotypes_except(out.data, genotyped);
      out.extremes = ExtremeDesign{ex.c_lower, ex.c_upper, genotyped};
      break;
    }
  }
  return out;
}

std::string to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::kFull: return "full";
    case DesignKind::kRandom: return "random";
    case DesignKind::kRsComplete: return "rs-complete";
    case DesignKind::kEpsOnly: return "eps-only";
    case DesignKind::kEpsFull: return "eps-full";
    case DesignKind::kEesOnly: return "ees-only";
    case DesignKind::kEesFull: return "ees-full";
    case DesignKind::kCombined: return "combined";
  }
  return "unknown";
}

std::string to_string(AnalysisMethod method) {
  switch (method) {
    case AnalysisMethod::kFull: return "full";
    case AnalysisMethod::kRandom: return "random";
    case AnalysisMethod::kEpsOnly: return "eps-only";
    case AnalysisMethod::kEpsOnlyBinary: return "eps-only-binary";
    case AnalysisMethod::kEpsFull: return "eps-full";
  }
  return "unknown";
}

DesignKind parse_design_kind(const std::string& text) {
  for (DesignKind k : {DesignKind::kFull, DesignKind::kRandom, DesignKind::kRsComplete, DesignKind::kEpsOnly,
                       DesignKind::kEpsFull, DesignKind::kEesOnly, DesignKind::kEesFull, DesignKind::kCombined}) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("unknown design '" + text + "'");
}

AnalysisMethod parse_method(const std::string& text) {
  for (AnalysisMethod m : {AnalysisMethod::kFull, AnalysisMethod::kRandom, AnalysisMethod::kEpsOnly,
                           AnalysisMethod::kEpsOnlyBinary, AnalysisMethod::kEpsFull}) {
    if (to_string(m) == text) return m;
  }
  throw ValidationError("unknown method '" + text + "'");
}

void check_compatible(DesignKind design, AnalysisMethod method) {
  bool ok = false;
  switch (method) {
    case AnalysisMethod::kFull:
    case AnalysisMethod::kRandom:
      ok = design == DesignKind::kFull || design == DesignKind::kRandom || design == DesignKind::kEesOnly;
      break;
    case AnalysisMethod::kEpsOnly:
    case AnalysisMethod::kEpsOnlyBinary:
      ok = design == DesignKind::kEpsOnly;
      break;
    case AnalysisMethod::kEpsFull:
      ok = design == DesignKind::kFull || design == DesignKind::kRsComplete || design == DesignKind::kEpsFull ||
           design == DesignKind::kEesFull || design == DesignKind::kCombined;
      break;
  }
  if (!ok) {
    throw ValidationError("method '" + to_string(method) + "' cannot analyze the '" + to_string(design) + "' design");
  }
}

std::vector<SimResult> run_arms(const SimScenario& scenario, const std::vector<SimArm>& arms, Index replicates,
                                const SimOptions& options) {
  scenario.validate();
  if (replicates < 1) throw ValidationError("replicate count must be positive");
  const std::size_t A = arms.size();
  std::vector<SimArm> resolved = arms;
  for (auto& arm : resolved) {
    if (arm.design.n == 0) arm.design.n = scenario.n;
    if (arm.design.kind == DesignKind::kCombined && arm.design.n0 + arm.design.n_e == 0) arm.design.n_e = arm.design.n;
    check_compatible(arm.design.kind, arm.method);
    if (arm.design.n > scenario.N) throw ValidationError("design n exceeds N for arm '" + arm.label + "'");
  }
  // Resolve tested names up front so a typo fails before any replicate runs.
  const Dataset probe = named_probe();
  const ModelSpec spec = scenario_model(scenario, probe, options.tested);
  const double truth = true_coefficient(scenario, spec.coefficient_names(probe)[spec.tested.front()]);

  const std::size_t R = static_cast<std::size_t>(replicates);
  std::vector<std::vector<ArmOutcome>> outcomes(A, std::vector<ArmOutcome>(R));
  parallel_for(R, options.workers, [&](std::size_t r) {
    std::mt19937_64 data_rng(replicate_seed(scenario.seed, r, 0));
    const Dataset data = simulate_dataset(scenario, data_rng);
    for (std::size_t a = 0; a < A; ++a) {
      std::mt19937_64 design_rng(replicate_seed(scenario.seed, r, 1));
      try {
        const AppliedDesign applied = apply_design(data, resolved[a].design, design_rng);
        outcomes[a][r] = analyze(applied, resolved[a], scenario, options);
      } catch (const ComputationError&) {
        outcomes[a][r].failed = true;
      }
    }
  });

  std::vector<SimResult> results(A);
  for (std::size_t a = 0; a < A; ++a) {
    SimResult& res = results[a];
    res.label = resolved[a].label;
    res.design = to_string(resolved[a].design.kind);
    res.method = to_string(resolved[a].method);
    res.replicates = replicates;
    res.seed = scenario.seed;
    double sq = 0.0, sum = 0.0;
    Index estimated = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const ArmOutcome& o = outcomes[a][r];
      const bool bad = o.failed || (options.collect_tests && !std::isfinite(o.p_value)) ||
                       (options.collect_estimates && resolved[a].method != AnalysisMethod::kEpsOnlyBinary &&
                        !std::isfinite(o.estimate));
      res.p_values.push_back(bad ? kNaN : o.p_value);
      res.estimates.push_back(bad ? kNaN : o.estimate);
      if (bad) {
        ++res.failures;
        continue;
      }
      if (options.collect_tests && o.p_value < options.level) ++res.rejections;
      if (options.collect_estimates && std::isfinite(o.estimate)) {
        sq += (o.estimate - truth) * (o.estimate - truth);
        sum += o.estimate;
        ++estimated;
      }
    }
    if (res.failures * 100 >= replicates && res.failures > 0) {
      std::ostringstream msg;
      msg << "arm '" << res.label << "': " << res.failures << " of " << replicates
          << " replicates failed, at or above the 1% limit";
      throw ComputationError(msg.str());
    }
    const double used = static_cast<double>(replicates - res.failures);
    res.power = options.collect_tests ? res.rejections / used : kNaN;
    res.mc_se = options.collect_tests ? std::sqrt(res.power * (1.0 - res.power) / used) : kNaN;
    res.mse = estimated > 0 ? sq / estimated : kNaN;
    res.mean_estimate = estimated > 0 ? sum / estimated : kNaN;
  }
  return results;
}

SimResult estimate_power(const SimScenario& scenario, const DesignSpec& design, AnalysisMethod method,
                         const std::vector<std::string>& tested, Index replicates, const SimOptions& options) {
  SimOptions opts = options;
  opts.tested = tested;
  opts.collect_tests = true;
  SimArm arm{to_string(design.kind) + "/" + to_string(method), design, method, TestKind::kAuto};
  return run_arms(scenario, {arm}, replicates, opts).front();
}

SimResult estimate_mse(const SimScenario& scenario, const DesignSpec& design, AnalysisMethod method,
                       Index replicates, const SimOptions& options) {
  if (method == AnalysisMethod::kEpsOnlyBinary) {
    throw ValidationError("the dichotomized analysis has no linear-model estimate");
  }
  SimOptions opts = options;
  opts.collect_tests = false;
  opts.collect_estimates = true;
  SimArm arm{to_string(design.kind) + "/" + to_string(method), design, method, TestKind::kAuto};
  return run_arms(scenario, {arm}, replicates, opts).front();
}

std::vector<CurvePoint> power_curve(const SimScenario& scenario, const std::vector<CurveArm>& arms,
                                    const std::vector<Index>& n_grid, Index replicates, const SimOptions& options) {
  std::vector<CurvePoint> table;
  for (Index n : n_grid) {
    if (n < 1 || n > scenario.N) throw ValidationError("n grid values must lie in [1, N]");
    SimScenario at_n = scenario;
    at_n.n = n;
    std::vector<SimArm> sim_arms;
    for (const CurveArm& c : arms) {
      SimArm arm{c.label, c.design, c.method, TestKind::kAuto};
      arm.design.n = n;
      if (arm.design.kind == DesignKind::kCombined) {
        arm.design.n_e = static_cast<Index>(std::llround(c.extreme_fraction * static_cast<double>(n)));
        arm.design.n0 = n - arm.design.n_e;
      }
      sim_arms.push_back(arm);
    }
    SimOptions opts = options;
    opts.collect_tests = true;
    opts.collect_estimates = false;
    const auto results = run_arms(at_n, sim_arms, replicates, opts);
    for (const auto& r : results) table.push_back({n, r.label, r.design, r.method, r.power, r.mc_se, r.failures});
  }
  return table;
}

}  // namespace epsassoc
