#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "epsassoc/cli.hpp"
#include "epsassoc/eps_binary.hpp"
#include "epsassoc/eps_full.hpp"
#include "epsassoc/eps_only.hpp"
#include "epsassoc/errors.hpp"
#include "epsassoc/linear_model.hpp"
#include "epsassoc/parallel.hpp"
#include "epsassoc/stats.hpp"

namespace epsassoc::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kGwasBlock = 2048;

bool needs_cutoffs(AnalysisMethod m) { return m == AnalysisMethod::kEpsOnly || m == AnalysisMethod::kEpsOnlyBinary; }

TestKind parse_test_kind(const std::string& s) {
  if (s == "auto") return TestKind::kAuto;
  if (s == "score") return TestKind::kScore;
  if (s == "lrt") return TestKind::kLrt;
  throw ValidationError("--test must be auto, score or lrt, got '" + s + "'");
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += sep;
    out += parts[k];
  }
  return out;
}

// Status cells stay on one line and inside their column.
std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

double neg_log10(const TestResult& r) { return -r.log_p_value / std::numbers::ln10; }

struct Study {
  LoadedData loaded;
  Formula formula;
  AnalysisMethod method = AnalysisMethod::kFull;
  TestKind test = TestKind::kAuto;
  MissingGenotypes policy = MissingGenotypes::kDropRows;
  double c_lower = 0.0, c_upper = 0.0;
  Dataset analysis;  // rows entering the analysis
};

Study load_study(const RunConfig& config, std::ostream& log) {
  Study st;
  st.formula = parse_formula(config.formula);
  st.method = parse_method(config.method);
  st.test = parse_test_kind(config.test);
  st.policy = config.impute_mean ? MissingGenotypes::kImputeMean : MissingGenotypes::kDropRows;
  st.loaded = ingest(config.pheno_path, config.geno_path, st.formula.response, st.formula.env_columns(), config.strata);
  const Dataset& data = st.loaded.data;
  if (!needs_cutoffs(st.method)) {
    st.analysis = data;
    return st;
  }
  const ExtremeDesign design = config.lower_count
                                   ? select_extremes(data.y, *config.lower_count, *config.upper_count)
                                   : select_extremes_by_cutoffs(data.y, *config.c_lower, *config.c_upper);
  st.c_lower = design.c_lower;
  st.c_upper = design.c_upper;
  st.analysis = data.select_rows(design.extremes);
  if (design.size() < static_cast<std::size_t>(data.size())) {
    log << "note: " << data.size() - static_cast<Index>(design.size())
        << " individuals lie between the cutoffs and are left out\n";
  }
  return st;
}

bool nuisance_is_environmental(const ModelSpec& spec) {
  for (Index k : spec.nuisance()) {
    if (k >= spec.snp_offset()) return false;
  }
  return true;
}

// Null fits shared by every SNP whose rows and nuisance columns match.
struct SharedNull {
  std::optional<LinearNull> linear;
  std::optional<EpsOnlyNull> eps_only;
  std::optional<EpsFullNull> eps_full;
  std::string error;  // set when the shared fit itself failed
};

// Nuisance columns of a model whose nuisance terms are all environmental.
Eigen::MatrixXd environmental_design(const Dataset& data, const ModelSpec& spec) {
  const std::vector<Index> nuisance = spec.nuisance();
  Eigen::MatrixXd X(data.size(), static_cast<Index>(nuisance.size()));
  for (std::size_t k = 0; k < nuisance.size(); ++k) {
    const Index c = nuisance[k];
    if (c == 0) {
      X.col(static_cast<Index>(k)).setOnes();
    } else {
      X.col(static_cast<Index>(k)) = data.env.col(spec.env_columns[static_cast<std::size_t>(c - 1)]);
    }
  }
  return X;
}

bool uses_eps_full_score(const Study& st, const ModelSpec& spec) {
  if (st.test == TestKind::kLrt) return false;
  if (eps_full_score_applicable(spec)) return true;
  if (st.test == TestKind::kScore) {
    throw ValidationError("the closed-form eps-full score test needs every genotype term tested; use --test lrt");
  }
  return false;
}

SharedNull fit_shared_null(const Study& st, const ModelSpec& spec) {
  SharedNull shared;
  if (!nuisance_is_environmental(spec)) return shared;
  try {
    switch (st.method) {
      case AnalysisMethod::kFull:
      case AnalysisMethod::kRandom:
        shared.linear = fit_linear_null(environmental_design(st.analysis, spec), st.analysis.y);
        break;
      case AnalysisMethod::kEpsOnly:
        if (st.test != TestKind::kLrt) {
          shared.eps_only = fit_eps_only_null(environmental_design(st.analysis, spec), st.analysis.y, st.c_lower, st.c_upper);
        }
        break;
      case AnalysisMethod::kEpsOnlyBinary:
        break;
      case AnalysisMethod::kEpsFull:
        if (uses_eps_full_score(st, spec)) shared.eps_full = fit_eps_full_null(st.analysis, spec);
        break;
    }
  } catch (const ComputationError& e) {
    shared.error = e.what();
  }
  return shared;
}

struct Outcome {
  TestResult result;
  double beta = kNaN;
  double se = kNaN;
  std::string test;
  std::string status = "ok";
  Index dropped = 0;
};

Outcome analyze(const Study& st, const ModelSpec& spec, const RunConfig& config, const SharedNull* shared) {
  if (shared && !shared->error.empty()) throw ComputationError(shared->error);
  const Dataset& data = st.analysis;
  const std::vector<std::string> names = spec.coefficient_names(data);
  std::vector<std::string> tested_names;
  for (Index k : spec.tested) tested_names.push_back(names[k]);
  Outcome out;
  out.test = "score";

  switch (st.method) {
    case AnalysisMethod::kFull:
    case AnalysisMethod::kRandom: {
      const RegressionView view = build_design(data, spec, nullptr, st.policy);
      out.dropped = view.dropped_rows;
      out.result = shared && shared->linear && view.dropped_rows == 0
                       ? score_test_linear(*shared->linear, view.tested_columns(), tested_names)
                       : score_test_linear(view, tested_names);
      if (spec.tested.size() == 1) {
        const FitResult fit = fit_linear(view, spec, data);
        out.beta = fit.values[spec.tested[0]];
        out.se = fit.standard_errors[spec.tested[0]];
      }
      break;
    }
    case AnalysisMethod::kEpsOnly: {
      const RegressionView view = build_design(data, spec, nullptr, st.policy);
      out.dropped = view.dropped_rows;
      if (st.test == TestKind::kLrt) {
        out.test = "lrt";
        out.result = lrt_eps_only(view, st.c_lower, st.c_upper);
      } else if (shared && shared->eps_only && view.dropped_rows == 0) {
        out.result = score_test_eps_only(*shared->eps_only, view.tested_columns(), tested_names);
      } else {
        // Rows dropped for this SNP change the null, so it is refitted.
        out.result = score_test_eps_only(view, st.c_lower, st.c_upper, tested_names);
      }
      break;
    }
    case AnalysisMethod::kEpsOnlyBinary: {
      const RegressionView view = build_design(data, spec, nullptr, MissingGenotypes::kDropRows);
      out.dropped = view.dropped_rows;
      const Eigen::VectorXd response = dichotomize(view.y, st.c_lower, st.c_upper);
      out.result = score_test_logistic(response, view.nuisance_columns(), view.tested_columns(), tested_names);
      break;
    }
    case AnalysisMethod::kEpsFull: {
      if (uses_eps_full_score(st, spec)) {
        out.result = shared && shared->eps_full ? score_test_eps_full(*shared->eps_full, data, spec, config.hwe)
                                                : score_test_eps_full(data, nullptr, spec, config.hwe);
      } else {
        out.test = "lrt";
        EpsFullOptions opts;
        opts.hwe = config.hwe;
        opts.optimizer.compute_information = false;
        out.result = lrt_eps_full(data, nullptr, spec, opts);
      }
      break;
    }
  }
  if (!out.result.converged) out.status = "not-converged";
  return out;
}

std::vector<std::string> result_cells(const Outcome& o) {
  return {format_number(o.beta),
          format_number(o.se),
          format_number(o.result.statistic),
          std::to_string(o.result.df),
          format_number(o.result.p_value),
          format_number(neg_log10(o.result)),
          std::to_string(o.result.n_used)};
}

void open_output(const std::string& path, std::ofstream& file) {
  file.open(path, std::ios::binary);
  if (!file) throw ValidationError(path + ": cannot open for writing");
}

SimModel parse_sim_model(const std::string& s) {
  if (s == "main") return SimModel::kMainEffects;
  if (s == "binary-interaction") return SimModel::kBinaryInteraction;
  if (s == "continuous-interaction") return SimModel::kContinuousInteraction;
  throw ValidationError("--model must be main, binary-interaction or continuous-interaction, got '" + s + "'");
}

SimScenario scenario_of(const RunConfig& config) {
  SimScenario s = config.scenario;
  s.model = parse_sim_model(config.sim_model);
  s.seed = config.seed;
  s.validate();
  return s;
}

std::vector<std::string> default_arms() { return {"full", "random", "eps-only", "eps-only-binary", "eps-full"}; }

}  // namespace

SimArm parse_arm(const std::string& token, const RunConfig& config) {
  SimArm arm;
  arm.label = token;
  arm.test = parse_test_kind(config.test);
  const std::size_t colon = token.find(':');
  if (colon != std::string::npos) {
    arm.design.kind = parse_design_kind(token.substr(0, colon));
    arm.method = parse_method(token.substr(colon + 1));
  } else if (token == "eps-only-binary") {
    arm.design.kind = DesignKind::kEpsOnly;
    arm.method = AnalysisMethod::kEpsOnlyBinary;
  } else if (token == "full" || token == "random" || token == "eps-only" || token == "eps-full") {
    arm.design.kind = parse_design_kind(token);
    arm.method = parse_method(token);
  } else {
    arm.design.kind = parse_design_kind(token);
    arm.method = arm.design.kind == DesignKind::kEesOnly ? AnalysisMethod::kFull : AnalysisMethod::kEpsFull;
  }
  if (arm.design.kind == DesignKind::kCombined) {
    arm.design.n0 = config.n0;
    arm.design.n_e = config.n_e;
  }
  check_compatible(arm.design.kind, arm.method);
  return arm;
}

void validate_config(const RunConfig& config) {
  const bool analysis = config.subcommand == Subcommand::kFit || config.subcommand == Subcommand::kTest ||
                        config.subcommand == Subcommand::kGwas;
  if (config.workers < 1) throw ValidationError("--workers must be at least 1");
  parse_test_kind(config.test);
  if (!analysis) {
    scenario_of(config);
    if (config.replicates < 1) throw ValidationError("--replicates must be at least 1");
    for (const auto& a : config.arms) parse_arm(a.substr(0, a.find('@')), config);
    if (config.subcommand == Subcommand::kPower && config.n_grid.empty()) {
      throw ValidationError("power needs --n-grid");
    }
    return;
  }
  if (config.pheno_path.empty() || config.geno_path.empty()) throw ValidationError("--pheno and --geno are required");
  if (config.formula.empty()) throw ValidationError("--formula is required");
  parse_formula(config.formula);
  const AnalysisMethod method = parse_method(config.method);
  const bool counts = config.lower_count || config.upper_count;
  const bool cutoffs = config.c_lower || config.c_upper;
  if (needs_cutoffs(method)) {
    if (counts == cutoffs) {
      throw ValidationError("method '" + config.method +
                            "' needs either --lower-count/--upper-count or --c-lower/--c-upper");
    }
    if (counts && !(config.lower_count && config.upper_count)) {
      throw ValidationError("--lower-count and --upper-count go together");
    }
    if (cutoffs && !(config.c_lower && config.c_upper)) throw ValidationError("--c-lower and --c-upper go together");
    if (counts && (*config.lower_count < 0 || *config.upper_count < 0)) {
      throw ValidationError("extreme counts must be non-negative");
    }
    if (cutoffs && *config.c_lower > *config.c_upper) throw ValidationError("--c-lower exceeds --c-upper");
  } else if (counts || cutoffs) {
    throw ValidationError("method '" + config.method +
                          "' takes no cutoffs: eps-full reads the design from the missing genotypes, "
                          "full and random use every row");
  }
  if (config.impute_mean && (method == AnalysisMethod::kEpsFull || method == AnalysisMethod::kEpsOnlyBinary)) {
    throw ValidationError("--impute-mean applies to full, random and eps-only only");
  }
  if (config.hwe && method != AnalysisMethod::kEpsFull) throw ValidationError("--hwe applies to eps-full only");
  if (!config.strata.empty() && method != AnalysisMethod::kEpsFull) {
    throw ValidationError("--strata applies to eps-full only");
  }
  const TestKind test = parse_test_kind(config.test);
  if (test == TestKind::kLrt && method != AnalysisMethod::kEpsFull && method != AnalysisMethod::kEpsOnly) {
    throw ValidationError("method '" + config.method + "' supports the score test only");
  }
  if (config.subcommand == Subcommand::kFit && !config.test_terms.empty()) {
    throw ValidationError("--test-terms does not apply to fit");
  }
}

void run_fit(const RunConfig& config, std::ostream& out, std::ostream& log) {
  validate_config(config);
  const Study st = load_study(config, log);
  ModelSpec spec = build_model(st.formula, st.analysis, {});
  const Dataset& data = st.analysis;

  FitResult fit;
  switch (st.method) {
    case AnalysisMethod::kFull:
    case AnalysisMethod::kRandom: {
      const RegressionView view = build_design(data, spec, nullptr, st.policy);
      if (view.dropped_rows) log << "note: " << view.dropped_rows << " rows with missing genotypes dropped\n";
      fit = fit_linear(view, spec, data);
      break;
    }
    case AnalysisMethod::kEpsOnly: {
      const RegressionView view = build_design(data, spec, nullptr, st.policy);
      if (view.dropped_rows) log << "note: " << view.dropped_rows << " rows with missing genotypes dropped\n";
      fit = fit_eps_only(view, spec, data, st.c_lower, st.c_upper);
      break;
    }
    case AnalysisMethod::kEpsOnlyBinary: {
      const RegressionView view = build_design(data, spec, nullptr, MissingGenotypes::kDropRows);
      if (view.dropped_rows) log << "note: " << view.dropped_rows << " rows with missing genotypes dropped\n";
      const LogisticFit lf = fit_logistic(dichotomize(view.y, st.c_lower, st.c_upper), view.design,
                                          spec.coefficient_names(data));
      fit.names = spec.coefficient_names(data);
      fit.values = lf.coef;
      fit.observed_information = lf.observed_information;
      fit.loglik = lf.loglik;
      fit.converged = lf.converged;
      fit.iterations = lf.iterations;
      attach_wald_intervals(fit);
      break;
    }
    case AnalysisMethod::kEpsFull: {
      EpsFullOptions opts;
      opts.hwe = config.hwe;
      fit = fit_eps_full(data, nullptr, spec, opts);
      break;
    }
  }

  write_row(out, {"name", "estimate", "se", "ci_low", "ci_high"});
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    const auto& ci = fit.ci[k];
    write_row(out, {fit.names[k], format_number(fit.values[static_cast<Index>(k)]),
                    format_number(fit.standard_errors[static_cast<Index>(k)]), format_number(ci ? ci->lower : kNaN),
                    format_number(ci ? ci->upper : kNaN)});
  }
  out << "# method\t" << config.method << '\n';
  out << "# loglik\t" << format_number(fit.loglik) << '\n';
  out << "# converged\t" << (fit.converged ? "true" : "false") << '\n';
  out << "# iterations\t" << fit.iterations << '\n';
  if (!fit.diagnostic.empty()) out << "# diagnostic\t" << sanitize(fit.diagnostic) << '\n';
  if (!fit.converged) log << "warning: the fit did not converge\n";
}

void run_test(const RunConfig& config, std::ostream& out, std::ostream& log) {
  validate_config(config);
  const Study st = load_study(config, log);
  const ModelSpec spec = build_model(st.formula, st.analysis, config.test_terms);
  const Outcome o = analyze(st, spec, config, nullptr);
  if (o.dropped) log << "note: " << o.dropped << " rows with missing genotypes dropped\n";
  if (!o.result.note.empty()) log << "note: " << o.result.note << '\n';
  const std::vector<std::string> names = spec.coefficient_names(st.analysis);
  std::vector<std::string> tested;
  for (Index k : spec.tested) tested.push_back(names[k]);

  write_row(out, {"terms", "beta_hat", "se", "statistic", "df", "p_value", "neg_log10_p", "n_used", "method", "test",
                  "status"});
  std::vector<std::string> row{join(tested, ',')};
  const auto cells = result_cells(o);
  row.insert(row.end(), cells.begin(), cells.end());
  row.insert(row.end(), {config.method, o.test, o.status});
  write_row(out, row);
}

void run_gwas(const RunConfig& config, std::ostream& out, std::ostream& log) {
  validate_config(config);
  const Study st = load_study(config, log);
  const Dataset& data = st.analysis;
  const Index m = data.geno.cols();
  write_row(out, {"snp_id", "position", "beta_hat", "se", "statistic", "df", "p_value", "neg_log10_p", "n_used",
                  "method", "test", "status"});
  if (m == 0) return;

  // SNPs fixed in the formula are covariates, not scan targets.
  std::vector<bool> fixed(static_cast<std::size_t>(m), false);
  for (const auto& name : st.formula.snps) fixed[static_cast<std::size_t>(data.snp_index(name))] = true;
  for (const auto& [e, g] : st.formula.interactions) {
    if (!g.empty()) fixed[static_cast<std::size_t>(data.snp_index(g))] = true;
  }
  Index first = 0;
  while (first < m && fixed[static_cast<std::size_t>(first)]) ++first;

  // Term errors surface before any computation; the null is shared when the
  // nuisance columns do not involve the scanned SNP.
  SharedNull shared;
  if (first < m) shared = fit_shared_null(st, build_model(st.formula, data, config.test_terms, first));

  std::vector<Outcome> outcomes;
  for (Index begin = 0; begin < m; begin += static_cast<Index>(kGwasBlock)) {
    const Index count = std::min<Index>(static_cast<Index>(kGwasBlock), m - begin);
    outcomes.assign(static_cast<std::size_t>(count), Outcome{});
    parallel_for(static_cast<std::size_t>(count), config.workers, [&](std::size_t i) {
      const Index snp = begin + static_cast<Index>(i);
      Outcome& o = outcomes[i];
      try {
        if (fixed[static_cast<std::size_t>(snp)]) throw ValidationError("SNP is a covariate in the formula");
        o = analyze(st, build_model(st.formula, data, config.test_terms, snp), config, &shared);
      } catch (const std::exception& e) {
        o = Outcome{};
        o.status = "error: " + sanitize(e.what());
      }
    });
    for (Index i = 0; i < count; ++i) {
      const Outcome& o = outcomes[static_cast<std::size_t>(i)];
      const Index snp = begin + i;
      if (o.dropped) {
        log << "note: SNP " << data.snp_names[snp] << ": " << o.dropped << " rows with missing genotypes dropped\n";
      }
      std::vector<std::string> row{data.snp_names[snp], std::to_string(st.loaded.positions[snp])};
      if (o.status.starts_with("error")) {
        row.insert(row.end(), {"NA", "NA", "NA", "NA", "NA", "NA", "NA", config.method, "NA"});
      } else {
        const auto cells = result_cells(o);
        row.insert(row.end(), cells.begin(), cells.end());
        row.insert(row.end(), {config.method, o.test});
      }
      row.push_back(o.status);
      write_row(out, row);
    }
  }
}

void run_simulate(const RunConfig& config, std::ostream& out, std::ostream& log) {
  validate_config(config);
  const SimScenario scenario = scenario_of(config);

  if (!config.dataset_out.empty()) {
    std::mt19937_64 rng(replicate_seed(scenario.seed, 0, 0));
    Dataset data = simulate_dataset(scenario, rng);
    const Index N = data.size();
    if (config.genotyped > 0) {
      std::mt19937_64 design_rng(replicate_seed(scenario.seed, 0, 1));
      const AppliedDesign applied = apply_design(data, {DesignKind::kEpsFull, config.genotyped}, design_rng);
      data.geno = applied.data.geno;
    }
    if (config.extra_snps > 0) {
      // Null SNPs with allele frequencies spread over [0.05, 0.5], missing
      // wherever the headline SNP is.
      std::mt19937_64 snp_rng(replicate_seed(scenario.seed, 0, 2));
      std::uniform_real_distribution<double> maf(0.05, 0.5);
      GenotypeMatrix geno(N, 1 + config.extra_snps);
      for (Index i = 0; i < N; ++i) geno.set(i, 0, data.geno.at(i, 0));
      for (Index c = 1; c <= config.extra_snps; ++c) {
        std::binomial_distribution<int> draw(2, maf(snp_rng));
        for (Index i = 0; i < N; ++i) {
          const int g = draw(snp_rng);
          if (!data.geno.is_missing(i, 0)) geno.set(i, c, g);
        }
        data.snp_names.push_back("snp" + std::to_string(c));
      }
      data.geno = std::move(geno);
    }
    std::vector<std::string> ids;
    for (Index i = 0; i < N; ++i) ids.push_back("i" + std::to_string(i + 1));
    std::vector<std::int64_t> positions;
    for (Index c = 0; c < data.geno.cols(); ++c) positions.push_back(1000 * (c + 1));
    std::ofstream pheno, geno;
    open_output(config.dataset_out + ".pheno.tsv", pheno);
    open_output(config.dataset_out + ".geno.tsv", geno);
    write_pheno(pheno, data, ids);
    write_geno(geno, data, ids, positions);
    log << "wrote " << config.dataset_out << ".pheno.tsv and " << config.dataset_out << ".geno.tsv\n";
    return;
  }

  std::vector<SimArm> arms;
  for (const auto& token : config.arms.empty() ? default_arms() : config.arms) arms.push_back(parse_arm(token, config));
  SimOptions options;
  options.workers = config.workers;
  options.collect_estimates = config.mse;
  options.tested = config.sim_tested;
  const std::vector<SimResult> results = run_arms(scenario, arms, config.replicates, options);
  write_row(out, {"label", "design", "method", "replicates", "failures", "rejections", "power", "mc_se", "mse",
                  "mean_estimate", "seed"});
  for (const SimResult& r : results) {
    write_row(out, {r.label, r.design, r.method, std::to_string(r.replicates), std::to_string(r.failures),
                    std::to_string(r.rejections), format_number(r.power), format_number(r.mc_se), format_number(r.mse),
                    format_number(r.mean_estimate), std::to_string(r.seed)});
  }
}

void run_power(const RunConfig& config, std::ostream& out, std::ostream&) {
  validate_config(config);
  const SimScenario scenario = scenario_of(config);
  std::vector<CurveArm> arms;
  const std::vector<std::string> tokens =
      config.arms.empty() ? std::vector<std::string>{"eps-full", "combined@0.5", "rs-complete"} : config.arms;
  for (const auto& token : tokens) {
    const std::size_t at = token.find('@');
    const SimArm arm = parse_arm(token.substr(0, at), config);
    CurveArm c{token, arm.design, arm.method, 1.0};
    if (at != std::string::npos) {
      if (arm.design.kind != DesignKind::kCombined) throw ValidationError("'@fraction' applies to combined arms only");
      try {
        c.extreme_fraction = std::stod(token.substr(at + 1));
      } catch (const std::exception&) {
        throw ValidationError("bad extreme fraction in arm '" + token + "'");
      }
      if (!(c.extreme_fraction >= 0.0 && c.extreme_fraction <= 1.0)) {
        throw ValidationError("extreme fraction in arm '" + token + "' must lie in [0, 1]");
      }
    }
    arms.push_back(c);
  }
  SimOptions options;
  options.workers = config.workers;
  options.tested = config.sim_tested;
  const std::vector<CurvePoint> table = power_curve(scenario, arms, config.n_grid, config.replicates, options);
  write_row(out, {"n", "label", "design", "method", "power", "mc_se", "failures"});
  for (const CurvePoint& p : table) {
    write_row(out, {std::to_string(p.n), p.label, p.design, p.method, format_number(p.power), format_number(p.mc_se),
                    std::to_string(p.failures)});
  }
}

}  // namespace epsassoc::cli
