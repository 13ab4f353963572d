#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "epsassoc/cli.hpp"
#include "epsassoc/errors.hpp"
#include "epsassoc/parallel.hpp"

using epsassoc::cli::RunConfig;
using epsassoc::cli::Subcommand;

namespace {

void add_common(CLI::App* app, RunConfig& cfg) {
  app->add_option("--workers", cfg.workers, "Worker threads (default: EPS_ASSOC_WORKERS or all cores)");
  app->add_option("--seed", cfg.seed, "Random seed");
  app->add_option("--test", cfg.test, "Test: auto, score or lrt");
}

void add_analysis(CLI::App* app, RunConfig& cfg, bool with_terms) {
  app->add_option("--pheno", cfg.pheno_path, "Phenotype/covariate TSV")->required();
  app->add_option("--geno", cfg.geno_path, "SNP-major genotype TSV")->required();
  app->add_option("--method", cfg.method, "full, random, eps-only, eps-only-binary or eps-full");
  app->add_option("--formula", cfg.formula, "Model, e.g. 'y ~ e:sex,age + g:SNP1 + eg:sex*SNP1'")->required();
  if (with_terms) app->add_option("--test-terms", cfg.test_terms, "Coefficients to test")->delimiter(',');
  app->add_option("--strata", cfg.strata, "Phenotype column holding the genotype strata (eps-full)");
  app->add_option("--lower-count", cfg.lower_count, "Number of lowest trait values kept");
  app->add_option("--upper-count", cfg.upper_count, "Number of highest trait values kept");
  app->add_option("--c-lower", cfg.c_lower, "Lower trait cutoff");
  app->add_option("--c-upper", cfg.c_upper, "Upper trait cutoff");
  app->add_flag("--hwe", cfg.hwe, "Genotype law under Hardy-Weinberg equilibrium (eps-full)");
  app->add_flag("--impute-mean", cfg.impute_mean, "Mean-impute missing genotypes (full, random, eps-only)");
  add_common(app, cfg);
}

void add_scenario(CLI::App* app, RunConfig& cfg) {
  auto& s = cfg.scenario;
  app->add_option("--model", cfg.sim_model, "main, binary-interaction or continuous-interaction");
  app->add_option("--cohort-size", s.N, "Cohort size N");
  app->add_option("--sample-size", s.n, "Genotyped count n");
  app->add_option("--alpha", s.alpha);
  app->add_option("--beta-e1", s.beta_e1);
  app->add_option("--beta-e2", s.beta_e2);
  app->add_option("--beta-g", s.beta_g);
  app->add_option("--beta-e1g", s.beta_e1g);
  app->add_option("--beta-e2g", s.beta_e2g);
  app->add_option("--sigma", s.sigma);
  app->add_option("--maf", s.q, "Minor allele frequency");
  app->add_option("--replicates", cfg.replicates, "Monte Carlo replicates");
  app->add_option("--arms", cfg.arms, "Arms as method, design or design:method")->delimiter(',');
  app->add_option("--tested", cfg.sim_tested, "Tested coefficient names (default: headline term)")->delimiter(',');
  app->add_option("--n0", cfg.n0, "Combined design: random part");
  app->add_option("--ne", cfg.n_e, "Combined design: extreme part");
  add_common(app, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Association tests under extreme phenotype sampling"};
  app.require_subcommand(1);
  RunConfig cfg;
  cfg.workers = epsassoc::default_worker_count();
  std::string out_path;

  auto* fit = app.add_subcommand("fit", "Fit one model and report estimates with Wald intervals");
  add_analysis(fit, cfg, false);
  auto* test = app.add_subcommand("test", "Test the genotype terms of one model");
  add_analysis(test, cfg, true);
  auto* gwas = app.add_subcommand("gwas", "Test every SNP in the genotype file");
  add_analysis(gwas, cfg, true);
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo power and MSE, or write one simulated dataset");
  add_scenario(simulate, cfg);
  simulate->add_flag("--mse", cfg.mse, "Also estimate the headline coefficient and report its MSE");
  simulate->add_option("--dataset-out", cfg.dataset_out, "Write PREFIX.pheno.tsv and PREFIX.geno.tsv instead");
  simulate->add_option("--extra-snps", cfg.extra_snps, "Null SNPs appended to the dataset");
  simulate->add_option("--genotyped", cfg.genotyped, "Keep genotypes of this many trait extremes only");
  auto* power = app.add_subcommand("power", "Power against genotyped sample size");
  add_scenario(power, cfg);
  power->add_option("--n-grid", cfg.n_grid, "Genotyped sample sizes")->delimiter(',')->required();
  for (auto* sub : {fit, test, gwas, simulate, power}) sub->add_option("--out", out_path, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (fit->parsed()) cfg.subcommand = Subcommand::kFit;
  if (test->parsed()) cfg.subcommand = Subcommand::kTest;
  if (gwas->parsed()) cfg.subcommand = Subcommand::kGwas;
  if (simulate->parsed()) cfg.subcommand = Subcommand::kSimulate;
  if (power->parsed()) cfg.subcommand = Subcommand::kPower;

  try {
    epsassoc::cli::validate_config(cfg);
    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw epsassoc::ValidationError(out_path + ": cannot open for writing");
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    switch (cfg.subcommand) {
      case Subcommand::kFit: epsassoc::cli::run_fit(cfg, out, std::cerr); break;
      case Subcommand::kTest: epsassoc::cli::run_test(cfg, out, std::cerr); break;
      case Subcommand::kGwas: epsassoc::cli::run_gwas(cfg, out, std::cerr); break;
      case Subcommand::kSimulate: epsassoc::cli::run_simulate(cfg, out, std::cerr); break;
      case Subcommand::kPower: epsassoc::cli::run_power(cfg, out, std::cerr); break;
    }
    out.flush();
    if (!out) throw epsassoc::ComputationError("failed writing the output");
  } catch (const epsassoc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
