#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epsassoc/model.hpp"
#include "epsassoc/sim.hpp"

namespace epsassoc::cli {

// "y ~ e:sex,age + g:SNP1 + eg:sex*SNP1". An interaction written without a
// SNP ("eg:sex") refers to the SNP under test in gwas runs.
struct Formula {
  std::string response;
  std::vector<std::string> env;
  std::vector<std::string> snps;
  std::vector<std::pair<std::string, std::string>> interactions;  // (env, snp or "")

  // Environmental names in first-use order, including interaction partners.
  std::vector<std::string> env_columns() const;
};

Formula parse_formula(std::string_view text);

// Resolves names against the dataset. `current_snp` fills the SNP slot of
// open interactions and adds a main effect for it; test terms may use "g" for
// that SNP. Empty test terms select every term involving a genotype.
ModelSpec build_model(const Formula& formula, const Dataset& data, const std::vector<std::string>& test_terms,
                      std::optional<Index> current_snp = std::nullopt);

struct LoadedData {
  Dataset data;
  std::vector<std::string> ids;
  std::vector<std::int64_t> positions;  // per SNP
};

// Phenotype table: tab separated, header row, individual ID first. Genotype
// table: one row per SNP (ID, position, one call per individual in phenotype
// order), header naming the individuals. Only the listed columns are parsed
// as numbers; the strata column may hold any labels.
LoadedData ingest(const std::string& pheno_path, const std::string& geno_path, const std::string& response,
                  const std::vector<std::string>& env_columns, const std::string& strata_column = {});

void write_pheno(std::ostream& out, const Dataset& data, const std::vector<std::string>& ids);
void write_geno(std::ostream& out, const Dataset& data, const std::vector<std::string>& ids,
                const std::vector<std::int64_t>& positions);

// Shortest round-trip decimal; "NA" for NaN.
std::string format_number(double value);
void write_row(std::ostream& out, const std::vector<std::string>& cells);

enum class Subcommand { kFit, kTest, kGwas, kSimulate, kPower };

struct RunConfig {
  Subcommand subcommand = Subcommand::kGwas;
  std::string pheno_path;
  std::string geno_path;
  std::string method = "full";
  std::string formula;
  std::vector<std::string> test_terms;
  std::string test = "auto";  // auto, score, lrt
  std::string strata;
  std::optional<Index> lower_count, upper_count;
  std::optional<double> c_lower, c_upper;
  bool hwe = false;
  bool impute_mean = false;
  int workers = 1;
  std::uint64_t seed = 20240101;

  // simulate / power
  SimScenario scenario;
  std::string sim_model = "main";
  Index replicates = 1000;
  std::vector<std::string> arms;
  std::vector<std::string> sim_tested;
  bool mse = false;
  Index n0 = 0, n_e = 0;
  std::vector<Index> n_grid;
  std::string dataset_out;
  Index extra_snps = 0;
  Index genotyped = 0;  // dataset-out: keep genotypes of this many extremes, 0 keeps all
};

// Checks flag combinations before any file is read. Throws ValidationError.
void validate_config(const RunConfig& config);

// Each writes its TSV result to `out` and progress notes to `log`.
void run_fit(const RunConfig& config, std::ostream& out, std::ostream& log);
void run_test(const RunConfig& config, std::ostream& out, std::ostream& log);
void run_gwas(const RunConfig& config, std::ostream& out, std::ostream& log);
void run_simulate(const RunConfig& config, std::ostream& out, std::ostream& log);
void run_power(const RunConfig& config, std::ostream& out, std::ostream& log);

// "eps-full", "ees-only:full", "combined:eps-full". A lone method name uses
// its natural design.
SimArm parse_arm(const std::string& token, const RunConfig& config);

}  // namespace epsassoc::cli
