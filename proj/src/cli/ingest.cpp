#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "epsassoc/cli.hpp"
#include "epsassoc/errors.hpp"

namespace epsassoc::cli {

namespace {

// Splits on tabs without copying; the views live as long as `line`.
void split_tabs(std::string_view line, std::vector<std::string_view>& cells) {
  cells.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool next_line(std::istream& in, std::string& line, std::size_t& number) {
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

[[noreturn]] void fail(const std::string& path, std::size_t line, std::size_t column, const std::string& what) {
  std::ostringstream msg;
  msg << path << ": line " << line;
  if (column > 0) msg << ", column " << column;
  msg << ": " << what;
  throw ValidationError(msg.str());
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  return in;
}

}  // namespace

LoadedData ingest(const std::string& pheno_path, const std::string& geno_path, const std::string& response,
                  const std::vector<std::string>& env_columns, const std::string& strata_column) {
  LoadedData out;
  std::vector<std::string_view> cells;
  std::string line;

  // Phenotypes.
  std::ifstream pin = open(pheno_path);
  std::size_t lineno = 0;
  if (!next_line(pin, line, lineno)) fail(pheno_path, 1, 0, "missing header row");
  split_tabs(line, cells);
  const std::vector<std::string> header(cells.begin(), cells.end());
  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin() + 1, header.end(), name);
    if (it == header.end()) fail(pheno_path, lineno, 0, "no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column_of(response);
  std::vector<std::size_t> env_cols;
  for (const auto& e : env_columns) env_cols.push_back(column_of(e));
  const std::size_t strata_col = strata_column.empty() ? 0 : column_of(strata_column);

  std::vector<double> y;
  std::vector<std::vector<double>> env(env_cols.size());
  std::vector<std::string> stratum_labels;
  std::set<std::string> seen;
  auto number = [&](std::string_view cell, std::size_t col) {
    double value = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell == "NA") fail(pheno_path, lineno, col + 1, "missing value in column '" + header[col] + "'");
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(value)) {
      fail(pheno_path, lineno, col + 1, "'" + std::string(cell) + "' is not a number");
    }
    return value;
  };
  while (next_line(pin, line, lineno)) {
    split_tabs(line, cells);
    if (cells.size() != header.size()) {
      fail(pheno_path, lineno, 0,
           "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    const std::string id(cells[0]);
    if (id.empty()) fail(pheno_path, lineno, 1, "empty individual ID");
    if (!seen.insert(id).second) fail(pheno_path, lineno, 1, "duplicate individual ID '" + id + "'");
    out.ids.push_back(id);
    y.push_back(number(cells[y_col], y_col));
    for (std::size_t k = 0; k < env_cols.size(); ++k) env[k].push_back(number(cells[env_cols[k]], env_cols[k]));
    if (strata_col) {
      if (cells[strata_col] == "NA" || cells[strata_col].empty()) {
        fail(pheno_path, lineno, strata_col + 1, "missing stratum label");
      }
      stratum_labels.emplace_back(cells[strata_col]);
    }
  }
  const Index N = static_cast<Index>(y.size());
  if (N == 0) fail(pheno_path, lineno, 0, "no individuals");

  Dataset& data = out.data;
  data.y = Eigen::Map<Eigen::VectorXd>(y.data(), N);
  data.env.resize(N, static_cast<Index>(env_cols.size()));
  for (std::size_t k = 0; k < env_cols.size(); ++k) {
    data.env.col(static_cast<Index>(k)) = Eigen::Map<Eigen::VectorXd>(env[k].data(), N);
  }
  data.env_names = env_columns;
  data.strata = Eigen::VectorXi::Zero(N);
  if (strata_col) {
    // Codes follow the sorted labels so they do not depend on row order.
    std::map<std::string, int> codes;
    for (const auto& s : stratum_labels) codes.emplace(s, 0);
    int next = 0;
    for (auto& [label, code] : codes) code = next++;
    for (Index i = 0; i < N; ++i) data.strata[i] = codes.at(stratum_labels[i]);
  }

  // Genotypes: parse straight into compact codes, one SNP per line.
  std::ifstream gin = open(geno_path);
  lineno = 0;
  if (!next_line(gin, line, lineno)) fail(geno_path, 1, 0, "missing header row");
  split_tabs(line, cells);
  if (cells.size() != static_cast<std::size_t>(N) + 2) {
    fail(geno_path, lineno, 0,
         "header names " + std::to_string(cells.size() < 2 ? 0 : cells.size() - 2) + " individuals, the phenotype file has " +
             std::to_string(N));
  }
  for (Index i = 0; i < N; ++i) {
    if (cells[i + 2] != out.ids[i]) {
      fail(geno_path, lineno, static_cast<std::size_t>(i) + 3,
           "individual '" + std::string(cells[i + 2]) + "' does not match phenotype ID '" + out.ids[i] +
               "' at the same position");
    }
  }
  std::vector<std::vector<std::int8_t>> codes;
  std::unordered_map<std::string, std::size_t> snp_seen;
  while (next_line(gin, line, lineno)) {
    split_tabs(line, cells);
    if (cells.size() != static_cast<std::size_t>(N) + 2) {
      fail(geno_path, lineno, 0,
           "expected " + std::to_string(N + 2) + " cells, found " + std::to_string(cells.size()));
    }
    const std::string id(cells[0]);
    if (id.empty()) fail(geno_path, lineno, 1, "empty SNP ID");
    if (!snp_seen.emplace(id, lineno).second) fail(geno_path, lineno, 1, "duplicate SNP ID '" + id + "'");
    std::int64_t pos = 0;
    const auto res = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), pos);
    if (res.ec != std::errc() || res.ptr != cells[1].data() + cells[1].size()) {
      fail(geno_path, lineno, 2, "position '" + std::string(cells[1]) + "' is not an integer");
    }
    std::vector<std::int8_t> row(N);
    for (Index i = 0; i < N; ++i) {
      const std::string_view c = cells[i + 2];
      if (c.size() == 1 && c[0] >= '0' && c[0] <= '2') {
        row[i] = static_cast<std::int8_t>(c[0] - '0');
      } else if (c == "NA") {
        row[i] = -1;
      } else {
        fail(geno_path, lineno, static_cast<std::size_t>(i) + 3,
             "genotype '" + std::string(c) + "' for individual '" + out.ids[i] + "' is not one of 0, 1, 2, NA");
      }
    }
    out.data.snp_names.push_back(id);
    out.positions.push_back(pos);
    codes.push_back(std::move(row));
  }

  data.geno = GenotypeMatrix(N, static_cast<Index>(codes.size()));
  for (std::size_t c = 0; c < codes.size(); ++c) {
    for (Index i = 0; i < N; ++i) {
      if (codes[c][i] >= 0) data.geno.set(i, static_cast<Index>(c), codes[c][i]);
    }
  }
  data.validate();
  return out;
}

}  // namespace epsassoc::cli
