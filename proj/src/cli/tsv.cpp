#include <charconv>
#include <cmath>

#include "epsassoc/cli.hpp"

namespace epsassoc::cli {

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out << '\t';
    out << cells[k];
  }
  out << '\n';
}

void write_pheno(std::ostream& out, const Dataset& data, const std::vector<std::string>& ids) {
  std::vector<std::string> header{"id", "y"};
  header.insert(header.end(), data.env_names.begin(), data.env_names.end());
  if (data.stratum_count() > 1) header.push_back("stratum");
  write_row(out, header);
  for (Index i = 0; i < data.size(); ++i) {
    std::vector<std::string> row{ids[i], format_number(data.y[i])};
    for (Index c = 0; c < data.env.cols(); ++c) row.push_back(format_number(data.env(i, c)));
    if (data.stratum_count() > 1) row.push_back(std::to_string(data.strata[i]));
    write_row(out, row);
  }
}

void write_geno(std::ostream& out, const Dataset& data, const std::vector<std::string>& ids,
                const std::vector<std::int64_t>& positions) {
  std::string line = "snp_id\tposition";
  for (const auto& id : ids) line += '\t' + id;
  out << line << '\n';
  for (Index c = 0; c < data.geno.cols(); ++c) {
    line = data.snp_names[c] + '\t' + std::to_string(positions[c]);
    for (Index i = 0; i < data.size(); ++i) {
      line += '\t';
      if (auto g = data.geno.at(i, c)) {
        line += static_cast<char>('0' + *g);
      } else {
        line += "NA";
      }
    }
    out << line << '\n';
  }
}

}  // namespace epsassoc::cli
