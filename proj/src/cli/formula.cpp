#include <algorithm>
#include <cctype>

#include "epsassoc/cli.hpp"
#include "epsassoc/errors.hpp"

namespace epsassoc::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

[[noreturn]] void bad(std::string_view text, const std::string& why) {
  throw ValidationError("formula '" + std::string(text) + "': " + why);
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace

std::vector<std::string> Formula::env_columns() const {
  std::vector<std::string> out;
  for (const auto& e : env) push_unique(out, e);
  for (const auto& [e, g] : interactions) push_unique(out, e);
  return out;
}

Formula parse_formula(std::string_view text) {
  const std::size_t tilde = text.find('~');
  if (tilde == std::string_view::npos) bad(text, "expected 'response ~ terms'");
  Formula f;
  f.response = trim(text.substr(0, tilde));
  if (f.response.empty()) bad(text, "missing response");
  const std::string rhs = trim(text.substr(tilde + 1));
  if (rhs.empty()) return f;
  for (const std::string& term : split(rhs, '+')) {
    if (term.empty()) bad(text, "empty term");
    if (term == "g") continue;  // the SNP under test, implicit in gwas runs
    const std::size_t colon = term.find(':');
    if (colon == std::string::npos) bad(text, "term '" + term + "' needs a prefix e:, g: or eg:");
    const std::string kind = trim(std::string_view(term).substr(0, colon));
    for (const std::string& name : split(std::string_view(term).substr(colon + 1), ',')) {
      if (name.empty()) bad(text, "empty name in term '" + term + "'");
      if (kind == "e") {
        push_unique(f.env, name);
      } else if (kind == "g") {
        push_unique(f.snps, name);
      } else if (kind == "eg") {
        const auto parts = split(name, '*');
        if (parts.size() > 2 || parts[0].empty() || (parts.size() == 2 && parts[1].empty())) {
          bad(text, "interaction '" + name + "' should read env*snp");
        }
        std::pair<std::string, std::string> it{parts[0], parts.size() == 2 ? parts[1] : std::string()};
        if (std::find(f.interactions.begin(), f.interactions.end(), it) == f.interactions.end()) {
          f.interactions.push_back(it);
        }
      } else {
        bad(text, "unknown term prefix '" + kind + "'");
      }
    }
  }
  return f;
}

ModelSpec build_model(const Formula& formula, const Dataset& data, const std::vector<std::string>& test_terms,
                      std::optional<Index> current_snp) {
  ModelSpec spec;
  for (const auto& e : formula.env) spec.env_columns.push_back(data.env_index(e));
  for (const auto& g : formula.snps) spec.snp_columns.push_back(data.snp_index(g));
  if (current_snp && std::find(spec.snp_columns.begin(), spec.snp_columns.end(), *current_snp) == spec.snp_columns.end()) {
    spec.snp_columns.push_back(*current_snp);
  }
  for (const auto& [e, g] : formula.interactions) {
    Index snp = 0;
    if (!g.empty()) {
      snp = data.snp_index(g);
    } else if (current_snp) {
      snp = *current_snp;
    } else {
      throw ValidationError("interaction '" + e + "' names no SNP; write eg:" + e + "*SNP outside gwas runs");
    }
    // Main effects of interaction partners are implied, as with '*' in R.
    const Index env = data.env_index(e);
    if (std::find(spec.env_columns.begin(), spec.env_columns.end(), env) == spec.env_columns.end()) {
      spec.env_columns.push_back(env);
    }
    if (std::find(spec.snp_columns.begin(), spec.snp_columns.end(), snp) == spec.snp_columns.end()) {
      spec.snp_columns.push_back(snp);
    }
    spec.interactions.push_back({env, snp});
  }

  const std::vector<std::string> names = spec.coefficient_names(data);
  if (test_terms.empty()) {
    // Every genotype term, or with a SNP under test only the terms involving it.
    for (Index k = spec.snp_offset(); k < spec.coefficient_count(); ++k) {
      const Index col = k < spec.interaction_offset() ? spec.snp_columns[k - spec.snp_offset()]
                                                      : spec.interactions[k - spec.interaction_offset()].snp_column;
      if (!current_snp || col == *current_snp) spec.tested.push_back(k);
    }
  } else {
    const std::string current = current_snp ? data.snp_names.at(*current_snp) : std::string();
    for (std::string term : test_terms) {
      if (current_snp) {
        if (term == "g") {
          term = current;
        } else if (term.size() > 2 && term.ends_with("*g")) {
          term = term.substr(0, term.size() - 1) + current;
        }
      }
      const auto it = std::find(names.begin(), names.end(), term);
      if (it == names.end() || it == names.begin()) {
        throw ValidationError("test term '" + term + "' is not a coefficient of the model");
      }
      const Index k = it - names.begin();
      if (!spec.is_tested(k)) spec.tested.push_back(k);
    }
    std::sort(spec.tested.begin(), spec.tested.end());
  }
  spec.validate(data, true);
  return spec;
}

}  // namespace epsassoc::cli
