#include <doctest.h>

#include <random>

#include "epsassoc/errors.hpp"
#include "epsassoc/model.hpp"

using namespace epsassoc;

namespace {

Dataset toy_dataset() {
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  Eigen::MatrixXd env(4, 2);
  env << 1, 0.5, 0, 1.5, 1, 2.5, 0, 3.5;
  GenotypeMatrix geno(4, 2);
  geno.set(0, 0, 0);
  geno.set(1, 0, 1);
  geno.set(2, 0, 2);
  geno.set(3, 0, 1);
  geno.set(0, 1, 2);
  geno.set(2, 1, 1);
  geno.set(3, 1, 0);
  return make_dataset(y, env, geno);
}

}  // namespace

TEST_CASE("genotype matrix keeps missingness as its own state") {
  GenotypeMatrix g(2, 1);
  CHECK(g.is_missing(0, 0));
  g.set(0, 0, 2);
  CHECK(g.at(0, 0) == 2);
  CHECK_FALSE(g.at(1, 0).has_value());
  CHECK(g.missing_count(0) == 1);
  CHECK_THROWS_AS(g.set(1, 0, 3), ValidationError);
  g.set(0, 0, std::nullopt);
  CHECK(g.is_missing(0, 0));
}

TEST_CASE("dataset validation") {
  Dataset d = toy_dataset();
  CHECK_NOTHROW(d.validate());
  d.y[1] = std::nan("");
  CHECK_THROWS_AS(d.validate(), ValidationError);
  Dataset e = toy_dataset();
  e.strata.resize(3);
  CHECK_THROWS_AS(e.validate(), ValidationError);
}

TEST_CASE("select_extremes on a small vector") {
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 5, 6;
  const ExtremeDesign d = select_extremes(y, 1, 1);
  CHECK(d.extremes == std::vector<Index>{0, 5});
  CHECK(d.c_lower > 1.0);
  CHECK(d.c_lower < 2.0);
  CHECK(d.c_upper > 5.0);
  CHECK(d.c_upper < 6.0);
  CHECK_THROWS_AS(select_extremes(y, 4, 3), ValidationError);
}

TEST_CASE("select_extremes sizes and tie policy") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd y(5000);
  for (auto& v : y) v = gauss(rng);
  CHECK(select_extremes(y, 1250, 1250).size() == 2500);

  Eigen::VectorXd tied(6);
  tied << 1, 1, 1, 5, 5, 5;
  const ExtremeDesign a = select_extremes(tied, 2, 2);
  const ExtremeDesign b = select_extremes(tied, 2, 2);
  CHECK(a.extremes == std::vector<Index>{0, 1, 3, 4});
  CHECK(a.extremes == b.extremes);
}

TEST_CASE("cutoff designs and round trip") {
  Eigen::VectorXd y(3);
  y << -3, 0, 3;
  CHECK(select_extremes_by_cutoffs(y, -1, 1).extremes == std::vector<Index>{0, 2});
  CHECK(select_extremes_by_cutoffs(y, -1e300, 1e300).extremes.empty());

  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd z(4001);
  for (auto& v : z) v = gauss(rng);
  for (auto [lo, hi] : {std::pair<Index, Index>{1000, 1000}, {0, 300}, {500, 0}, {2000, 2001}, {7, 13}}) {
    const ExtremeDesign d = select_extremes(z, lo, hi);
    const ExtremeDesign again = select_extremes_by_cutoffs(z, d.c_lower, d.c_upper);
    CHECK(again.extremes == d.extremes);
    // Each row falls on exactly one side.
    Index inside = 0;
    for (Index i = 0; i < z.size(); ++i) inside += d.contains(i) ? 0 : 1;
    CHECK(inside + static_cast<Index>(d.size()) == z.size());
  }

  // Quartile cutoffs keep about half the sample.
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end());
  const auto d = select_extremes_by_cutoffs(z, sorted[1000], sorted[3000]);
  CHECK(std::abs(static_cast<double>(d.size()) - 2000.0) <= 2.0);
}

TEST_CASE("build_design splits tested and nuisance columns") {
  const Dataset data = toy_dataset();
  ModelSpec spec;
  spec.env_columns = {0, 1};
  spec.snp_columns = {0};
  spec.tested = {3};
  const RegressionView v = build_design(data, spec, nullptr);
  CHECK(v.tested_columns().cols() == 1);
  CHECK(v.nuisance_columns().cols() == 3);
  CHECK(v.design(2, 3) == 2.0);

  SUBCASE("interaction columns are products of their parents") {
    ModelSpec inter = spec;
    inter.interactions.push_back({1, 0});
    inter.tested = {4};
    const RegressionView w = build_design(data, inter, nullptr);
    for (Index i = 0; i < w.size(); ++i) CHECK(w.design(i, 4) == w.design(i, 2) * w.design(i, 3));
    CHECK(inter.coefficient_names(data)[4] == "e2*g1");
  }
  SUBCASE("interactions must reference declared columns") {
    ModelSpec bad = spec;
    bad.interactions.push_back({1, 1});
    CHECK_THROWS_AS(build_design(data, bad, nullptr), ValidationError);
  }
  SUBCASE("extreme subset") {
    ExtremeDesign d{1.5, 3.5, {0, 3}};
    CHECK(build_design(data, spec, &d).size() == 2);
  }
}

TEST_CASE("missing genotype policies") {
  const Dataset data = toy_dataset();
  ModelSpec spec;
  spec.snp_columns = {1};
  spec.tested = {1};
  CHECK_THROWS_AS(build_design(data, spec, nullptr), ValidationError);
  const RegressionView dropped = build_design(data, spec, nullptr, MissingGenotypes::kDropRows);
  CHECK(dropped.size() == 3);
  CHECK(dropped.dropped_rows == 1);
  const RegressionView imputed = build_design(data, spec, nullptr, MissingGenotypes::kImputeMean);
  CHECK(imputed.size() == 4);
  CHECK(imputed.design(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("Wald intervals follow the inverse information") {
  FitResult fit;
  fit.values = Eigen::Vector2d(1.0, 2.0);
  fit.observed_information = Eigen::Matrix2d{{4.0, 1.0}, {1.0, 2.0}};
  attach_wald_intervals(fit);
  const Eigen::Matrix2d cov = fit.observed_information.inverse();
  for (int k = 0; k < 2; ++k) {
    const double half = 1.959963984540054 * std::sqrt(cov(k, k));
    CHECK(fit.ci[k]->lower == doctest::Approx(fit.values[k] - half).epsilon(1e-12));
    CHECK(fit.ci[k]->upper == doctest::Approx(fit.values[k] + half).epsilon(1e-12));
    CHECK(fit.ci[k]->lower <= fit.values[k]);
  }
  FitResult singular;
  singular.values = Eigen::Vector2d(1.0, 2.0);
  singular.observed_information = Eigen::Matrix2d{{1.0, 1.0}, {1.0, 1.0}};
  attach_wald_intervals(singular);
  CHECK_FALSE(singular.ci[0].has_value());
  CHECK(singular.diagnostic.find("singular") != std::string::npos);
}
