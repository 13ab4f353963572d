#include <doctest.h>

#include <random>

#include "epsassoc/errors.hpp"
#include "epsassoc/eps_full.hpp"
#include "epsassoc/linear_model.hpp"
#include "oracles.hpp"

using namespace epsassoc;

namespace {

// N rows, one continuous env column, `snps` SNP columns, optional binary
// stratum. Genotypes outside the lower/upper quarter are masked.
struct Sample {
  Dataset data;
  ExtremeDesign design;
};

Sample make_sample(std::uint64_t seed, Index N, int snps = 1, bool strata = false, double beta_g = 0.4,
                   double beta_eg = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd y(N);
  Eigen::MatrixXd env(N, 1);
  GenotypeMatrix geno(N, snps);
  Eigen::VectorXi st = Eigen::VectorXi::Zero(N);
  for (Index i = 0; i < N; ++i) {
    st[i] = strata ? coin(rng) : 0;
    env(i, 0) = gauss(rng);
    double mu = 1.0 + 0.5 * env(i, 0) + 0.7 * st[i];
    for (int s = 0; s < snps; ++s) {
      std::binomial_distribution<int> draw(2, st[i] ? 0.45 : 0.3);
      const int g = draw(rng);
      geno.set(i, s, g);
      if (s == 0) mu += beta_g * g + beta_eg * env(i, 0) * g;
    }
    y[i] = mu + gauss(rng);
  }
  Sample out;
  out.data = make_dataset(y, env, geno);
  out.data.strata = st;
  out.design = select_extremes(y, N / 4, N / 4);
  for (Index i = 0; i < N; ++i) {
    if (!out.design.contains(i)) {
      for (int s = 0; s < snps; ++s) out.data.geno.set_missing(i, s);
    }
  }
  return out;
}

ModelSpec main_effect_spec() {
  ModelSpec spec;
  spec.env_columns = {0};
  spec.snp_columns = {0};
  spec.tested = {2};
  return spec;
}

std::vector<Eigen::MatrixXd> probability_tables(const std::vector<GenotypeDistribution>& dists) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& d : dists) out.push_back(d.p);
  return out;
}

}  // namespace

TEST_CASE("genotype distribution estimates") {
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0.0, 4.0);
  GenotypeMatrix g(5, 1);
  g.set(0, 0, 0);
  g.set(1, 0, 0);
  g.set(2, 0, 1);
  g.set(3, 0, 2);
  Dataset d = make_dataset(y, Eigen::MatrixXd::Zero(5, 0), g);
  const GenotypeDistribution dist = estimate_genotype_dist(d, 0);
  CHECK(dist.p(0, 0) == 0.5);
  CHECK(dist.p(0, 1) == 0.25);
  CHECK(dist.p(0, 2) == 0.25);
  CHECK(dist.totals[0] == 4);

  SUBCASE("strata are estimated independently") {
    d.strata << 0, 0, 1, 1, 1;
    const GenotypeDistribution two = estimate_genotype_dist(d, 0);
    CHECK(two.p.row(0) == Eigen::RowVector3d(1.0, 0.0, 0.0));
    CHECK(two.p.row(1) == Eigen::RowVector3d(0.0, 0.5, 0.5));
    CHECK(two.has_empty_cells());
  }
  SUBCASE("a stratum without genotypes is rejected") {
    d.strata << 0, 0, 0, 0, 1;
    CHECK_THROWS_AS(estimate_genotype_dist(d, 0), ValidationError);
  }
  SUBCASE("hardy-weinberg law") {
    const GenotypeDistribution hwe = GenotypeDistribution::from_hwe(Eigen::VectorXd::Constant(1, 0.3));
    CHECK(hwe.p(0, 0) == doctest::Approx(0.49).epsilon(1e-15));
    CHECK(hwe.p(0, 1) == doctest::Approx(0.42).epsilon(1e-15));
    CHECK(hwe.p(0, 2) == doctest::Approx(0.09).epsilon(1e-15));
    CHECK(std::abs(hwe.p.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("mixture log-likelihood equals brute-force enumeration") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int snps = 1 + rep % 2;
    Sample s = make_sample(300 + rep, 24, snps, rep % 3 == 0);
    ModelSpec spec;
    spec.env_columns = {0};
    spec.snp_columns = snps == 2 ? std::vector<Index>{0, 1} : std::vector<Index>{0};
    if (rep % 4 == 1) spec.interactions.push_back({0, 0});
    // Arbitrary genotype laws, not the estimated ones.
    std::vector<GenotypeDistribution> dists;
    for (int g = 0; g < snps; ++g) {
      GenotypeDistribution d = GenotypeDistribution::from_hwe(Eigen::VectorXd::Constant(s.data.stratum_count(), 0.3));
      for (int j = 0; j < d.strata(); ++j) {
        Eigen::RowVector3d row(unif(rng), unif(rng), unif(rng));
        d.p.row(j) = row / row.sum();
      }
      dists.push_back(d);
    }
    Eigen::VectorXd coef(spec.coefficient_count());
    for (auto& c : coef) c = gauss(rng);
    const double sigma = 0.8 + std::abs(gauss(rng));
    const double value =
        loglik_eps_full(ParameterVector::from_coefficients(coef, spec, sigma), s.data, &s.design, dists, spec);
    const double brute = oracle::brute_force_eps_full(s.data, spec, coef, sigma, probability_tables(dists));
    CHECK(std::abs(value - brute) <= 1e-12 * std::abs(brute));
  }
}

TEST_CASE("mixture log-likelihood reductions") {
  Sample s = make_sample(12, 60);
  const ModelSpec spec = main_effect_spec();
  const auto dists = std::vector<GenotypeDistribution>{estimate_genotype_dist(s.data, 0)};
  const Eigen::Vector3d coef(1.0, 0.5, 0.0);
  // With no genotype effect, missing rows reduce to the normal density.
  double expected = 0.0;
  for (Index i = 0; i < s.data.size(); ++i) {
    const double r = s.data.y[i] - coef[0] - coef[1] * s.data.env(i, 0);
    expected += std::log(oracle::phi(r / 1.3) / 1.3);
    if (auto g = s.data.geno.at(i, 0)) expected += std::log(dists[0].p(0, *g));
  }
  CHECK(loglik_eps_full(ParameterVector::from_coefficients(coef, spec, 1.3), s.data, &s.design, dists, spec) ==
        doctest::Approx(expected).epsilon(1e-12));

  Dataset broken = s.data;
  broken.geno.set_missing(s.design.extremes.front(), 0);
  CHECK_THROWS_AS(
      loglik_eps_full(ParameterVector::from_coefficients(coef, spec, 1.3), broken, &s.design, dists, spec),
      ValidationError);
  CHECK_THROWS_AS(
      loglik_eps_full(ParameterVector::from_coefficients(coef, spec, -1.0), s.data, &s.design, dists, spec),
      ValidationError);
}

TEST_CASE("likelihood gradient matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 12; ++rep) {
    Sample s = make_sample(800 + rep, 40, 1 + rep % 2, rep % 2 == 0);
    ModelSpec spec = main_effect_spec();
    if (rep % 3 == 0) spec.interactions.push_back({0, 0});
    if (rep % 2) spec.snp_columns = {0, 1};
    const bool hwe = rep % 4 == 3;
    std::vector<GenotypeDistribution> dists;
    for (Index c : spec.genotype_columns()) dists.push_back(estimate_genotype_dist(s.data, c, hwe));
    const EpsFullLikelihood lik(s.data, spec, dists, true);
    Eigen::VectorXd theta(lik.parameter_count());
    for (auto& t : theta) t = 0.3 * gauss(rng);
    Eigen::VectorXd grad;
    lik.value(theta, &grad);
    const auto f = [&](const Eigen::VectorXd& t) { return lik.value(t); };
    const Eigen::VectorXd fd = oracle::value_gradient(f, theta);
    CHECK((grad - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()) < 1e-6);
  }
}

TEST_CASE("complete data reduces to least squares and the linear score test") {
  Dataset full = make_sample(31, 200).data;
  std::mt19937_64 rng(31);
  // Refill the masked genotypes.
  std::binomial_distribution<int> draw(2, 0.3);
  for (Index i = 0; i < full.size(); ++i)
    if (full.geno.is_missing(i, 0)) full.geno.set(i, 0, draw(rng));
  const ModelSpec spec = main_effect_spec();
  const RegressionView view = build_design(full, spec, nullptr);

  const FitResult fit = fit_eps_full(full, nullptr, spec);
  const OlsFit ols = fit_ols(view.design, view.y);
  CHECK(fit.converged);
  CHECK((fit.values.head(3) - ols.coef).cwiseAbs().maxCoeff() < 1e-6);

  const TestResult t = score_test_eps_full(full, nullptr, spec);
  const double observed = oracle::linear_score_observed(view.nuisance_columns(), view.tested_columns(), view.y);
  CHECK(std::abs(t.statistic - observed) < 1e-8);
  // The expected-information form drops the sigma coupling: T_obs = T_exp / (1 - 2 T_exp / N).
  const double expected = oracle::linear_score(view.nuisance_columns(), view.tested_columns(), view.y);
  CHECK(std::abs(observed - expected / (1.0 - 2.0 * expected / full.size())) < 1e-8);
}

TEST_CASE("score statistic matches a numerical assembly over every nuisance parameter") {
  for (int rep = 0; rep < 10; ++rep) {
    Sample s = make_sample(1200 + rep, 40, 1, false, 0.8);
    const ModelSpec spec = main_effect_spec();
    const EpsFullNull null = fit_eps_full_null(s.data, spec);
    const TestResult closed = score_test_eps_full(null, s.data, spec);
    GenotypeDistribution base = estimate_genotype_dist(s.data, 0);

    // (beta_g, alpha, beta_e, sigma, p1, p2) with p0 = 1 - p1 - p2.
    Eigen::VectorXd theta(6);
    const Eigen::VectorXd nuisance_coef = fit_ols(null.nuisance, s.data.y).coef;
    theta << 0.0, nuisance_coef, null.sigma, base.p(0, 1), base.p(0, 2);
    const auto f = [&](const Eigen::VectorXd& t) {
      GenotypeDistribution d = base;
      d.p.row(0) << 1.0 - t[4] - t[5], t[4], t[5];
      const Eigen::Vector3d coef(t[1], t[2], t[0]);
      return loglik_eps_full(ParameterVector::from_coefficients(coef, spec, t[3]), s.data, &s.design, {d}, spec);
    };
    const Eigen::VectorXd grad = oracle::value_gradient(f, theta);
    const double numeric = oracle::assembled_score(grad, -oracle::value_hessian(f, theta), 1);
    CHECK(std::abs(closed.statistic - numeric) / std::max(1.0, numeric) < 1e-4);

    // The score itself against a derivative in beta_g alone.
    const EpsFullScoreWorkspace ws = score_workspace_eps_full(null, s.data, spec);
    CHECK(std::abs(ws.score[0] - grad[0]) / std::max(1.0, std::abs(grad[0])) < 1e-6);
  }
}

TEST_CASE("genotype correction equals the explicit multinomial block") {
  for (int rep = 0; rep < 20; ++rep) {
    Sample s = make_sample(2000 + rep, 300, 1, rep % 2 == 0);
    ModelSpec spec = main_effect_spec();
    const bool interaction = rep % 3 == 0;
    if (interaction) {
      spec.interactions.push_back({0, 0});
      spec.tested = {2, 3};
    }
    const EpsFullNull null = fit_eps_full_null(s.data, spec);
    const EpsFullScoreWorkspace ws = score_workspace_eps_full(null, s.data, spec);
    Eigen::MatrixXd A(s.data.size(), spec.tested.size());
    A.col(0).setOnes();
    if (interaction) A.col(1) = s.data.env.col(0);
    const Eigen::MatrixXd explicit_block = oracle::explicit_genotype_block(s.data, 0, A, null.residuals, null.sigma);
    CHECK((ws.genotype_correction - explicit_block).cwiseAbs().maxCoeff() <=
          1e-8 * std::max(1.0, explicit_block.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("inverse multinomial information is the multinomial covariance") {
  const Eigen::Vector3d n(37, 18, 5);
  const double N = n.sum();
  const Eigen::Vector3d p = n / N;
  Eigen::Matrix2d info;
  info << n[1] / (p[1] * p[1]) + n[0] / (p[0] * p[0]), n[0] / (p[0] * p[0]), n[0] / (p[0] * p[0]),
      n[2] / (p[2] * p[2]) + n[0] / (p[0] * p[0]);
  Eigen::Matrix2d cov;
  cov << p[1] * (1 - p[1]), -p[1] * p[2], -p[1] * p[2], p[2] * (1 - p[2]);
  cov /= N;
  CHECK((info.inverse() - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("score test preconditions") {
  Sample s = make_sample(41, 80);
  ModelSpec spec = main_effect_spec();
  spec.interactions.push_back({0, 0});
  spec.tested = {3};
  CHECK_FALSE(eps_full_score_applicable(spec));
  CHECK_THROWS_AS(score_test_eps_full(s.data, &s.design, spec), ValidationError);

  // One observed genotype in a stratum leaves its variance undefined.
  Dataset thin = s.data;
  thin.strata.setZero();
  Index kept = 0;
  for (Index i = 0; i < thin.size(); ++i) {
    if (!thin.geno.is_missing(i, 0) && kept++ == 0) thin.strata[i] = 1;
  }
  CHECK_THROWS_AS(score_test_eps_full(thin, nullptr, main_effect_spec()), ValidationError);
}

TEST_CASE("likelihood ratio test") {
  Sample s = make_sample(51, 300, 1, false, 0.6, 0.5);
  ModelSpec alt = main_effect_spec();
  alt.interactions.push_back({0, 0});
  alt.tested = {3};
  ModelSpec null = alt;
  null.interactions.clear();
  null.tested.clear();

  LrtDetail detail;
  const TestResult nested = lrt_eps_full(s.data, &s.design, null, alt, {}, &detail);
  const TestResult direct = lrt_eps_full(s.data, &s.design, alt);
  CHECK(nested.df == 1);
  CHECK(nested.statistic >= 0.0);
  CHECK(detail.converged);
  CHECK(nested.statistic == doctest::Approx(direct.statistic).epsilon(1e-6));
  CHECK(detail.alt_loglik >= detail.null_loglik);

  const TestResult same = lrt_eps_full(s.data, &s.design, alt, alt);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);

  CHECK_THROWS_AS(lrt_eps_full(s.data, &s.design, alt, null), ValidationError);
}

TEST_CASE("fit reports intervals matching the information") {
  Sample s = make_sample(61, 400);
  const FitResult fit = fit_eps_full(s.data, &s.design, main_effect_spec());
  CHECK(fit.converged);
  const Eigen::MatrixXd cov = fit.observed_information.inverse();
  for (Index k = 0; k < fit.values.size(); ++k) {
    REQUIRE(fit.ci[k].has_value());
    CHECK(fit.ci[k]->upper - fit.values[k] == doctest::Approx(1.959963984540054 * std::sqrt(cov(k, k))).epsilon(1e-9));
  }
  CHECK(std::abs(fit.values[2] - 0.4) < 3.0 * std::sqrt(cov(2, 2)));
}
