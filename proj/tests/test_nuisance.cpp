#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "drcurve/errors.hpp"
#include "drcurve/nuisance.hpp"
#include "drcurve/simulate.hpp"
#include "oracles.hpp"

using namespace drcurve;

namespace {

Dataset normal_treatment_data(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  CovariateMatrix cov(static_cast<Eigen::Index>(n), 2);
  std::vector<double> a(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    cov(r, 0) = z(rng);
    cov(r, 1) = z(rng);
    a[i] = 1.0 + 0.5 * cov(r, 0) - 0.3 * cov(r, 1) + 0.8 * z(rng);
    y[i] = a[i] + cov(r, 0) + z(rng);
  }
  return Dataset(std::move(cov), std::move(a), std::move(y));
}

}  // namespace

TEST_CASE("dataset validation") {
  CovariateMatrix cov(3, 1);
  cov << 1, 2, 3;
  CHECK_THROWS_AS(Dataset(cov, {1, 2}, {1, 2, 3}), InputError);
  CHECK_THROWS_AS(Dataset(cov, {1, 2, std::nan("")}, {1, 2, 3}), InputError);
  CHECK_THROWS_AS(Dataset(cov, {1, 2, 30}, {1, 2, 3}, Support{0, 20}), InputError);
  const Dataset d(cov, {1, 2, 3}, {0, 1, 1});
  CHECK(d.support().lower == 1.0);
  CHECK(d.support().upper == 3.0);
  CHECK(d.binary_outcome());
  const std::vector<std::size_t> idx{2, 0};
  const auto s = d.subset(idx);
  CHECK(s.size() == 2);
  CHECK(s.treatment()[0] == 3.0);
  CHECK(s.row(1)[0] == 1.0);
}

TEST_CASE("beta density matches the log-gamma oracle and integrates to one") {
  const auto dens = sim::true_density();
  const std::vector<double> zero(4, 0.0);
  CHECK(oracle::lambda(zero.data()) == doctest::Approx(6.2007).epsilon(1e-4));
  CHECK(dens->mean(zero) == doctest::Approx(oracle::lambda(zero.data())).epsilon(1e-12));
  for (double a : {0.3, 6.2007, 12.0, 19.5}) {
    CHECK((*dens)(zero, a) ==
          doctest::Approx(oracle::beta20(a, oracle::lambda(zero.data()))).epsilon(1e-11));
  }
  const std::vector<double> l{0.5, -1.0, 1.5, 0.2};
  const auto f = [&](long double a) {
    return static_cast<long double>((*dens)(l, static_cast<double>(a)));
  };
  CHECK(static_cast<double>(oracle::simpson(f, 0, 20, 200000)) ==
        doctest::Approx(1.0).epsilon(1e-6));
  const auto m = [&](long double a) { return a * f(a); };
  CHECK(static_cast<double>(oracle::simpson(m, 0, 20, 200000)) ==
        doctest::Approx(oracle::lambda(l.data())).epsilon(1e-6));
  CHECK((*dens)(l, 0.0) == 0.0);
  CHECK((*dens)(l, 20.0) == 0.0);
  CHECK((*dens)(l, 25.0) == 0.0);
}

TEST_CASE("beta fit rejects treatments outside the scaled support") {
  auto d = sim::generate_data(200, 3);
  std::vector<double> a(d.treatment().begin(), d.treatment().end());
  std::vector<double> y(d.outcome().begin(), d.outcome().end());
  a[5] = 20.0;
  const Dataset bad(d.covariates(), a, y, Support{0, 20});
  CHECK_THROWS_AS(fit_treatment_density_beta(bad, linear_covariates(4), 20, 20), DomainError);
}

TEST_CASE("location-scale density on a normal linear model") {
  const auto d = normal_treatment_data(20000, 4);
  const auto fd = fit_treatment_density_locscale(d, linear_covariates(2),
                                                 FeatureMap::from_strings(CovariateTransform::none, {"1"}));
  const std::vector<double> l{0.4, -0.2};
  const double loc = 1.0 + 0.5 * 0.4 + 0.3 * 0.2;
  for (double a : {loc - 1.0, loc, loc + 0.5}) {
    const double truth = static_cast<double>(oracle::normal_pdf((a - loc) / 0.8L) / 0.8L);
    CHECK(std::fabs((*fd)(l, a) - truth) < 0.02);
  }
  const auto f = [&](long double a) {
    return static_cast<long double>((*fd)(l, static_cast<double>(a)));
  };
  CHECK(static_cast<double>(oracle::simpson(f, loc - 10, loc + 10, 40000)) ==
        doctest::Approx(1.0).epsilon(1e-4));
  // Standardized residuals (A - location) / scale have mean zero.
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    mean += (d.treatment()[i] - fd->location(d.row(i))) / fd->scale(d.row(i));
  }
  CHECK(std::fabs(mean / static_cast<double>(d.size())) < 1e-8);
}

TEST_CASE("location-scale fit detects a degenerate scale") {
  CovariateMatrix cov(40, 1);
  std::vector<double> a(40);
  std::vector<double> y(40, 0.0);
  for (int i = 0; i < 40; ++i) {
    cov(i, 0) = i;
    a[static_cast<std::size_t>(i)] = 2.0 + 0.5 * i;
  }
  const Dataset d(cov, a, y);
  CHECK_THROWS_AS(fit_treatment_density_locscale(d, linear_covariates(1),
                                                 FeatureMap::from_strings(CovariateTransform::none, {"1"})),
                  DegenerateScale);
}

TEST_CASE("marginalization equals explicit loops over the rows") {
  const auto d = sim::generate_data(100, 8);
  const auto fit = fit_nuisance(d, sim::nuisance_spec(sim::ModelSpec::correct,
                                                      sim::ModelSpec::correct));
  const double floor = fit.floor();
  CHECK(floor == doctest::Approx(1e-3 / 20));
  for (double a : {1.0, 5.0, 9.0, 15.0}) {
    long double dens = 0;
    long double reg = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      dens += std::max(fit.raw_density()(d.row(i), a), floor);
      reg += fit.outcome_model()(d.row(i), a);
    }
    CHECK(std::fabs(fit.marginal_density(a) - static_cast<double>(dens / 100)) < 1e-12);
    CHECK(std::fabs(fit.regression_curve(a) - static_cast<double>(reg / 100)) < 1e-12);
  }
  // Far in the tail every row is floored.
  CHECK(fit.marginal_density(19.99) >= floor);
  CHECK(fit.cond_density(d.row(0), 19.999) == doctest::Approx(floor));
}

TEST_CASE("parallel and serial averages agree") {
  const auto d = sim::generate_data(3000, 9);
  const auto fit = fit_nuisance(d, sim::nuisance_spec(sim::ModelSpec::misspecified,
                                                      sim::ModelSpec::misspecified));
  std::vector<double> pts;
  for (double a = 0.1; a < 20; a += 0.37) pts.push_back(a);
  const auto p1 = average_density(fit.raw_density(), fit.training_rows(), pts, fit.floor());
  const auto s1 = serial::average_density(fit.raw_density(), fit.training_rows(), pts, fit.floor());
  const auto p2 = average_regression(fit.outcome_model(), fit.training_rows(), pts);
  const auto s2 = serial::average_regression(fit.outcome_model(), fit.training_rows(), pts);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    CHECK(std::fabs(p1[k] - s1[k]) < 1e-12 * std::max(1.0, s1[k]));
    CHECK(std::fabs(p2[k] - s2[k]) < 1e-12);
  }
}

TEST_CASE("nuisance spec JSON round trip") {
  const auto spec = sim::nuisance_spec(sim::ModelSpec::misspecified, sim::ModelSpec::correct);
  const auto back = NuisanceSpec::from_json(spec.to_json(), NuisanceSpec{});
  CHECK(back.to_json() == spec.to_json());
  const auto d = sim::generate_data(100, 1);
  const auto def = default_nuisance_spec(d);
  CHECK(def.outcome.link == Link::logistic);
  CHECK(def.treatment.kind == TreatmentModelKind::location_scale);
}

TEST_CASE("fitted outcome regression solves its score equations") {
  const auto d = sim::generate_data(2000, 10);
  const auto design = sim::outcome_model(sim::ModelSpec::correct).design;
  const auto m = fit_outcome_regression(d, design, Link::logistic);
  const auto x = design_matrix(d, design);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.outcome().data(), 2000);
  CHECK(glm_score(x, y, m->coefficients(), Link::logistic).lpNorm<Eigen::Infinity>() < 1e-7);
}
