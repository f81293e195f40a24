#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "drcurve/errors.hpp"
#include "drcurve/simulate.hpp"
#include "oracles.hpp"

using namespace drcurve;

namespace {

/// theta(a) = E mu(L, a) by a 10-node-per-dimension Gauss-Hermite product
/// rule over the four standard normal covariates.
double theta_gauss_hermite(double a) {
  std::vector<double> x;
  std::vector<double> w;
  oracle::gauss_hermite_normal(10, x, w);
  long double sum = 0;
  double l[4];
  for (int i = 0; i < 10; ++i) {
    l[0] = x[i];
    for (int j = 0; j < 10; ++j) {
      l[1] = x[j];
      for (int k = 0; k < 10; ++k) {
        l[2] = x[k];
        for (int m = 0; m < 10; ++m) {
          l[3] = x[m];
          sum += static_cast<long double>(w[i] * w[j] * w[k] * w[m]) * oracle::mu(l, a);
        }
      }
    }
  }
  return static_cast<double>(sum);
}

const sim::TruthOracle& small_oracle() {
  static const sim::TruthOracle o(20000, 3);
  return o;
}

}  // namespace

TEST_CASE("true models match the written-out formulas") {
  const std::vector<double> zero(4, 0.0);
  CHECK(sim::true_lambda(zero) == doctest::Approx(6.2007).epsilon(1e-4));
  const std::vector<double> l{0.3, -0.7, 1.1, -0.4};
  CHECK(sim::true_lambda(l) == doctest::Approx(oracle::lambda(l.data())).epsilon(1e-14));
  for (double a : {0.5, 4.0, 10.0, 17.0}) {
    CHECK(sim::true_mu(l, a) == doctest::Approx(oracle::mu(l.data(), a)).epsilon(1e-14));
    CHECK((*sim::true_outcome())(l, a) == doctest::Approx(oracle::mu(l.data(), a)).epsilon(1e-13));
    const double b = oracle::beta20(a, oracle::lambda(l.data()));
    CHECK(sim::true_pi(l, a) == doctest::Approx(b).epsilon(1e-11));
    CHECK((*sim::true_density())(l, a) == doctest::Approx(b).epsilon(1e-11));
  }
  const auto m = sim::misspecify_covariates(l);
  const auto ks = kang_schafer(l);
  for (int k = 0; k < 4; ++k) CHECK(m[k] == ks[k]);
}

TEST_CASE("generated data") {
  const auto d1 = sim::generate_data(500, 42);
  const auto d2 = sim::generate_data(500, 42);
  const auto d3 = sim::generate_data(500, 43);
  CHECK(d1.covariate_count() == 4);
  CHECK(d1.support().lower == 0.0);
  CHECK(d1.support().upper == 20.0);
  CHECK(d1.binary_outcome());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1.treatment()[i] > 0.0);
    CHECK(d1.treatment()[i] < 20.0);
    CHECK(d1.treatment()[i] == d2.treatment()[i]);
    CHECK(d1.outcome()[i] == d2.outcome()[i]);
  }
  CHECK(d1.treatment()[0] != d3.treatment()[0]);
  CHECK(sim::derive_seed(1, 0) != sim::derive_seed(1, 1));
  CHECK(sim::derive_seed(1, 5) == sim::derive_seed(1, 5));
}

TEST_CASE("treatment mean matches a one-dimensional quadrature") {
  // E A = E 20 expit(eta), eta ~ N(-0.8, 0.07).
  std::vector<double> x;
  std::vector<double> w;
  oracle::gauss_hermite_normal(40, x, w);
  double expected = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    expected += w[k] * 20.0 * oracle::expit(-0.8 + std::sqrt(0.07) * x[k]);
  }
  const auto d = sim::generate_data(1'000'000, 7);
  long double s = 0;
  long double ss = 0;
  for (double a : d.treatment()) {
    s += a;
    ss += static_cast<long double>(a) * a;
  }
  const double mean = static_cast<double>(s / d.size());
  const double sd = std::sqrt(static_cast<double>(ss / d.size()) - mean * mean);
  CHECK(std::fabs(mean - expected) < 4.0 * sd / 1000.0);
  // Outcomes are mostly ones under this design.
  long double ys = 0;
  for (double y : d.outcome()) ys += y;
  CHECK(static_cast<double>(ys / d.size()) > 0.5);
}

TEST_CASE("Monte Carlo truth agrees with Gauss-Hermite quadrature") {
  const auto& truth = sim::TruthOracle::shared();
  for (double a : {4.0, 8.0, 12.0}) {
    const double gh = theta_gauss_hermite(a);
    const auto mc = truth.theta_exact(a);
    CAPTURE(a);
    CHECK(std::fabs(mc.value - gh) < 5e-4);
    CHECK(std::fabs(truth.theta(a) - mc.value) < 1e-6);
    CHECK(mc.value > 0.0);
    CHECK(mc.value < 1.0);
  }
  const auto a1 = sim::theta_monte_carlo(8.0, 200000, 1);
  const auto a2 = sim::theta_monte_carlo(8.0, 200000, 2);
  CHECK(std::fabs(a1.value - a2.value) <
        3.0 * std::sqrt(a1.std_error * a1.std_error + a2.std_error * a2.std_error));
}

TEST_CASE("marginal treatment density and quantiles") {
  const auto& truth = sim::TruthOracle::shared();
  const auto f = [&](long double a) {
    return static_cast<long double>(truth.varpi(static_cast<double>(a)));
  };
  CHECK(static_cast<double>(oracle::simpson(f, 0, 20, 4000)) == doctest::Approx(1.0).epsilon(1e-4));
  const auto d = sim::generate_data(200000, 11);
  std::vector<double> a(d.treatment().begin(), d.treatment().end());
  std::sort(a.begin(), a.end());
  for (double q : {0.05, 0.5, 0.95}) {
    const double emp = a[static_cast<std::size_t>(q * (a.size() - 1))];
    CHECK(truth.treatment_quantile(q) == doctest::Approx(emp).epsilon(0.01));
  }
}

TEST_CASE("metric grid") {
  const auto& truth = small_oracle();
  const auto g = sim::metric_grid(truth, 0.10, 101);
  double total = 0.0;
  for (double w : g.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.points.front() == doctest::Approx(truth.treatment_quantile(0.05)));
  CHECK(g.points.back() == doctest::Approx(truth.treatment_quantile(0.95)));
  CHECK(g.points.size() == 101);
}

TEST_CASE("config JSON") {
  sim::SimConfig c;
  c.n = 300;
  c.replications = 7;
  c.treatment = sim::ModelSpec::misspecified;
  c.h_min = 0.2;
  const auto back = sim::SimConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(sim::SimConfig::from_json(nlohmann::json{{"bogus", 1}}), InputError);
  CHECK_THROWS_AS(sim::SimConfig::from_json(nlohmann::json{{"n", 10}}).validate(), InputError);
}

TEST_CASE("small studies run and are deterministic") {
  sim::SimConfig c;
  c.n = 300;
  c.replications = 2;
  c.grid_points = 21;
  c.max_failure_rate = 0.6;
  const auto r1 = sim::run_study(c, small_oracle());
  const auto r2 = sim::run_study(c, small_oracle());
  CHECK(r1.completed == 2);
  CHECK(r1.cells.size() == 5);
  for (std::size_t k = 0; k < r1.cells.size(); ++k) {
    CHECK(r1.cells[k].integrated_bias == r2.cells[k].integrated_bias);
    CHECK(r1.cells[k].integrated_rmse == r2.cells[k].integrated_rmse);
    CHECK(r1.cells[k].integrated_rmse >= r1.cells[k].integrated_bias - 1e-12);
  }
  CHECK(r1.find(EstimatorKind::dr, sim::BandwidthMode::oracle)->label() == "DR*");
  CHECK(r1.find(EstimatorKind::reg, std::nullopt)->label() == "Reg");
  const std::string csv = r1.to_csv();
  CHECK(csv.rfind("estimator,correct_model,n,replications,bias,rmse,bias_se,rmse_se,h_mean,h_median", 0) == 0);

  c.replications = 1;
  const auto single = sim::run_study(c, small_oracle());
  CHECK(single.completed == 1);
  CHECK(single.cells[0].bias_mc_se == 0.0);
}

TEST_CASE("study fails when every replication fails") {
  sim::SimConfig c;
  c.n = 100;
  c.replications = 3;
  c.estimators = {EstimatorKind::dr};
  c.bandwidth_modes = {sim::BandwidthMode::fixed};
  c.fixed_bandwidth = 1e-4;
  c.grid_points = 11;
  CHECK_THROWS_AS(sim::run_study(c, small_oracle()), StudyFailed);
}

TEST_CASE("asymptotic diagnostics") {
  const auto& truth = small_oracle();
  const auto d1 = sim::asymptotic_diagnostics(8.0, KernelSpec(1.0), truth);
  const auto d2 = sim::asymptotic_diagnostics(8.0, KernelSpec(2.0), truth);
  CHECK(d2.bias == doctest::Approx(4.0 * d1.bias).epsilon(1e-12));
  CHECK(d1.bias == doctest::Approx(d1.second_derivative * 0.2 / 2).epsilon(1e-12));
  CHECK(d1.variance > 0.0);
  CHECK(d1.scaled_variance ==
        doctest::Approx(d1.variance * 0.6 / truth.varpi_exact(8.0).value).epsilon(1e-10));
  // With the true nuisances the variance reduces to varpi E[tau^2 / pi].
  const auto direct = truth.average(
      [](std::span<const double> l, double a) {
        const double m = sim::true_mu(l, a);
        return m * (1 - m) / sim::true_pi(l, a);
      },
      8.0);
  const double varpi = truth.varpi_exact(8.0).value;
  CHECK(d1.variance == doctest::Approx(direct.value * varpi).epsilon(1e-8));
}
