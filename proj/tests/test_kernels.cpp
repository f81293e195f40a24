#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "drcurve/errors.hpp"
#include "drcurve/kernels.hpp"
#include "oracles.hpp"

using namespace drcurve;

namespace {

const KernelFamily kFamilies[] = {KernelFamily::epanechnikov, KernelFamily::uniform,
                                  KernelFamily::truncated_gaussian};

long double (*oracle_kernel(KernelFamily f))(long double) {
  switch (f) {
    case KernelFamily::epanechnikov:
      return oracle::epanechnikov;
    case KernelFamily::uniform:
      return oracle::uniform;
    case KernelFamily::truncated_gaussian:
      return oracle::truncated_gaussian;
  }
  return nullptr;
}

std::vector<double> uniform_draws(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (auto& x : out) x = u(rng);
  return out;
}

}  // namespace

TEST_CASE("kernel values at the center and outside the window") {
  CHECK(eval_kernel(0.0, KernelFamily::epanechnikov) == doctest::Approx(0.75));
  CHECK(eval_kernel(0.0, KernelFamily::uniform) == doctest::Approx(0.5));
  const double tg0 = static_cast<double>(oracle::truncated_gaussian(0.0L));
  CHECK(tg0 == doctest::Approx(0.58437).epsilon(1e-4));
  CHECK(eval_kernel(0.0, KernelFamily::truncated_gaussian) ==
        doctest::Approx(tg0).epsilon(1e-14));
  for (auto f : kFamilies) {
    CHECK(eval_kernel(2.0, f) == 0.0);
    CHECK(eval_kernel(-1.0001, f) == 0.0);
  }
}

TEST_CASE("kernels are symmetric densities matching the oracle formulas") {
  for (auto f : kFamilies) {
    CAPTURE(to_string(f));
    const auto lib = [f](long double u) {
      return static_cast<long double>(eval_kernel(static_cast<double>(u), f));
    };
    CHECK(static_cast<double>(oracle::simpson(lib, -1, 1)) ==
          doctest::Approx(1.0).epsilon(1e-8));
    for (double u = -0.95; u < 1.0; u += 0.1) {
      CHECK(eval_kernel(u, f) == doctest::Approx(eval_kernel(-u, f)).epsilon(1e-15));
      CHECK(eval_kernel(u, f) ==
            doctest::Approx(static_cast<double>(oracle_kernel(f)(u))).epsilon(1e-13));
    }
  }
}

TEST_CASE("kernel moments") {
  CHECK(kernel_moments(KernelFamily::epanechnikov).second_moment == doctest::Approx(0.2));
  CHECK(kernel_moments(KernelFamily::epanechnikov).roughness == doctest::Approx(0.6));
  CHECK(kernel_moments(KernelFamily::uniform).second_moment == doctest::Approx(1.0 / 3));
  CHECK(kernel_moments(KernelFamily::uniform).roughness == doctest::Approx(0.5));
  for (auto f : kFamilies) {
    CAPTURE(to_string(f));
    const auto k = oracle_kernel(f);
    const double nu2 = static_cast<double>(
        oracle::simpson([k](long double u) { return u * u * k(u); }, -1, 1));
    const double r = static_cast<double>(
        oracle::simpson([k](long double u) { return k(u) * k(u); }, -1, 1));
    CHECK(kernel_moments(f).second_moment == doctest::Approx(nu2).epsilon(1e-9));
    CHECK(kernel_moments(f).roughness == doctest::Approx(r).epsilon(1e-9));
  }
}

TEST_CASE("kernel names and bandwidth validation") {
  for (auto f : kFamilies) CHECK(parse_kernel_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_kernel_family("triweight"), InputError);
  CHECK_THROWS_AS(KernelSpec(0.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec(std::nan("")), std::invalid_argument);
  const KernelSpec s(KernelFamily::epanechnikov, 2.0);
  CHECK(s.weight(3.0, 3.0) == doctest::Approx(0.375));
}

TEST_CASE("local linear fit reproduces constant and affine responses") {
  const auto t = uniform_draws(200, 0.0, 10.0, 7);
  std::vector<double> c(t.size(), 3.25);
  std::vector<double> lin(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) lin[i] = 1.5 - 0.4 * t[i];
  for (auto f : kFamilies) {
    const KernelSpec spec(f, 1.3);
    for (double a : {0.5, 4.0, 9.7}) {
      CHECK(local_linear_fit(t, c, a, spec).intercept == doctest::Approx(3.25).epsilon(1e-12));
      const auto fit = local_linear_fit(t, lin, a, spec);
      CHECK(fit.intercept == doctest::Approx(1.5 - 0.4 * a).epsilon(1e-11));
      CHECK(fit.slope == doctest::Approx(-0.4 * 1.3).epsilon(1e-10));
    }
  }
}

TEST_CASE("local linear fit matches the explicit 2x2 solve") {
  const auto t = uniform_draws(300, 0.0, 5.0, 11);
  auto y = uniform_draws(300, -1.0, 1.0, 12);
  for (std::size_t i = 0; i < t.size(); ++i) y[i] += std::sin(t[i]);
  for (auto f : kFamilies) {
    for (double h : {0.3, 0.9, 2.5}) {
      for (double a : {0.2, 2.5, 4.9}) {
        const KernelSpec spec(f, h);
        const auto lib = local_linear_fit(t, y, a, spec);
        const auto ref = oracle::wls(t, y, a, h, oracle_kernel(f));
        CHECK(std::fabs(lib.intercept - ref.intercept) < 1e-10);
        CHECK(std::fabs(lib.slope - ref.slope) < 1e-10);
      }
    }
  }
}

TEST_CASE("smoother row sums to one, annihilates slopes and matches dense algebra") {
  const auto t = uniform_draws(40, 0.0, 4.0, 3);
  for (auto f : kFamilies) {
    const KernelSpec spec(f, 1.1);
    for (double a : {0.5, 2.0, 3.6}) {
      const auto w = smoother_row(t, a, spec);
      double sum = 0.0;
      double moment = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        sum += w[i];
        moment += w[i] * (t[i] - a);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::fabs(moment) < 1e-12);
      const auto dense = oracle::smoother_row_dense(t, a, 1.1, oracle_kernel(f));
      for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(std::fabs(w[i] - dense(static_cast<Eigen::Index>(i))) < 1e-10);
      }
    }
  }
}

TEST_CASE("hat diagonal equals the diagonal of the dense smoother matrix") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto t = uniform_draws(10 * seed, 0.0, 3.0, seed);
    for (auto f : kFamilies) {
      const double h = 0.8 + 0.1 * seed;
      const KernelSpec spec(f, h);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto dense = oracle::smoother_row_dense(t, t[i], h, oracle_kernel(f));
        CHECK(hat_diagonal(t, i, spec) ==
              doctest::Approx(dense(static_cast<Eigen::Index>(i))).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("hat diagonal under a symmetric uniform design") {
  // t = -k..k with h large enough to cover all points: the centre point has
  // S1 = 0 so the weight is K(0) / (n h S0) = 1 / n.
  std::vector<double> t;
  for (int k = -5; k <= 5; ++k) t.push_back(k);
  const KernelSpec spec(KernelFamily::uniform, 100.0);
  CHECK(hat_diagonal(t, 5, spec) == doctest::Approx(1.0 / 11).epsilon(1e-12));
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(hat_diagonal(t, i, spec) >= 1.0 / 11 - 1e-12);
}

TEST_CASE("singular local designs throw") {
  std::vector<double> t{0.0, 1.0, 2.0, 3.0};
  std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  const KernelSpec spec(KernelFamily::epanechnikov, 0.5);
  // Only one point (t = 1) in the window.
  CHECK_THROWS_AS(local_linear_fit(t, y, 1.0, spec), SingularDesign);
  // No point in the window.
  CHECK_THROWS_AS(local_linear_fit(t, y, 10.0, spec), SingularDesign);
  CHECK_THROWS_AS(hat_diagonal(t, 0, spec), SingularDesign);
  std::vector<double> tied{2.0, 2.0, 2.0};
  std::vector<double> yt{1.0, 0.0, 1.0};
  CHECK_THROWS_AS(local_linear_fit(tied, yt, 2.0, KernelSpec(1.0)), SingularDesign);
}
