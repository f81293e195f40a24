#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's smoothing, fitting or averaging code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Composite Simpson on [lo, hi] with `panels` (even) panels, long double.
inline long double simpson(const std::function<long double(long double)>& f,
                           long double lo, long double hi, int panels = 20000) {
  const long double step = (hi - lo) / panels;
  long double sum = f(lo) + f(hi);
  for (int k = 1; k < panels; ++k) sum += f(lo + step * k) * (k % 2 ? 4.0L : 2.0L);
  return sum * step / 3.0L;
}

inline long double normal_pdf(long double x) {
  return std::exp(-0.5L * x * x) / std::sqrt(2.0L * 3.14159265358979323846264338L);
}

inline long double normal_cdf(long double x) {
  return 0.5L * std::erfc(-x / std::sqrt(2.0L));
}

/// Kernel formulas written out independently of the library.
inline long double epanechnikov(long double u) {
  return std::fabs(u) <= 1 ? 0.75L * (1 - u * u) : 0.0L;
}
inline long double uniform(long double u) { return std::fabs(u) <= 1 ? 0.5L : 0.0L; }
inline long double truncated_gaussian(long double u) {
  return std::fabs(u) <= 1 ? normal_pdf(u) / (2 * normal_cdf(1) - 1) : 0.0L;
}

struct Fit {
  double intercept;
  double slope;
};

/// Weighted least squares of y on (1, (t - a) / h) with weights K((t - a)/h)/h,
/// by explicit sums and Cramer's rule in long double.
inline Fit wls(std::span<const double> t, std::span<const double> y, double a,
               double h, long double (*kernel)(long double)) {
  long double s0 = 0, s1 = 0, s2 = 0, b0 = 0, b1 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const long double u = (static_cast<long double>(t[i]) - a) / h;
    const long double w = kernel(u) / h;
    s0 += w;
    s1 += w * u;
    s2 += w * u * u;
    b0 += w * y[i];
    b1 += w * u * y[i];
  }
  const long double det = s0 * s2 - s1 * s1;
  return {static_cast<double>((s2 * b0 - s1 * b1) / det),
          static_cast<double>((s0 * b1 - s1 * b0) / det)};
}

/// Row (1,0) (G'WG)^-1 G'W of the hat matrix at center a, by dense algebra.
inline Eigen::VectorXd smoother_row_dense(std::span<const double> t, double a,
                                          double h,
                                          long double (*kernel)(long double)) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd G(n, 2);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (t[static_cast<std::size_t>(i)] - a) / h;
    G(i, 0) = 1.0;
    G(i, 1) = u;
    w(i) = static_cast<double>(kernel(u)) / h;
  }
  const Eigen::Matrix2d m = G.transpose() * w.asDiagonal() * G;
  const Eigen::MatrixXd rows = m.inverse() * G.transpose() * w.asDiagonal();
  return rows.row(0).transpose();
}

/// Leave-one-out risk by n explicit refits without observation i.
inline double brute_force_loo(std::span<const double> t, std::span<const double> y,
                              double h, long double (*kernel)(long double)) {
  long double risk = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<double> tt;
    std::vector<double> yy;
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (j == i) continue;
      tt.push_back(t[j]);
      yy.push_back(y[j]);
    }
    const Fit f = wls(tt, yy, t[i], h, kernel);
    const long double r = y[i] - static_cast<long double>(f.intercept);
    risk += r * r;
  }
  return static_cast<double>(risk);
}

/// Gauss-Hermite nodes and weights for the standard normal (weights sum to
/// 1), by Golub-Welsch on the probabilists' Hermite recurrence.
inline void gauss_hermite_normal(int m, std::vector<double>& nodes,
                                 std::vector<double>& weights) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(m);
  weights.resize(m);
  for (int k = 0; k < m; ++k) {
    nodes[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    weights[k] = v * v;
  }
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// The outcome model written out directly.
inline double mu(const double* l, double a) {
  const double c = 0.13 * 0.13 * 0.13;
  return expit(1 + 0.2 * l[0] + 0.2 * l[1] + 0.3 * l[2] - 0.1 * l[3] +
               a * (0.1 - 0.1 * l[0] + 0.1 * l[2] - c * a * a));
}

/// Scaled beta density on (0, 20) with mean lambda and precision 20, via
/// long double log-gamma.
inline double beta20(double a, double lambda) {
  if (!(a > 0 && a < 20)) return 0.0;
  const long double x = a / 20.0L;
  const long double al = lambda;
  const long double be = 20.0L - lambda;
  const long double logb = std::lgamma(al) + std::lgamma(be) - std::lgamma(al + be);
  return static_cast<double>(
      std::exp((al - 1) * std::log(x) + (be - 1) * std::log1p(-x) - logb) / 20.0L);
}

inline double lambda(const double* l) {
  return 20.0 * expit(-0.8 + 0.1 * l[0] + 0.1 * l[1] - 0.1 * l[2] + 0.2 * l[3]);
}

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace oracle
