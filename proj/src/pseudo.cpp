#include "drcurve/pseudo.hpp"

#include <algorithm>
#include <stdexcept>

#include "drcurve/errors.hpp"
#include "drcurve/numeric.hpp"

namespace drcurve {

PseudoOutcomes compute_pseudo(const Dataset& data, const NuisanceFit& fit) {
  const std::size_t n = data.size();
  const auto a = data.treatment();
  const auto y = data.outcome();
  const std::vector<double> marginal = fit.marginal_density(a);
  const std::vector<double> curve = fit.regression_curve(a);

  PseudoOutcomes out;
  out.values.resize(n);
  std::size_t floored = 0;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) reduction(+ : floored)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto i = static_cast<std::size_t>(s);
    const auto row = data.row(i);
    const double raw = fit.raw_density()(row, a[i]);
    const double pi = std::max(raw, fit.floor());
    if (raw < fit.floor()) ++floored;
    const double mu = fit.outcome_reg(row, a[i]);
    const double w = marginal[i] / pi;
    // Same quantity as (y - mu) * w + m, arranged so that w == 1 and m == mu
    // return y exactly.
    out.values[i] = y[i] + (y[i] - mu) * (w - 1.0) + (curve[i] - mu);
  }
  out.floored_count = floored;
  return out;
}

double InfluenceValues::variance_11() const {
  std::vector<double> sq(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) sq[i] = phi[i][0] * phi[i][0];
  return stable_mean(sq);
}

InfluenceValues influence_values(const Dataset& data, const NuisanceFit& fit,
                                 const PseudoOutcomes& pseudo, double a,
                                 const KernelSpec& spec, const LocalFit& beta,
                                 int panels) {
  if (panels < 2 || panels % 2 != 0) {
    throw std::invalid_argument("Simpson panels must be even and >= 2");
  }
  const std::size_t n = data.size();
  if (pseudo.values.size() != n) {
    throw std::invalid_argument("pseudo-outcomes do not match the data");
  }
  const auto treat = data.treatment();
  const double h = spec.bandwidth();
  const DesignMoments m = design_moments(treat, a, spec);
  check_design(m, a);

  InfluenceValues out;
  out.design << m.s0, m.s1, m.s1, m.s2;
  const Eigen::Matrix2d d_inv = out.design.inverse();

  // Quadrature nodes over the kernel window inside the support.
  const double lo = std::max(a - h, fit.support().lower);
  const double hi = std::min(a + h, fit.support().upper);
  std::vector<double> nodes;
  std::vector<double> weights;
  if (hi > lo) {
    const double step = (hi - lo) / panels;
    for (int k = 0; k <= panels; ++k) {
      nodes.push_back(lo + step * k);
      const double simpson = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      weights.push_back(simpson * step / 3.0);
    }
  }
  const std::vector<double> marginal = fit.marginal_density(nodes);
  const std::vector<double> curve = fit.regression_curve(nodes);
  // w_k g(t_k) K_ha(t_k) varpi(t_k), shared by every observation.
  std::vector<std::array<double, 2>> node_factor(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double c = weights[k] * spec.weight(nodes[k], a) * marginal[k];
    node_factor[k] = {c, c * (nodes[k] - a) / h};
  }

  out.phi.resize(n);
  out.integral.resize(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto i = static_cast<std::size_t>(s);
    const RowParams params = fit.outcome_model().prepare(data.row(i));
    double int0 = 0.0;
    double int1 = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double diff = fit.outcome_model().evaluate(params, nodes[k]) - curve[k];
      int0 += node_factor[k][0] * diff;
      int1 += node_factor[k][1] * diff;
    }
    const double u = (treat[i] - a) / h;
    const double kw = spec.weight(treat[i], a);
    const double resid = pseudo.values[i] - (beta.intercept + beta.slope * u);
    const Eigen::Vector2d bracket(kw * resid + int0, kw * u * resid + int1);
    const Eigen::Vector2d phi = d_inv * bracket;
    out.phi[i] = {phi(0), phi(1)};
    out.integral[i] = {int0, int1};
  }
  return out;
}

}  // namespace drcurve
