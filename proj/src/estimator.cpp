#include "drcurve/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "drcurve/errors.hpp"
#include "drcurve/smoothing.hpp"

namespace drcurve {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_grid(std::span<const double> grid) {
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw std::invalid_argument("grid must be strictly increasing");
    }
  }
}

EffectCurve empty_curve(std::span<const double> grid, const KernelSpec& spec,
                        EstimatorKind kind) {
  EffectCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.estimates.assign(grid.size(), kNaN);
  c.std_error.assign(grid.size(), kNaN);
  c.ci_low.assign(grid.size(), kNaN);
  c.ci_high.assign(grid.size(), kNaN);
  c.feasible.assign(grid.size(), false);
  c.bandwidth = spec.bandwidth();
  c.kernel = spec.family();
  c.kind = kind;
  return c;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::reg:
      return "reg";
    case EstimatorKind::ipw:
      return "ipw";
    case EstimatorKind::dr:
      return "dr";
  }
  return "unknown";
}

std::string_view to_string(VarianceMethod method) {
  return method == VarianceMethod::influence ? "influence" : "residual";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "reg") return EstimatorKind::reg;
  if (name == "ipw") return EstimatorKind::ipw;
  if (name == "dr") return EstimatorKind::dr;
  throw InputError("unknown estimator kind '" + std::string(name) +
                   "' (expected reg, ipw or dr)");
}

VarianceMethod parse_variance_method(std::string_view name) {
  if (name == "influence") return VarianceMethod::influence;
  if (name == "residual") return VarianceMethod::residual;
  throw InputError("unknown variance method '" + std::string(name) +
                   "' (expected influence or residual)");
}

std::size_t EffectCurve::feasible_count() const {
  return static_cast<std::size_t>(std::count(feasible.begin(), feasible.end(), true));
}

NuisanceFit nuisance_for(const NuisanceFit& fit, EstimatorKind kind) {
  return kind == EstimatorKind::ipw ? fit.with_outcome(zero_regression()) : fit;
}

EffectCurve smooth_pseudo_outcomes(std::span<const double> treatments,
                                   const PseudoOutcomes& pseudo,
                                   std::span<const double> grid,
                                   const KernelSpec& spec, EstimatorKind kind) {
  if (kind == EstimatorKind::reg) {
    throw std::invalid_argument("reg curves are not smoothed");
  }
  check_grid(grid);
  EffectCurve c = empty_curve(grid, spec, kind);
  c.floored_count = pseudo.floored_count;
  const SortedDesign design(treatments, pseudo.values);
  const auto fits = smooth_at(design, grid, spec);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    c.estimates[k] = fits[k].value;
    c.feasible[k] = fits[k].feasible;
  }
  return c;
}

EffectCurve estimate_curve(const Dataset& data, const NuisanceFit& fit,
                           std::span<const double> grid, const KernelSpec& spec,
                           EstimatorKind kind) {
  check_grid(grid);
  if (kind == EstimatorKind::reg) {
    EffectCurve c = empty_curve(grid, spec, kind);
    c.estimates = fit.regression_curve(grid);
    c.feasible.assign(grid.size(), true);
    return c;
  }
  const PseudoOutcomes pseudo = compute_pseudo(data, nuisance_for(fit, kind));
  return smooth_pseudo_outcomes(data.treatment(), pseudo, grid, spec, kind);
}

double normal_multiplier(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(),
                               0.5 * (1.0 + level));
}

EffectCurve add_wald_ci(EffectCurve curve, const Dataset& data,
                        const NuisanceFit& fit, const KernelSpec& spec,
                        double level, VarianceMethod method) {
  if (curve.kind == EstimatorKind::reg) {
    throw std::invalid_argument("Wald intervals need an ipw or dr curve");
  }
  const double z = normal_multiplier(level);
  const NuisanceFit used = nuisance_for(fit, curve.kind);
  const PseudoOutcomes pseudo = compute_pseudo(data, used);
  const auto treat = data.treatment();
  const double n = static_cast<double>(data.size());

  std::vector<double> local_var;  // residual method: sigma^2(A_i)
  if (method == VarianceMethod::residual) {
    const SortedDesign design(treat, pseudo.values);
    const auto fitted = smooth_at(design, treat, spec);
    std::vector<double> sq_resid(treat.size());
    for (std::size_t i = 0; i < treat.size(); ++i) {
      if (!fitted[i].feasible) {
        throw SingularDesign("singular local design at observed treatment " +
                             std::to_string(treat[i]));
      }
      const double r = pseudo.values[i] - fitted[i].value;
      sq_resid[i] = r * r;
    }
    const SortedDesign sq(treat, sq_resid);
    local_var.resize(treat.size());
    for (std::size_t i = 0; i < treat.size(); ++i) {
      const auto [lo, hi] = sq.window(treat[i], spec.bandwidth());
      double num = 0.0;
      double den = 0.0;
      for (std::size_t j = lo; j < hi; ++j) {
        const double k = spec.weight(sq.treatments()[j], treat[i]);
        num += k * sq.responses()[j];
        den += k;
      }
      local_var[i] = num / den;
    }
  }

  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (!curve.feasible[k]) continue;
    const double a = curve.grid[k];
    double variance = 0.0;
    if (method == VarianceMethod::influence) {
      const LocalFit beta = local_linear_fit(treat, pseudo.values, a, spec);
      const InfluenceValues iv =
          influence_values(data, used, pseudo, a, spec, beta);
      variance = iv.variance_11() / n;
    } else {
      const std::vector<double> w = smoother_row(treat, a, spec);
      for (std::size_t i = 0; i < w.size(); ++i) {
        variance += w[i] * w[i] * local_var[i];
      }
    }
    const double se = std::sqrt(variance);
    curve.std_error[k] = se;
    curve.ci_low[k] = curve.estimates[k] - z * se;
    curve.ci_high[k] = curve.estimates[k] + z * se;
  }
  curve.variance_method = method;
  curve.ci_level = level;
  curve.floored_count = pseudo.floored_count;
  return curve;
}

LocalFit smoothed_projection(double a, const KernelSpec& spec,
                             const std::function<double(double)>& theta,
                             const std::function<double(double)>& density,
                             Support support) {
  using Integrator = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double h = spec.bandwidth();
  const double lo = std::max(a - h, support.lower);
  const double hi = std::min(a + h, support.upper);
  if (!(hi > lo)) throw SingularDesign("kernel window outside the support");
  const auto integrate = [&](auto&& f) {
    return Integrator::integrate(f, lo, hi, 15, 1e-14);
  };
  const auto kw = [&](double t) { return spec.weight(t, a) * density(t); };
  const double s0 = integrate([&](double t) { return kw(t); });
  const double s1 = integrate([&](double t) { return kw(t) * (t - a) / h; });
  const double s2 = integrate([&](double t) {
    const double u = (t - a) / h;
    return kw(t) * u * u;
  });
  const double b0 = integrate([&](double t) { return kw(t) * theta(t); });
  const double b1 =
      integrate([&](double t) { return kw(t) * (t - a) / h * theta(t); });
  const DesignMoments m{s0, s1, s2};
  check_design(m, a);
  const double det = m.determinant();
  return {(s2 * b0 - s1 * b1) / det, (s0 * b1 - s1 * b0) / det};
}

std::vector<double> default_grid(std::span<const double> treatments,
                                 std::size_t points, double lower_quantile,
                                 double upper_quantile) {
  if (treatments.empty() || points < 2 ||
      !(lower_quantile >= 0.0 && lower_quantile < upper_quantile &&
        upper_quantile <= 1.0)) {
    throw std::invalid_argument("invalid default grid request");
  }
  std::vector<double> sorted(treatments.begin(), treatments.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < sorted.size() ? sorted[k] + frac * (sorted[k + 1] - sorted[k])
                                 : sorted[k];
  };
  const double lo = quantile(lower_quantile);
  const double hi = quantile(upper_quantile);
  if (!(hi > lo)) throw InputError("treatment quantiles coincide; grid is empty");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) /
                       static_cast<double>(points - 1);
  }
  return grid;
}

}  // namespace drcurve
