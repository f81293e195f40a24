#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "drcurve/kernels.hpp"
#include "drcurve/nuisance.hpp"
#include "drcurve/pseudo.hpp"

namespace drcurve {

enum class EstimatorKind { reg, ipw, dr };
enum class VarianceMethod { influence, residual };

std::string_view to_string(EstimatorKind kind);
std::string_view to_string(VarianceMethod method);
/// Throw InputError on unknown names.
EstimatorKind parse_estimator_kind(std::string_view name);
VarianceMethod parse_variance_method(std::string_view name);

/// Estimated effect curve on a grid. Confidence intervals, when present,
/// cover the smoothed parameter theta*_h(a), not theta(a).
struct EffectCurve {
  std::vector<double> grid;
  std::vector<double> estimates;
  std::vector<double> std_error;  // NaN until add_wald_ci
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  /// false where the local design was singular; those entries are NaN.
  std::vector<bool> feasible;
  double bandwidth = 0.0;
  KernelFamily kernel = KernelFamily::epanechnikov;
  EstimatorKind kind = EstimatorKind::dr;
  std::optional<VarianceMethod> variance_method;
  double ci_level = 0.0;
  std::size_t floored_count = 0;

  std::size_t size() const { return grid.size(); }
  std::size_t feasible_count() const;
};

/// The nuisance quadruple an estimator kind actually uses: ipw replaces mu
/// (and hence m) with 0.
NuisanceFit nuisance_for(const NuisanceFit& fit, EstimatorKind kind);

/// dr / ipw: local-linear smooth of the pseudo-outcomes on A; reg: m(a).
/// Singular grid points are flagged, not thrown. Grid must be increasing.
EffectCurve estimate_curve(const Dataset& data, const NuisanceFit& fit,
                           std::span<const double> grid, const KernelSpec& spec,
                           EstimatorKind kind);

/// Smoothing step alone, for callers that already hold pseudo-outcomes.
EffectCurve smooth_pseudo_outcomes(std::span<const double> treatments,
                                   const PseudoOutcomes& pseudo,
                                   std::span<const double> grid,
                                   const KernelSpec& spec, EstimatorKind kind);

/// Normal quantile z_{(1 + level) / 2}.
double normal_multiplier(double level);

/// Pointwise Wald intervals estimate +- z * se. influence: se^2 is the (1,1)
/// entry of P_n{phi phi'} / n; residual: sum_i w_i(a)^2 sigma^2(A_i) with a
/// local-constant kernel estimate of var(xi | A). Kind must be ipw or dr.
EffectCurve add_wald_ci(EffectCurve curve, const Dataset& data,
                        const NuisanceFit& fit, const KernelSpec& spec,
                        double level, VarianceMethod method);

/// Kernel-weighted projection of theta onto the local affine basis under
/// density varpi, by adaptive quadrature over [a - h, a + h] clipped to
/// `support`. intercept is theta*_h(a).
LocalFit smoothed_projection(double a, const KernelSpec& spec,
                             const std::function<double(double)>& theta,
                             const std::function<double(double)>& density,
                             Support support);

inline double smoothed_target(double a, const KernelSpec& spec,
                              const std::function<double(double)>& theta,
                              const std::function<double(double)>& density,
                              Support support) {
  return smoothed_projection(a, spec, theta, density, support).intercept;
}

/// `points` equispaced values between the lower and upper empirical
/// quantiles of the treatments (defaults: 101 points, 5% to 95%).
std::vector<double> default_grid(std::span<const double> treatments,
                                 std::size_t points = 101,
                                 double lower_quantile = 0.05,
                                 double upper_quantile = 0.95);

}  // namespace drcurve
