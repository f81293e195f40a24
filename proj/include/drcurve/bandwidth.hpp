#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "drcurve/estimator.hpp"
#include "drcurve/kernels.hpp"
#include "drcurve/nuisance.hpp"
#include "drcurve/pseudo.hpp"
#include "drcurve/smoothing.hpp"

namespace drcurve {

enum class Optimizer { golden_section, grid };

std::string_view to_string(Optimizer optimizer);
Optimizer parse_optimizer(std::string_view name);

struct RiskPoint {
  double bandwidth;
  double risk;  // +infinity when infeasible
};

/// Search settings on input, completed by the selectors.
struct BandwidthSearch {
  double h_min = 0.01;
  double h_max = 50.0;
  Optimizer optimizer = Optimizer::golden_section;
  std::size_t grid_size = 20;

  double selected = 0.0;
  double risk_at_selected = 0.0;
  /// The log-spaced scan, increasing in h.
  std::vector<RiskPoint> risk_table;

  /// Throws std::invalid_argument unless 0 < h_min <= h_max and both finite.
  void validate() const;
};

/// [0.05 s_A, 5 range(A)] with s_A the sample standard deviation.
BandwidthSearch default_search(std::span<const double> treatments);

/// sum_i ((xi_i - theta_h(A_i)) / (1 - W_h(A_i)))^2, or +infinity when some
/// A_i has a singular local design or a hat diagonal >= 1.
double loo_risk(double h, const SortedDesign& design, KernelFamily family);
double loo_risk(double h, std::span<const double> treatments,
                const PseudoOutcomes& pseudo, KernelFamily family);

/// P_n (theta(A_i) - theta_h(A_i))^2, +infinity when infeasible.
double oracle_risk(double h, const SortedDesign& design, KernelFamily family,
                   const std::function<double(double)>& truth);

/// Log-grid scan over the range, then (golden_section) golden-section search
/// on log h inside the bracket around the best grid point. Throws
/// SingularDesign when no scanned h is feasible.
BandwidthSearch minimize_risk(const std::function<double(double)>& risk,
                              BandwidthSearch search);

BandwidthSearch select_bandwidth(std::span<const double> treatments,
                                 const PseudoOutcomes& pseudo,
                                 KernelFamily family, BandwidthSearch search);

BandwidthSearch oracle_bandwidth(std::span<const double> treatments,
                                 const PseudoOutcomes& pseudo,
                                 const std::function<double(double)>& truth,
                                 KernelFamily family, BandwidthSearch search);

/// Split-sample variant: nuisances fit on the even-indexed rows, pseudo-
/// outcomes and LOO risk computed on the odd-indexed rows.
BandwidthSearch select_bandwidth_split(const Dataset& data,
                                       const NuisanceSpec& spec,
                                       EstimatorKind kind, KernelFamily family,
                                       BandwidthSearch search);

}  // namespace drcurve
