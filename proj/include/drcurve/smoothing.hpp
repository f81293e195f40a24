#pragma once

// Batch local-linear evaluation. `smooth_at` is the OpenMP kernel used by
// the estimators; `serial::smooth_at` is the brute-force reference (one full
// pass over the data per point through local_linear_fit) kept for tests and
// the benchmark.

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "drcurve/kernels.hpp"

namespace drcurve {

/// Observations sorted by (treatment, response) so kernel windows are
/// contiguous ranges. The tie-break makes every downstream sum independent
/// of the input order.
class SortedDesign {
 public:
  SortedDesign(std::span<const double> treatments,
               std::span<const double> responses);

  std::span<const double> treatments() const { return treatments_; }
  std::span<const double> responses() const { return responses_; }
  /// Original index of each sorted position.
  std::span<const std::size_t> order() const { return order_; }
  std::size_t size() const { return treatments_.size(); }

  /// Half-open index range of sorted treatments in [center - h, center + h].
  std::pair<std::size_t, std::size_t> window(double center, double h) const;

 private:
  std::vector<double> treatments_;
  std::vector<double> responses_;
  std::vector<std::size_t> order_;
};

struct PointEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  /// (1,0) D^-1 (1,0)' K(0) / (n h): the hat diagonal when the point is an
  /// observed treatment.
  double self_weight = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
};

/// Local-linear intercepts at every point; infeasible (singular) points are
/// flagged instead of throwing. Parallel over points.
std::vector<PointEstimate> smooth_at(const SortedDesign& design,
                                     std::span<const double> points,
                                     const KernelSpec& spec);

namespace serial {

std::vector<PointEstimate> smooth_at(std::span<const double> treatments,
                                     std::span<const double> responses,
                                     std::span<const double> points,
                                     const KernelSpec& spec);

}  // namespace serial

/// OpenMP thread count used by the parallel kernels.
int thread_count();
void set_thread_count(int threads);

}  // namespace drcurve
