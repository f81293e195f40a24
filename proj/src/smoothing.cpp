#include "drcurve/smoothing.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <omp.h>

#include "drcurve/errors.hpp"

namespace drcurve {

SortedDesign::SortedDesign(std::span<const double> treatments,
                           std::span<const double> responses) {
  if (treatments.size() != responses.size()) {
    throw std::invalid_argument("treatments and responses differ in length");
  }
  order_.resize(treatments.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    if (treatments[a] != treatments[b]) return treatments[a] < treatments[b];
    return responses[a] < responses[b];
  });
  treatments_.reserve(order_.size());
  responses_.reserve(order_.size());
  for (std::size_t idx : order_) {
    treatments_.push_back(treatments[idx]);
    responses_.push_back(responses[idx]);
  }
}

std::pair<std::size_t, std::size_t> SortedDesign::window(double center,
                                                         double h) const {
  const auto lo =
      std::lower_bound(treatments_.begin(), treatments_.end(), center - h);
  const auto hi = std::upper_bound(lo, treatments_.end(), center + h);
  return {static_cast<std::size_t>(lo - treatments_.begin()),
          static_cast<std::size_t>(hi - treatments_.begin())};
}

namespace {

PointEstimate estimate_in_window(const SortedDesign& design, double center,
                                 const KernelSpec& spec) {
  const double h = spec.bandwidth();
  // Slightly widened so the kernel, not the search, decides the boundary.
  const auto [lo, hi] = design.window(center, h * (1.0 + 1e-9));
  const auto t = design.treatments();
  const auto y = design.responses();
  DesignMoments m;
  double b0 = 0.0;
  double b1 = 0.0;
  for (std::size_t j = lo; j < hi; ++j) {
    const double u = (t[j] - center) / h;
    const double k = eval_kernel(u, spec.family()) / h;
    if (k == 0.0) continue;
    m.s0 += k;
    m.s1 += k * u;
    m.s2 += k * u * u;
    b0 += k * y[j];
    b1 += k * u * y[j];
  }
  const double n = static_cast<double>(design.size());
  m.s0 /= n;
  m.s1 /= n;
  m.s2 /= n;
  b0 /= n;
  b1 /= n;
  PointEstimate out;
  try {
    check_design(m, center);
  } catch (const SingularDesign&) {
    return out;
  }
  const double det = m.determinant();
  out.value = (m.s2 * b0 - m.s1 * b1) / det;
  out.self_weight = m.s2 / det * eval_kernel(0.0, spec.family()) / (n * h);
  out.feasible = true;
  return out;
}

}  // namespace

std::vector<PointEstimate> smooth_at(const SortedDesign& design,
                                     std::span<const double> points,
                                     const KernelSpec& spec) {
  std::vector<PointEstimate> out(points.size());
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[i] = estimate_in_window(design, points[i], spec);
  }
  return out;
}

namespace serial {

std::vector<PointEstimate> smooth_at(std::span<const double> treatments,
                                     std::span<const double> responses,
                                     std::span<const double> points,
                                     const KernelSpec& spec) {
  std::vector<PointEstimate> out(points.size());
  const double n = static_cast<double>(treatments.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      const LocalFit fit =
          local_linear_fit(treatments, responses, points[i], spec);
      const DesignMoments m = design_moments(treatments, points[i], spec);
      out[i].value = fit.intercept;
      out[i].self_weight = m.s2 / m.determinant() *
                           eval_kernel(0.0, spec.family()) /
                           (n * spec.bandwidth());
      out[i].feasible = true;
    } catch (const SingularDesign&) {
    }
  }
  return out;
}

}  // namespace serial

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace drcurve
