#include "drcurve/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "drcurve/errors.hpp"

namespace drcurve {

namespace {

// 2 * Phi(1) - 1
const double kTruncatedGaussianMass = std::erf(1.0 / std::numbers::sqrt2);

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov:
      return "epanechnikov";
    case KernelFamily::uniform:
      return "uniform";
    case KernelFamily::truncated_gaussian:
      return "truncated_gaussian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "uniform") return KernelFamily::uniform;
  if (name == "truncated_gaussian" || name == "gaussian")
    return KernelFamily::truncated_gaussian;
  throw InputError("unknown kernel '" + std::string(name) +
                   "' (expected epanechnikov, uniform or truncated_gaussian)");
}

KernelSpec::KernelSpec(KernelFamily family, double bandwidth)
    : family_(family), bandwidth_(bandwidth) {
  if (!(std::isfinite(bandwidth) && bandwidth > 0.0)) {
    throw std::invalid_argument("kernel bandwidth must be finite and > 0");
  }
}

double KernelSpec::weight(double t, double center) const {
  return eval_kernel((t - center) / bandwidth_, family_) / bandwidth_;
}

double eval_kernel(double u, KernelFamily family) {
  if (!(std::abs(u) <= 1.0)) return 0.0;
  switch (family) {
    case KernelFamily::epanechnikov:
      return 0.75 * (1.0 - u * u);
    case KernelFamily::uniform:
      return 0.5;
    case KernelFamily::truncated_gaussian:
      return std::exp(-0.5 * u * u) /
             (std::sqrt(2.0 * std::numbers::pi) * kTruncatedGaussianMass);
  }
  return 0.0;
}

KernelMoments kernel_moments(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov:
      return {0.2, 0.6};
    case KernelFamily::uniform:
      return {1.0 / 3.0, 0.5};
    case KernelFamily::truncated_gaussian: {
      // int_{-1}^{1} u^2 phi = (2 Phi(1) - 1) - 2 phi(1)
      // int_{-1}^{1} phi^2 = erf(1) / (2 sqrt(pi))
      const double c = kTruncatedGaussianMass;
      const double phi1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
      return {(c - 2.0 * phi1) / c,
              std::erf(1.0) / (2.0 * std::sqrt(std::numbers::pi) * c * c)};
    }
  }
  return {0.0, 0.0};
}

DesignMoments design_moments(std::span<const double> treatments, double center,
                             const KernelSpec& spec) {
  DesignMoments m;
  const double h = spec.bandwidth();
  for (double t : treatments) {
    const double u = (t - center) / h;
    const double k = eval_kernel(u, spec.family()) / h;
    if (k == 0.0) continue;
    m.s0 += k;
    m.s1 += k * u;
    m.s2 += k * u * u;
  }
  const double n = static_cast<double>(treatments.size());
  m.s0 /= n;
  m.s1 /= n;
  m.s2 /= n;
  return m;
}

void check_design(const DesignMoments& m, double center) {
  const double half_trace = 0.5 * (m.s0 + m.s2);
  if (!(m.s0 > 0.0) || !(m.determinant() > 1e-12 * half_trace * half_trace)) {
    throw SingularDesign("singular local design at a = " +
                         std::to_string(center) +
                         " (fewer than 2 distinct treatments in the window)");
  }
}

LocalFit local_linear_fit(std::span<const double> treatments,
                          std::span<const double> responses, double center,
                          const KernelSpec& spec) {
  if (treatments.size() != responses.size()) {
    throw std::invalid_argument("treatments and responses differ in length");
  }
  const DesignMoments m = design_moments(treatments, center, spec);
  check_design(m, center);
  const double h = spec.bandwidth();
  double b0 = 0.0;
  double b1 = 0.0;
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    const double u = (treatments[i] - center) / h;
    const double k = eval_kernel(u, spec.family()) / h;
    if (k == 0.0) continue;
    b0 += k * responses[i];
    b1 += k * u * responses[i];
  }
  const double n = static_cast<double>(treatments.size());
  b0 /= n;
  b1 /= n;
  const double det = m.determinant();
  return {(m.s2 * b0 - m.s1 * b1) / det, (m.s0 * b1 - m.s1 * b0) / det};
}

std::vector<double> smoother_row(std::span<const double> treatments,
                                 double center, const KernelSpec& spec) {
  const DesignMoments m = design_moments(treatments, center, spec);
  check_design(m, center);
  const double h = spec.bandwidth();
  const double scale = 1.0 / (static_cast<double>(treatments.size()) *
                              m.determinant());
  std::vector<double> w(treatments.size(), 0.0);
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    const double u = (treatments[i] - center) / h;
    const double k = eval_kernel(u, spec.family()) / h;
    w[i] = k * (m.s2 - m.s1 * u) * scale;
  }
  return w;
}

double hat_diagonal(std::span<const double> treatments, std::size_t i,
                    const KernelSpec& spec) {
  if (i >= treatments.size()) throw std::out_of_range("hat_diagonal index");
  const double center = treatments[i];
  const DesignMoments m = design_moments(treatments, center, spec);
  check_design(m, center);
  const double n = static_cast<double>(treatments.size());
  return m.s2 / m.determinant() * eval_kernel(0.0, spec.family()) /
         (n * spec.bandwidth());
}

}  // namespace drcurve
