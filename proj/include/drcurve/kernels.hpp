#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace drcurve {

enum class KernelFamily { epanechnikov, uniform, truncated_gaussian };

std::string_view to_string(KernelFamily family);
/// Throws InputError for unknown names.
KernelFamily parse_kernel_family(std::string_view name);

/// Kernel family plus bandwidth; defines K_ha(t) = K((t - a) / h) / h.
class KernelSpec {
 public:
  /// Throws std::invalid_argument unless bandwidth is finite and > 0.
  KernelSpec(KernelFamily family, double bandwidth);
  explicit KernelSpec(double bandwidth)
      : KernelSpec(KernelFamily::epanechnikov, bandwidth) {}

  KernelFamily family() const { return family_; }
  double bandwidth() const { return bandwidth_; }

  /// K_ha(t).
  double weight(double t, double center) const;

 private:
  KernelFamily family_;
  double bandwidth_;
};

/// Standard kernel K(u); zero for |u| > 1.
double eval_kernel(double u, KernelFamily family);
inline double eval_kernel(double u, const KernelSpec& spec) {
  return eval_kernel(u, spec.family());
}

struct KernelMoments {
  double second_moment;  // integral of u^2 K(u)
  double roughness;      // integral of K(u)^2
};

KernelMoments kernel_moments(KernelFamily family);
inline KernelMoments kernel_moments(const KernelSpec& spec) {
  return kernel_moments(spec.family());
}

/// Local design g_ha(t) = (1, (t - a) / h).
struct LocalBasis {
  double center;
  double bandwidth;

  std::array<double, 2> operator()(double t) const {
    return {1.0, (t - center) / bandwidth};
  }
};

/// Minimizer of P_n[K_ha(A) {xi - g_ha(A)' beta}^2]. `intercept` is the
/// curve estimate at the center; `slope` is in g-basis units (per h).
struct LocalFit {
  double intercept;
  double slope;
};

/// Kernel-weighted moments S_k = P_n{K_ha(A) u^k}, u = (A - a) / h, for
/// k = 0, 1, 2. These are the entries of P_n{g K g'}.
struct DesignMoments {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;

  double determinant() const { return s0 * s2 - s1 * s1; }
};

DesignMoments design_moments(std::span<const double> treatments, double center,
                             const KernelSpec& spec);

/// Throws SingularDesign if det < 1e-12 * (trace / 2)^2.
void check_design(const DesignMoments& m, double center);

LocalFit local_linear_fit(std::span<const double> treatments,
                          std::span<const double> responses, double center,
                          const KernelSpec& spec);

/// Weights w with intercept = sum_i w_i * response_i.
std::vector<double> smoother_row(std::span<const double> treatments,
                                 double center, const KernelSpec& spec);

/// i-th diagonal of the hat matrix, (1,0) D^-1 (1,0)' K(0) / (n h) with D
/// evaluated at the i-th treatment value.
double hat_diagonal(std::span<const double> treatments, std::size_t i,
                    const KernelSpec& spec);

}  // namespace drcurve
