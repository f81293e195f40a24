#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "drcurve/kernels.hpp"
#include "drcurve/nuisance.hpp"

namespace drcurve {

struct PseudoOutcomes {
  std::vector<double> values;
  /// Observations whose pi(A_i | L_i) was raised to the density floor.
  std::size_t floored_count = 0;
};

/// xi_i = (Y_i - mu(L_i, A_i)) / (pi(A_i | L_i) / varpi(A_i)) + m(A_i).
PseudoOutcomes compute_pseudo(const Dataset& data, const NuisanceFit& fit);

struct InfluenceValues {
  /// phi_i = D^-1 [g K (xi_i - g'beta) + int g K (mu(L_i, t) - m(t)) varpi(t) dt].
  std::vector<std::array<double, 2>> phi;
  /// D = P_n{g K g'}.
  Eigen::Matrix2d design;
  /// The integral term alone (before D^-1), per observation.
  std::vector<std::array<double, 2>> integral;

  /// (1,1) entry of P_n{phi phi'}.
  double variance_11() const;
};

/// Influence-function values at center `a` for the local fit `beta`. The
/// integral over [a - h, a + h] (clipped to the support) uses composite
/// Simpson with `panels` panels. Throws SingularDesign.
InfluenceValues influence_values(const Dataset& data, const NuisanceFit& fit,
                                 const PseudoOutcomes& pseudo, double a,
                                 const KernelSpec& spec, const LocalFit& beta,
                                 int panels = 200);

}  // namespace drcurve
