#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace drcurve {

/// Fixed covariate transformations applied before the design terms.
enum class CovariateTransform {
  none,
  /// Kang & Schafer (2007) misspecification transforms, 4 covariates:
  /// (exp(l1/2), l2/(1+exp(l1))+10, (l1 l3/25+0.6)^3, (l2+l4+20)^2).
  kang_schafer,
};

std::array<double, 4> kang_schafer(std::span<const double> l);

/// One design column: covariate(index) * a^power. covariate == -1 is the
/// constant 1.
struct Term {
  int covariate = -1;
  int a_power = 0;

  /// "1", "l2", "a", "a^3", "a*l1", "a^2*l3" (1-based covariate indices).
  static Term parse(std::string_view text);
  std::string name() const;
  bool operator==(const Term&) const = default;
};

inline constexpr int kMaxTreatmentPower = 7;

/// Declarative design: a covariate transform followed by a list of terms.
/// Serialized as {"transform": "none", "terms": ["1", "l1", "a*l1", ...]}.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(CovariateTransform transform, std::vector<Term> terms);
  static FeatureMap from_strings(CovariateTransform transform,
                                 const std::vector<std::string>& terms);

  CovariateTransform transform() const { return transform_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  int max_a_power() const;
  /// Number of covariates the map needs (largest index + 1, or 4 for
  /// kang_schafer).
  std::size_t required_covariates() const;

  /// Transformed covariate row (identity for `none`).
  std::vector<double> transform_row(std::span<const double> row) const;
  /// Writes the design vector x(l, a) into `out` (size() entries).
  void expand(std::span<const double> row, double a,
              std::span<double> out) const;
  /// Coefficients c_k of the linear predictor sum_k c_k a^k for this row.
  std::array<double, kMaxTreatmentPower + 1> row_polynomial(
      std::span<const double> row, std::span<const double> coef) const;

  nlohmann::json to_json() const;
  /// Throws InputError on malformed input.
  static FeatureMap from_json(const nlohmann::json& j);

 private:
  CovariateTransform transform_ = CovariateTransform::none;
  std::vector<Term> terms_;
};

/// Intercept plus every raw covariate: "1", "l1", ..., "lp".
FeatureMap linear_covariates(std::size_t p);

}  // namespace drcurve
