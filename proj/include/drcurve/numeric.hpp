#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace drcurve {

/// Neumaier compensated sum. Order-stable to well below 1e-12 for the
/// sample sizes used here.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Mean of a sequence. Returns the common value bit-exactly when every
/// element is identical.
inline double stable_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  CompensatedSum s;
  bool constant = true;
  for (double x : xs) {
    s.add(x);
    constant = constant && (x == xs[0]);
  }
  if (constant) return xs[0];
  return s.value() / static_cast<double>(xs.size());
}

inline double expit(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace drcurve
