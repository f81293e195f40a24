#pragma once

// Simulation design: four standard normal covariates, a scaled beta
// treatment and a Bernoulli outcome, plus the Monte Carlo truth and the
// replication harness used to score the estimators.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "drcurve/bandwidth.hpp"
#include "drcurve/estimator.hpp"
#include "drcurve/kernels.hpp"
#include "drcurve/nuisance.hpp"

namespace drcurve::sim {

inline constexpr double kTreatmentScale = 20.0;
inline constexpr std::size_t kCovariates = 4;

/// lambda(l) = E(A | L = l) = 20 expit(-0.8 + 0.1 l1 + 0.1 l2 - 0.1 l3 + 0.2 l4).
double true_lambda(std::span<const double> l);
/// (A / 20) | L ~ Beta(lambda, 20 - lambda), density on the A scale.
double true_pi(std::span<const double> l, double a);
/// expit(1 + 0.2 l1 + 0.2 l2 + 0.3 l3 - 0.1 l4 + a (0.1 - 0.1 l1 + 0.1 l3 - 0.13^3 a^2)).
double true_mu(std::span<const double> l, double a);

std::shared_ptr<const BetaDensity> true_density();
std::shared_ptr<const LinearPredictorRegression> true_outcome();

/// Kang & Schafer transforms of a 4-covariate row.
std::array<double, 4> misspecify_covariates(std::span<const double> l);

enum class ModelSpec { correct, misspecified };
std::string_view to_string(ModelSpec m);
ModelSpec parse_model_spec(std::string_view name);

/// Beta mean model (precision and scale fixed at 20) and logistic outcome
/// model. Misspecification moves both onto the transformed covariates; the
/// outcome model also loses its a^3 term.
TreatmentModelSpec treatment_model(ModelSpec m);
OutcomeModelSpec outcome_model(ModelSpec m);
NuisanceSpec nuisance_spec(ModelSpec treatment, ModelSpec outcome);

/// SplitMix64 finalizer of base + index; distinct streams per replication.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// n draws, deterministic in `seed`. Support is (0, 20).
Dataset generate_data(std::size_t n, std::uint64_t seed);

struct McValue {
  double value;
  double std_error;
};

/// Monte Carlo truth over a fixed set of covariate draws shared by every
/// evaluation point (so the curves are smooth in a). Curve lookups
/// interpolate a cubic B-spline through a 101-point grid on [0, 20];
/// the *_exact members average over all draws at the requested point.
class TruthOracle {
 public:
  explicit TruthOracle(std::size_t draws = 1'000'000,
                       std::uint64_t seed = 0x5eed0f7e57ULL);

  std::size_t draws() const { return static_cast<std::size_t>(rows_.rows()); }
  const CovariateMatrix& covariate_draws() const { return rows_; }

  double theta(double a) const;
  double varpi(double a) const;
  McValue theta_exact(double a) const;
  McValue varpi_exact(double a) const;
  std::vector<double> theta_exact(std::span<const double> points) const;

  /// Quantile of the marginal treatment distribution (inverse of the
  /// integrated varpi).
  double treatment_quantile(double q) const;

  /// E over the draws of an arbitrary (l, a) -> value function.
  McValue average(const std::function<double(std::span<const double>, double)>& f,
                  double a) const;

  /// Shared instance with the default draw count, built on first use.
  static const TruthOracle& shared();

 private:
  CovariateMatrix rows_;
  std::vector<double> theta_grid_;
  std::vector<double> varpi_grid_;
  std::vector<double> cdf_points_;
  std::vector<double> cdf_values_;
  struct Splines;
  std::shared_ptr<const Splines> splines_;
};

/// theta(a) from `draws` fresh covariate draws of the given seed.
McValue theta_monte_carlo(double a, std::size_t draws, std::uint64_t seed);

enum class BandwidthMode { loo, oracle, fixed };
std::string_view to_string(BandwidthMode m);
BandwidthMode parse_bandwidth_mode(std::string_view name);

struct SimConfig {
  std::size_t n = 1000;
  std::size_t replications = 200;
  std::uint64_t base_seed = 1;
  ModelSpec treatment = ModelSpec::correct;
  ModelSpec outcome = ModelSpec::correct;
  std::vector<EstimatorKind> estimators{EstimatorKind::reg, EstimatorKind::ipw,
                                        EstimatorKind::dr};
  std::vector<BandwidthMode> bandwidth_modes{BandwidthMode::loo,
                                             BandwidthMode::oracle};
  double trim_fraction = 0.10;
  KernelFamily kernel = KernelFamily::epanechnikov;
  double h_min = 0.01;
  double h_max = 50.0;
  double fixed_bandwidth = 1.0;  // used by BandwidthMode::fixed
  std::size_t grid_points = 101;
  double max_failure_rate = 0.02;

  /// Throws InputError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults. Throws InputError.
  static SimConfig from_json(const nlohmann::json& j);
};

struct BandwidthSummary {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct CellResult {
  EstimatorKind kind;
  /// nullopt for reg, which has no bandwidth.
  std::optional<BandwidthMode> mode;
  /// Both x100.
  double integrated_bias = 0.0;
  double integrated_rmse = 0.0;
  double bias_mc_se = 0.0;
  double rmse_mc_se = 0.0;
  BandwidthSummary bandwidth;
  /// Pointwise mean estimate across replications on the metric grid.
  std::vector<double> mean_curve;

  /// "Reg", "IPW", "IPW*", "DR", "DR*"; "+fixed" suffix for fixed h.
  std::string label() const;
};

struct SimulationReport {
  SimConfig config;
  std::vector<double> grid;  // the trimmed-support metric grid
  std::vector<double> truth;
  std::vector<double> weights;  // renormalized trapezoid varpi weights
  std::vector<CellResult> cells;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<std::string> failure_messages;

  const CellResult* find(EstimatorKind kind,
                         std::optional<BandwidthMode> mode) const;
  nlohmann::json to_json() const;
  /// Table-1 layout: estimator, cell, n, bias, rmse, their MC standard
  /// errors, and the mean selected bandwidth.
  std::string to_csv() const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Throws StudyFailed when failed / S >= max_failure_rate.
SimulationReport run_study(const SimConfig& config, const TruthOracle& truth,
                           const ProgressFn& progress = {});

/// Metric grid on the trimmed support and its renormalized trapezoid
/// weights.
struct MetricGrid {
  std::vector<double> points;
  std::vector<double> weights;
};
MetricGrid metric_grid(const TruthOracle& truth, double trim_fraction,
                       std::size_t points);

struct AsymptoticTerms {
  double bias;      // theta''(a) h^2 nu2 / 2
  double variance;  // sigma^2(a)
  double second_derivative;
  /// sigma^2(a) R / varpi(a): asymptotic variance of sqrt(nh) theta_h(a).
  double scaled_variance;
};

/// pi_bar and mu_bar are the nuisance limits; defaults are the true models.
/// tau^2 = mu (1 - mu). varpi_bar and m_bar are averaged over the oracle
/// draws.
AsymptoticTerms asymptotic_diagnostics(
    double a, const KernelSpec& spec, const TruthOracle& truth,
    const ConditionalDensity* pi_bar = nullptr,
    const OutcomeRegression* mu_bar = nullptr);

}  // namespace drcurve::sim
