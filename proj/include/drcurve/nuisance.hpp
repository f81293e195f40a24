#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "drcurve/features.hpp"
#include "drcurve/glm.hpp"

namespace drcurve {

using CovariateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Support {
  double lower;
  double upper;

  double length() const { return upper - lower; }
  bool contains(double a) const { return a >= lower && a <= upper; }
};

/// n observations of (covariate row, treatment, outcome).
class Dataset {
 public:
  Dataset() = default;
  /// Validates on construction: matching n >= 2, finite values, treatments
  /// inside `support` (default: observed range). Throws InputError.
  Dataset(CovariateMatrix covariates, std::vector<double> treatment,
          std::vector<double> outcome,
          std::optional<Support> support = std::nullopt);

  std::size_t size() const { return treatment_.size(); }
  std::size_t covariate_count() const {
    return static_cast<std::size_t>(covariates_.cols());
  }
  const CovariateMatrix& covariates() const { return covariates_; }
  std::span<const double> row(std::size_t i) const {
    return {covariates_.data() + i * covariate_count(), covariate_count()};
  }
  std::span<const double> treatment() const { return treatment_; }
  std::span<const double> outcome() const { return outcome_; }
  const Support& support() const { return support_; }
  bool binary_outcome() const;

  /// Observations at the given indices, keeping the declared support.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  CovariateMatrix covariates_;
  std::vector<double> treatment_;
  std::vector<double> outcome_;
  Support support_{0.0, 0.0};
};

/// Per-row precomputation for an evaluator. `value` holds model-specific
/// cached quantities; `row` refers to the caller's covariate storage and
/// must outlive the params.
struct RowParams {
  std::array<double, kMaxTreatmentPower + 1> value{};
  std::span<const double> row;
};

/// Conditional treatment density pi(a | l).
class ConditionalDensity {
 public:
  virtual ~ConditionalDensity() = default;

  virtual RowParams prepare(std::span<const double> row) const = 0;
  virtual double evaluate(const RowParams& params, double a) const = 0;
  /// out[j] = evaluate(rows[j], a). Overridden where per-a work can be
  /// hoisted out of the row loop.
  virtual void evaluate_rows(std::span<const RowParams> rows, double a,
                             std::span<double> out) const;

  double operator()(std::span<const double> row, double a) const {
    return evaluate(prepare(row), a);
  }
};

/// Outcome regression mu(l, a).
class OutcomeRegression {
 public:
  virtual ~OutcomeRegression() = default;

  virtual RowParams prepare(std::span<const double> row) const = 0;
  virtual double evaluate(const RowParams& params, double a) const = 0;

  double operator()(std::span<const double> row, double a) const {
    return evaluate(prepare(row), a);
  }
};

/// mu(l, a) = link^-1(x(l, a)' coef).
class LinearPredictorRegression final : public OutcomeRegression {
 public:
  LinearPredictorRegression(FeatureMap design, Eigen::VectorXd coefficients,
                            Link link);

  RowParams prepare(std::span<const double> row) const override;
  double evaluate(const RowParams& params, double a) const override;

  const FeatureMap& design() const { return design_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  Link link() const { return link_; }

 private:
  FeatureMap design_;
  Eigen::VectorXd coefficients_;
  Link link_;
};

/// mu == 0; turns the doubly robust pseudo-outcome into the IPW one.
std::shared_ptr<const OutcomeRegression> zero_regression();

/// A / scale ~ Beta(precision * p(l), precision * (1 - p(l))) with
/// p(l) = expit(x(l)' coef), so E[A | l] = scale * p(l). Density carries
/// the 1/scale Jacobian.
class BetaDensity final : public ConditionalDensity {
 public:
  BetaDensity(FeatureMap mean_design, Eigen::VectorXd coefficients,
              double scale, double precision);

  RowParams prepare(std::span<const double> row) const override;
  double evaluate(const RowParams& params, double a) const override;
  void evaluate_rows(std::span<const RowParams> rows, double a,
                     std::span<double> out) const override;

  /// E[A | l].
  double mean(std::span<const double> row) const;
  double scale() const { return scale_; }
  double precision() const { return precision_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  const FeatureMap& design() const { return design_; }

 private:
  FeatureMap design_;
  Eigen::VectorXd coefficients_;
  double scale_;
  double precision_;
};

/// Univariate density tabulated on an equispaced grid, linear
/// interpolation, zero outside the grid.
class TabulatedDensity {
 public:
  TabulatedDensity(double lower, double step, std::vector<double> values);
  double operator()(double x) const;
  double lower() const { return lower_; }
  double upper() const {
    return lower_ + step_ * static_cast<double>(values_.size() - 1);
  }

 private:
  double lower_;
  double step_;
  std::vector<double> values_;
};

/// A = lambda(L) + gamma(L) eps with eps of unspecified density:
/// pi(a | l) = f_eps((a - lambda(l)) / gamma(l)) / gamma(l).
class LocationScaleDensity final : public ConditionalDensity {
 public:
  /// log_scale_coef models log of the squared residual, so the raw scale
  /// is g(l) = exp(x(l)' coef / 2). Residuals r / g(l) are standardized by
  /// (residual_center, residual_sd) before the density `residual` applies.
  LocationScaleDensity(FeatureMap mean_design, Eigen::VectorXd mean_coef,
                       FeatureMap scale_design, Eigen::VectorXd log_scale_coef,
                       double residual_center, double residual_sd,
                       TabulatedDensity residual);

  RowParams prepare(std::span<const double> row) const override;
  double evaluate(const RowParams& params, double a) const override;

  /// Location and scale of the standardized residual: A = location(l) +
  /// scale(l) * z with z of density residual_density().
  double location(std::span<const double> row) const;
  /// Throws DegenerateScale below 1e-8.
  double scale(std::span<const double> row) const;
  const TabulatedDensity& residual_density() const { return residual_; }

 private:
  FeatureMap mean_design_;
  Eigen::VectorXd mean_coef_;
  FeatureMap scale_design_;
  Eigen::VectorXd log_scale_coef_;
  double residual_center_;
  double residual_sd_;
  TabulatedDensity residual_;
};

/// Adapters for arbitrary callables (tests, user-supplied truth).
class FunctionDensity final : public ConditionalDensity {
 public:
  using Fn = std::function<double(std::span<const double>, double)>;
  explicit FunctionDensity(Fn fn) : fn_(std::move(fn)) {}
  RowParams prepare(std::span<const double> row) const override {
    return {{}, row};
  }
  double evaluate(const RowParams& p, double a) const override {
    return fn_(p.row, a);
  }

 private:
  Fn fn_;
};

class FunctionRegression final : public OutcomeRegression {
 public:
  using Fn = std::function<double(std::span<const double>, double)>;
  explicit FunctionRegression(Fn fn) : fn_(std::move(fn)) {}
  RowParams prepare(std::span<const double> row) const override {
    return {{}, row};
  }
  double evaluate(const RowParams& p, double a) const override {
    return fn_(p.row, a);
  }

 private:
  Fn fn_;
};

// --- fitting -------------------------------------------------------------

/// Design matrix with rows x(L_i, A_i).
Eigen::MatrixXd design_matrix(const Dataset& data, const FeatureMap& design);

std::shared_ptr<const LinearPredictorRegression> fit_outcome_regression(
    const Dataset& data, const FeatureMap& design, Link link);

/// Throws DomainError unless every treatment is strictly inside (0, scale),
/// std::invalid_argument if the mean design involves a.
std::shared_ptr<const BetaDensity> fit_treatment_density_beta(
    const Dataset& data, const FeatureMap& mean_design, double scale,
    double precision);

/// Least-squares mean, log-squared-residual scale model, Silverman-bandwidth
/// Gaussian KDE of the standardized residuals. Needs n >= 20.
std::shared_ptr<const LocationScaleDensity> fit_treatment_density_locscale(
    const Dataset& data, const FeatureMap& mean_design,
    const FeatureMap& scale_design);

// --- marginalization -----------------------------------------------------

/// The fitted quadruple (pi, mu, varpi, m). varpi and m are empirical
/// averages over the training covariate rows; pi is floored.
class NuisanceFit {
 public:
  NuisanceFit(std::shared_ptr<const ConditionalDensity> density,
              std::shared_ptr<const OutcomeRegression> outcome,
              CovariateMatrix training_rows, Support support, double floor);

  double floor() const { return floor_; }
  const Support& support() const { return support_; }
  const ConditionalDensity& raw_density() const { return *density_; }
  const OutcomeRegression& outcome_model() const { return *outcome_; }
  const CovariateMatrix& training_rows() const { return rows_; }

  /// max(pi(a | l), floor).
  double cond_density(std::span<const double> row, double a) const;
  double outcome_reg(std::span<const double> row, double a) const;

  double marginal_density(double a) const;
  double regression_curve(double a) const;
  /// Batch versions (parallel over points).
  std::vector<double> marginal_density(std::span<const double> points) const;
  std::vector<double> regression_curve(std::span<const double> points) const;

  /// Same treatment model with a different outcome regression.
  NuisanceFit with_outcome(
      std::shared_ptr<const OutcomeRegression> outcome) const;
  std::shared_ptr<const OutcomeRegression> outcome_ptr() const {
    return outcome_;
  }
  std::shared_ptr<const ConditionalDensity> density_ptr() const {
    return density_;
  }

 private:
  std::shared_ptr<const ConditionalDensity> density_;
  std::shared_ptr<const OutcomeRegression> outcome_;
  CovariateMatrix rows_;
  Support support_;
  double floor_;
};

/// 1e-3 / (support length).
double default_density_floor(const Support& support);

NuisanceFit marginalize(const Dataset& data,
                        std::shared_ptr<const ConditionalDensity> density,
                        std::shared_ptr<const OutcomeRegression> outcome,
                        std::optional<double> floor = std::nullopt);

/// Parallel batch averages: out[k] = P_n{max(pi(points[k] | L), floor)} and
/// P_n{mu(L, points[k])}.
std::vector<double> average_density(const ConditionalDensity& density,
                                    const CovariateMatrix& rows,
                                    std::span<const double> points,
                                    double floor);
std::vector<double> average_regression(const OutcomeRegression& outcome,
                                       const CovariateMatrix& rows,
                                       std::span<const double> points);

namespace serial {

/// Reference double loops through the one-shot operator().
std::vector<double> average_density(const ConditionalDensity& density,
                                    const CovariateMatrix& rows,
                                    std::span<const double> points,
                                    double floor);
std::vector<double> average_regression(const OutcomeRegression& outcome,
                                       const CovariateMatrix& rows,
                                       std::span<const double> points);

}  // namespace serial

// --- configuration -------------------------------------------------------

enum class TreatmentModelKind { beta, location_scale };

struct TreatmentModelSpec {
  TreatmentModelKind kind = TreatmentModelKind::location_scale;
  FeatureMap mean_design;
  FeatureMap scale_design;  // location_scale only
  double scale = 1.0;       // beta only: A / scale in (0, 1)
  double precision = 1.0;   // beta only: alpha + beta
};

struct OutcomeModelSpec {
  Link link = Link::identity;
  FeatureMap design;
};

struct NuisanceSpec {
  TreatmentModelSpec treatment;
  OutcomeModelSpec outcome;
  std::optional<double> floor;

  nlohmann::json to_json() const;
  /// Missing fields are filled from `defaults`. Throws InputError.
  static NuisanceSpec from_json(const nlohmann::json& j,
                                const NuisanceSpec& defaults);
};

/// Linear location-scale treatment model and a logistic (binary outcome)
/// or linear outcome model with terms 1, l_k, a, a^2, a*l_k.
NuisanceSpec default_nuisance_spec(const Dataset& data);

NuisanceFit fit_nuisance(const Dataset& data, const NuisanceSpec& spec);

}  // namespace drcurve
