#include "drcurve/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "drcurve/errors.hpp"
#include "drcurve/numeric.hpp"

namespace drcurve {

// --- Dataset -------------------------------------------------------------

Dataset::Dataset(CovariateMatrix covariates, std::vector<double> treatment,
                 std::vector<double> outcome, std::optional<Support> support)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)) {
  const std::size_t n = treatment_.size();
  if (n < 2) throw InputError("dataset needs at least 2 observations");
  if (outcome_.size() != n || static_cast<std::size_t>(covariates_.rows()) != n) {
    throw InputError("covariates, treatment and outcome differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(treatment_[i])) {
      throw InputError("non-finite treatment at row " + std::to_string(i + 1));
    }
    if (!std::isfinite(outcome_[i])) {
      throw InputError("non-finite outcome at row " + std::to_string(i + 1));
    }
  }
  if (!covariates_.allFinite()) throw InputError("non-finite covariate value");
  if (support) {
    support_ = *support;
    for (std::size_t i = 0; i < n; ++i) {
      if (!support_.contains(treatment_[i])) {
        throw InputError("treatment at row " + std::to_string(i + 1) +
                         " outside the declared support");
      }
    }
  } else {
    const auto [lo, hi] = std::minmax_element(treatment_.begin(), treatment_.end());
    support_ = {*lo, *hi};
  }
}

bool Dataset::binary_outcome() const {
  return std::all_of(outcome_.begin(), outcome_.end(),
                     [](double y) { return y == 0.0 || y == 1.0; });
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  CovariateMatrix cov(static_cast<Eigen::Index>(indices.size()),
                      covariates_.cols());
  std::vector<double> a;
  std::vector<double> y;
  a.reserve(indices.size());
  y.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    cov.row(static_cast<Eigen::Index>(k)) =
        covariates_.row(static_cast<Eigen::Index>(indices[k]));
    a.push_back(treatment_[indices[k]]);
    y.push_back(outcome_[indices[k]]);
  }
  return Dataset(std::move(cov), std::move(a), std::move(y), support_);
}

// --- evaluators ----------------------------------------------------------

void ConditionalDensity::evaluate_rows(std::span<const RowParams> rows,
                                       double a, std::span<double> out) const {
  for (std::size_t j = 0; j < rows.size(); ++j) out[j] = evaluate(rows[j], a);
}

LinearPredictorRegression::LinearPredictorRegression(FeatureMap design,
                                                     Eigen::VectorXd coefficients,
                                                     Link link)
    : design_(std::move(design)),
      coefficients_(std::move(coefficients)),
      link_(link) {
  if (static_cast<std::size_t>(coefficients_.size()) != design_.size()) {
    throw std::invalid_argument("coefficient count does not match design");
  }
}

RowParams LinearPredictorRegression::prepare(std::span<const double> row) const {
  if (row.size() < design_.required_covariates()) {
    throw std::invalid_argument("covariate row shorter than the design needs");
  }
  return {design_.row_polynomial(
              row, {coefficients_.data(),
                    static_cast<std::size_t>(coefficients_.size())}),
          row};
}

double LinearPredictorRegression::evaluate(const RowParams& params,
                                           double a) const {
  double eta = 0.0;
  for (int k = kMaxTreatmentPower; k >= 0; --k) {
    eta = eta * a + params.value[static_cast<std::size_t>(k)];
  }
  return link_ == Link::logistic ? expit(eta) : eta;
}

std::shared_ptr<const OutcomeRegression> zero_regression() {
  static const auto zero = std::make_shared<const LinearPredictorRegression>(
      FeatureMap{}, Eigen::VectorXd{}, Link::identity);
  return zero;
}

BetaDensity::BetaDensity(FeatureMap mean_design, Eigen::VectorXd coefficients,
                         double scale, double precision)
    : design_(std::move(mean_design)),
      coefficients_(std::move(coefficients)),
      scale_(scale),
      precision_(precision) {
  if (design_.max_a_power() != 0) {
    throw std::invalid_argument("treatment mean design cannot involve a");
  }
  if (static_cast<std::size_t>(coefficients_.size()) != design_.size()) {
    throw std::invalid_argument("coefficient count does not match design");
  }
  if (!(scale_ > 0.0) || !(precision_ > 0.0)) {
    throw std::invalid_argument("beta scale and precision must be > 0");
  }
}

RowParams BetaDensity::prepare(std::span<const double> row) const {
  if (row.size() < design_.required_covariates()) {
    throw std::invalid_argument("covariate row shorter than the design needs");
  }
  const auto poly = design_.row_polynomial(
      row, {coefficients_.data(), static_cast<std::size_t>(coefficients_.size())});
  const double p = expit(poly[0]);
  const double alpha = precision_ * p;
  const double beta = precision_ * (1.0 - p);
  RowParams out;
  out.row = row;
  out.value[0] = alpha;
  out.value[1] = beta;
  out.value[2] = boost::math::lgamma(alpha) + boost::math::lgamma(beta) -
                 boost::math::lgamma(precision_) + std::log(scale_);
  return out;
}

double BetaDensity::evaluate(const RowParams& params, double a) const {
  if (!(a > 0.0 && a < scale_)) return 0.0;
  const double x = a / scale_;
  return std::exp((params.value[0] - 1.0) * std::log(x) +
                  (params.value[1] - 1.0) * std::log1p(-x) - params.value[2]);
}

void BetaDensity::evaluate_rows(std::span<const RowParams> rows, double a,
                                std::span<double> out) const {
  if (!(a > 0.0 && a < scale_)) {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(rows.size()), 0.0);
    return;
  }
  const double x = a / scale_;
  const double log_x = std::log(x);
  const double log_1mx = std::log1p(-x);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& v = rows[j].value;
    out[j] = std::exp((v[0] - 1.0) * log_x + (v[1] - 1.0) * log_1mx - v[2]);
  }
}

double BetaDensity::mean(std::span<const double> row) const {
  const auto poly = design_.row_polynomial(
      row, {coefficients_.data(), static_cast<std::size_t>(coefficients_.size())});
  return scale_ * expit(poly[0]);
}

TabulatedDensity::TabulatedDensity(double lower, double step,
                                   std::vector<double> values)
    : lower_(lower), step_(step), values_(std::move(values)) {
  if (values_.size() < 2 || !(step_ > 0.0)) {
    throw std::invalid_argument("tabulated density needs >= 2 points");
  }
}

double TabulatedDensity::operator()(double x) const {
  const double pos = (x - lower_) / step_;
  if (!(pos >= 0.0)) return 0.0;
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= values_.size()) {
    return k + 1 == values_.size() && pos == static_cast<double>(k)
               ? values_.back()
               : 0.0;
  }
  const double frac = pos - static_cast<double>(k);
  return values_[k] + frac * (values_[k + 1] - values_[k]);
}

LocationScaleDensity::LocationScaleDensity(
    FeatureMap mean_design, Eigen::VectorXd mean_coef, FeatureMap scale_design,
    Eigen::VectorXd log_scale_coef, double residual_center, double residual_sd,
    TabulatedDensity residual)
    : mean_design_(std::move(mean_design)),
      mean_coef_(std::move(mean_coef)),
      scale_design_(std::move(scale_design)),
      log_scale_coef_(std::move(log_scale_coef)),
      residual_center_(residual_center),
      residual_sd_(residual_sd),
      residual_(std::move(residual)) {
  if (mean_design_.max_a_power() != 0 || scale_design_.max_a_power() != 0) {
    throw std::invalid_argument("location-scale designs cannot involve a");
  }
}

double LocationScaleDensity::location(std::span<const double> row) const {
  const auto mean = mean_design_.row_polynomial(
      row, {mean_coef_.data(), static_cast<std::size_t>(mean_coef_.size())});
  const auto log_sq = scale_design_.row_polynomial(
      row, {log_scale_coef_.data(),
            static_cast<std::size_t>(log_scale_coef_.size())});
  return mean[0] + residual_center_ * std::exp(0.5 * log_sq[0]);
}

double LocationScaleDensity::scale(std::span<const double> row) const {
  const auto log_sq = scale_design_.row_polynomial(
      row, {log_scale_coef_.data(),
            static_cast<std::size_t>(log_scale_coef_.size())});
  const double s = residual_sd_ * std::exp(0.5 * log_sq[0]);
  if (!(s >= 1e-8)) {
    throw DegenerateScale("estimated treatment scale " + std::to_string(s) +
                          " below 1e-8");
  }
  return s;
}

RowParams LocationScaleDensity::prepare(std::span<const double> row) const {
  if (row.size() < std::max(mean_design_.required_covariates(),
                            scale_design_.required_covariates())) {
    throw std::invalid_argument("covariate row shorter than the design needs");
  }
  RowParams out;
  out.row = row;
  out.value[0] = location(row);
  out.value[1] = scale(row);
  return out;
}

double LocationScaleDensity::evaluate(const RowParams& params, double a) const {
  return residual_((a - params.value[0]) / params.value[1]) / params.value[1];
}

// --- fitting -------------------------------------------------------------

Eigen::MatrixXd design_matrix(const Dataset& data, const FeatureMap& design) {
  if (data.covariate_count() < design.required_covariates()) {
    throw InputError("design needs " +
                     std::to_string(design.required_covariates()) +
                     " covariates but the data has " +
                     std::to_string(data.covariate_count()));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()),
                    static_cast<Eigen::Index>(design.size()));
  std::vector<double> buf(design.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    design.expand(data.row(i), data.treatment()[i], buf);
    for (std::size_t k = 0; k < buf.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = buf[k];
    }
  }
  return x;
}

std::shared_ptr<const LinearPredictorRegression> fit_outcome_regression(
    const Dataset& data, const FeatureMap& design, Link link) {
  const Eigen::MatrixXd x = design_matrix(data, design);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      data.outcome().data(), static_cast<Eigen::Index>(data.size()));
  const GlmResult fit = fit_glm(x, y, link);
  return std::make_shared<const LinearPredictorRegression>(
      design, fit.coefficients, link);
}

std::shared_ptr<const BetaDensity> fit_treatment_density_beta(
    const Dataset& data, const FeatureMap& mean_design, double scale,
    double precision) {
  if (mean_design.max_a_power() != 0) {
    throw std::invalid_argument("treatment mean design cannot involve a");
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double a = data.treatment()[i];
    if (!(a > 0.0 && a < scale)) {
      throw DomainError("treatment " + std::to_string(a) + " at row " +
                        std::to_string(i + 1) + " outside (0, " +
                        std::to_string(scale) + ")");
    }
    y(static_cast<Eigen::Index>(i)) = a / scale;
  }
  const GlmResult fit = fit_glm(design_matrix(data, mean_design), y, Link::logistic);
  return std::make_shared<const BetaDensity>(mean_design, fit.coefficients,
                                             scale, precision);
}

std::shared_ptr<const LocationScaleDensity> fit_treatment_density_locscale(
    const Dataset& data, const FeatureMap& mean_design,
    const FeatureMap& scale_design) {
  const std::size_t n = data.size();
  if (n < 20) {
    throw std::invalid_argument("location-scale density needs n >= 20");
  }
  if (mean_design.max_a_power() != 0 || scale_design.max_a_power() != 0) {
    throw std::invalid_argument("location-scale designs cannot involve a");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd a =
      Eigen::Map<const Eigen::VectorXd>(data.treatment().data(), rows);
  const Eigen::MatrixXd xm = design_matrix(data, mean_design);
  const Eigen::VectorXd mean_coef = fit_glm(xm, a, Link::identity).coefficients;
  const Eigen::VectorXd resid = a - xm * mean_coef;

  const double mean_sq = resid.squaredNorm() / static_cast<double>(n);
  if (!(mean_sq > 0.0)) throw DegenerateScale("treatment residuals are all zero");
  Eigen::VectorXd log_sq(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    log_sq(i) = std::log(resid(i) * resid(i) + 1e-12 * mean_sq);
  }
  const Eigen::MatrixXd xs = design_matrix(data, scale_design);
  const Eigen::VectorXd log_scale_coef =
      fit_glm(xs, log_sq, Link::identity).coefficients;
  const Eigen::VectorXd raw_scale = (0.5 * (xs * log_scale_coef)).array().exp();

  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    eps[i] = resid(k) / raw_scale(k);
  }
  const double center = stable_mean(eps);
  CompensatedSum ss;
  for (double e : eps) ss.add((e - center) * (e - center));
  const double sd = std::sqrt(ss.value() / static_cast<double>(n - 1));
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!(sd * raw_scale(i) >= 1e-8)) {
      throw DegenerateScale("estimated treatment scale below 1e-8 at row " +
                            std::to_string(i + 1));
    }
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (eps[i] - center) / sd;

  // Silverman's rule of thumb on the standardized residuals (sd == 1).
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < n ? sorted[k] + frac * (sorted[k + 1] - sorted[k]) : sorted[k];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(1.0, iqr / 1.34) : 1.0;
  const double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

  constexpr std::size_t kIntervals = 4096;
  const double lower = sorted.front() - 6.0 * bw;
  const double upper = sorted.back() + 6.0 * bw;
  const double step = (upper - lower) / static_cast<double>(kIntervals);
  std::vector<double> values(kIntervals + 1, 0.0);
  const double norm = 1.0 / (static_cast<double>(n) * bw *
                             std::sqrt(2.0 * std::numbers::pi));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t g = 0; g <= static_cast<std::ptrdiff_t>(kIntervals); ++g) {
    const double x = lower + step * static_cast<double>(g);
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * bw);
    const auto hi = std::upper_bound(lo, sorted.end(), x + 8.0 * bw);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (x - *it) / bw;
      acc += std::exp(-0.5 * u * u);
    }
    values[static_cast<std::size_t>(g)] = acc * norm;
  }
  return std::make_shared<const LocationScaleDensity>(
      mean_design, mean_coef, scale_design, log_scale_coef, center, sd,
      TabulatedDensity(lower, step, std::move(values)));
}

// --- marginalization -----------------------------------------------------

namespace {

std::vector<RowParams> prepare_all(const auto& model,
                                   const CovariateMatrix& rows) {
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
  const auto p = static_cast<std::size_t>(rows.cols());
  std::vector<RowParams> params(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    params[static_cast<std::size_t>(j)] = model.prepare(
        {rows.data() + static_cast<std::size_t>(j) * p, p});
  }
  return params;
}

}  // namespace

std::vector<double> average_density(const ConditionalDensity& density,
                                    const CovariateMatrix& rows,
                                    std::span<const double> points,
                                    double floor) {
  const std::vector<RowParams> params = prepare_all(density, rows);
  std::vector<double> out(points.size());
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel
  {
    std::vector<double> buf(params.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      density.evaluate_rows(params, points[k], buf);
      for (double& v : buf) v = std::max(v, floor);
      out[static_cast<std::size_t>(k)] = stable_mean(buf);
    }
  }
  return out;
}

std::vector<double> average_regression(const OutcomeRegression& outcome,
                                       const CovariateMatrix& rows,
                                       std::span<const double> points) {
  const std::vector<RowParams> params = prepare_all(outcome, rows);
  std::vector<double> out(points.size());
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel
  {
    std::vector<double> buf(params.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      for (std::size_t j = 0; j < params.size(); ++j) {
        buf[j] = outcome.evaluate(params[j], points[k]);
      }
      out[static_cast<std::size_t>(k)] = stable_mean(buf);
    }
  }
  return out;
}

namespace serial {

std::vector<double> average_density(const ConditionalDensity& density,
                                    const CovariateMatrix& rows,
                                    std::span<const double> points,
                                    double floor) {
  const auto p = static_cast<std::size_t>(rows.cols());
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<double> out;
  std::vector<double> vals(n);
  for (double a : points) {
    for (std::size_t j = 0; j < n; ++j) {
      vals[j] = std::max(density({rows.data() + j * p, p}, a), floor);
    }
    out.push_back(stable_mean(vals));
  }
  return out;
}

std::vector<double> average_regression(const OutcomeRegression& outcome,
                                       const CovariateMatrix& rows,
                                       std::span<const double> points) {
  const auto p = static_cast<std::size_t>(rows.cols());
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<double> out;
  std::vector<double> vals(n);
  for (double a : points) {
    for (std::size_t j = 0; j < n; ++j) {
      vals[j] = outcome({rows.data() + j * p, p}, a);
    }
    out.push_back(stable_mean(vals));
  }
  return out;
}

}  // namespace serial

NuisanceFit::NuisanceFit(std::shared_ptr<const ConditionalDensity> density,
                         std::shared_ptr<const OutcomeRegression> outcome,
                         CovariateMatrix training_rows, Support support,
                         double floor)
    : density_(std::move(density)),
      outcome_(std::move(outcome)),
      rows_(std::move(training_rows)),
      support_(support),
      floor_(floor) {
  if (!density_ || !outcome_) {
    throw std::invalid_argument("nuisance evaluators must be non-null");
  }
  if (!(floor_ > 0.0)) throw std::invalid_argument("density floor must be > 0");
  if (rows_.rows() < 1) throw std::invalid_argument("no training rows");
}

double NuisanceFit::cond_density(std::span<const double> row, double a) const {
  return std::max((*density_)(row, a), floor_);
}

double NuisanceFit::outcome_reg(std::span<const double> row, double a) const {
  return (*outcome_)(row, a);
}

double NuisanceFit::marginal_density(double a) const {
  return average_density(*density_, rows_, std::span<const double>(&a, 1),
                         floor_)[0];
}

double NuisanceFit::regression_curve(double a) const {
  return average_regression(*outcome_, rows_, std::span<const double>(&a, 1))[0];
}

std::vector<double> NuisanceFit::marginal_density(
    std::span<const double> points) const {
  return average_density(*density_, rows_, points, floor_);
}

std::vector<double> NuisanceFit::regression_curve(
    std::span<const double> points) const {
  return average_regression(*outcome_, rows_, points);
}

NuisanceFit NuisanceFit::with_outcome(
    std::shared_ptr<const OutcomeRegression> outcome) const {
  return NuisanceFit(density_, std::move(outcome), rows_, support_, floor_);
}

double default_density_floor(const Support& support) {
  const double len = support.length();
  return len > 0.0 ? 1e-3 / len : 1e-3;
}

NuisanceFit marginalize(const Dataset& data,
                        std::shared_ptr<const ConditionalDensity> density,
                        std::shared_ptr<const OutcomeRegression> outcome,
                        std::optional<double> floor) {
  return NuisanceFit(std::move(density), std::move(outcome), data.covariates(),
                     data.support(),
                     floor.value_or(default_density_floor(data.support())));
}

// --- configuration -------------------------------------------------------

namespace {

double positive_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number() || !(j[key].get<double>() > 0.0)) {
    throw InputError(std::string("'") + key + "' must be a positive number");
  }
  return j[key].get<double>();
}

}  // namespace

nlohmann::json NuisanceSpec::to_json() const {
  nlohmann::json t;
  if (treatment.kind == TreatmentModelKind::beta) {
    t = {{"model", "beta"},
         {"mean_design", treatment.mean_design.to_json()},
         {"scale", treatment.scale},
         {"precision", treatment.precision}};
  } else {
    t = {{"model", "location_scale"},
         {"mean_design", treatment.mean_design.to_json()},
         {"scale_design", treatment.scale_design.to_json()}};
  }
  nlohmann::json j = {
      {"treatment", t},
      {"outcome",
       {{"link", outcome.link == Link::logistic ? "logistic" : "identity"},
        {"design", outcome.design.to_json()}}}};
  j["floor"] = floor ? nlohmann::json(*floor) : nlohmann::json(nullptr);
  return j;
}

NuisanceSpec NuisanceSpec::from_json(const nlohmann::json& j,
                                     const NuisanceSpec& defaults) {
  if (!j.is_object()) throw InputError("'nuisance' must be an object");
  NuisanceSpec spec = defaults;
  if (j.contains("treatment")) {
    const auto& t = j["treatment"];
    if (!t.is_object()) throw InputError("'nuisance.treatment' must be an object");
    if (t.contains("model")) {
      if (!t["model"].is_string()) throw InputError("treatment.model must be a string");
      const auto model = t["model"].get<std::string>();
      if (model == "beta") {
        spec.treatment.kind = TreatmentModelKind::beta;
      } else if (model == "location_scale") {
        spec.treatment.kind = TreatmentModelKind::location_scale;
      } else {
        throw InputError("unknown treatment model '" + model + "'");
      }
    }
    if (t.contains("mean_design")) {
      spec.treatment.mean_design = FeatureMap::from_json(t["mean_design"]);
    }
    if (t.contains("scale_design")) {
      spec.treatment.scale_design = FeatureMap::from_json(t["scale_design"]);
    }
    spec.treatment.scale = positive_number(t, "scale", spec.treatment.scale);
    spec.treatment.precision =
        positive_number(t, "precision", spec.treatment.precision);
    if (spec.treatment.mean_design.max_a_power() != 0 ||
        spec.treatment.scale_design.max_a_power() != 0) {
      throw InputError("treatment designs cannot involve a");
    }
  }
  if (j.contains("outcome")) {
    const auto& o = j["outcome"];
    if (!o.is_object()) throw InputError("'nuisance.outcome' must be an object");
    if (o.contains("link")) {
      if (!o["link"].is_string()) throw InputError("outcome.link must be a string");
      const auto link = o["link"].get<std::string>();
      if (link == "logistic") {
        spec.outcome.link = Link::logistic;
      } else if (link == "identity") {
        spec.outcome.link = Link::identity;
      } else {
        throw InputError("unknown outcome link '" + link + "'");
      }
    }
    if (o.contains("design")) spec.outcome.design = FeatureMap::from_json(o["design"]);
  }
  if (j.contains("floor") && !j["floor"].is_null()) {
    spec.floor = positive_number(j, "floor", 1.0);
  }
  return spec;
}

NuisanceSpec default_nuisance_spec(const Dataset& data) {
  const std::size_t p = data.covariate_count();
  NuisanceSpec spec;
  spec.treatment.kind = TreatmentModelKind::location_scale;
  spec.treatment.mean_design = linear_covariates(p);
  spec.treatment.scale_design = linear_covariates(p);
  std::vector<Term> terms = linear_covariates(p).terms();
  terms.push_back({-1, 1});
  terms.push_back({-1, 2});
  for (std::size_t k = 0; k < p; ++k) terms.push_back({static_cast<int>(k), 1});
  spec.outcome.design = FeatureMap(CovariateTransform::none, std::move(terms));
  spec.outcome.link = data.binary_outcome() ? Link::logistic : Link::identity;
  return spec;
}

NuisanceFit fit_nuisance(const Dataset& data, const NuisanceSpec& spec) {
  std::shared_ptr<const ConditionalDensity> density;
  if (spec.treatment.kind == TreatmentModelKind::beta) {
    density = fit_treatment_density_beta(data, spec.treatment.mean_design,
                                         spec.treatment.scale,
                                         spec.treatment.precision);
  } else {
    density = fit_treatment_density_locscale(data, spec.treatment.mean_design,
                                             spec.treatment.scale_design);
  }
  auto outcome =
      fit_outcome_regression(data, spec.outcome.design, spec.outcome.link);
  return marginalize(data, std::move(density), std::move(outcome), spec.floor);
}

}  // namespace drcurve
