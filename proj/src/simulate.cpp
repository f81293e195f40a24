#include "drcurve/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "drcurve/errors.hpp"
#include "drcurve/numeric.hpp"
#include "drcurve/pseudo.hpp"

namespace drcurve::sim {

namespace {

constexpr double kCubic = 0.13 * 0.13 * 0.13;
constexpr std::size_t kTruthGrid = 101;
constexpr double kTruthStep = kTreatmentScale / (kTruthGrid - 1);
constexpr std::size_t kChunk = 4096;

const Eigen::VectorXd& treatment_coef() {
  static const Eigen::VectorXd c =
      (Eigen::VectorXd(5) << -0.8, 0.1, 0.1, -0.1, 0.2).finished();
  return c;
}

FeatureMap true_outcome_design() {
  return FeatureMap::from_strings(
      CovariateTransform::none,
      {"1", "l1", "l2", "l3", "l4", "a", "a*l1", "a*l3", "a^3"});
}

/// Per-point mean and standard error of f over the rows, summed in fixed
/// chunks and reduced in chunk order so the result does not depend on the
/// thread count. `eval(begin, end, a, out)` fills out[0 .. end - begin).
template <class Eval>
std::vector<McValue> chunked_average(std::size_t rows,
                                     std::span<const double> points,
                                     const Eval& eval) {
  const std::size_t chunks = (rows + kChunk - 1) / kChunk;
  const std::size_t np = points.size();
  std::vector<double> sums(chunks * np);
  std::vector<double> squares(chunks * np);
  const auto count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel
  {
    std::vector<double> buf(kChunk);
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      const auto c = static_cast<std::size_t>(s);
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(rows, begin + kChunk);
      for (std::size_t k = 0; k < np; ++k) {
        eval(begin, end, points[k], std::span<double>(buf.data(), end - begin));
        CompensatedSum s1;
        CompensatedSum s2;
        for (std::size_t j = 0; j < end - begin; ++j) {
          s1.add(buf[j]);
          s2.add(buf[j] * buf[j]);
        }
        sums[c * np + k] = s1.value();
        squares[c * np + k] = s2.value();
      }
    }
  }
  std::vector<McValue> out(np);
  const double m = static_cast<double>(rows);
  for (std::size_t k = 0; k < np; ++k) {
    CompensatedSum s1;
    CompensatedSum s2;
    for (std::size_t c = 0; c < chunks; ++c) {
      s1.add(sums[c * np + k]);
      s2.add(squares[c * np + k]);
    }
    const double mean = s1.value() / m;
    const double var = std::max(0.0, s2.value() / m - mean * mean);
    out[k] = {mean, std::sqrt(var / m)};
  }
  return out;
}

std::span<const double> row_of(const CovariateMatrix& rows, std::size_t i) {
  return {rows.data() + i * static_cast<std::size_t>(rows.cols()),
          static_cast<std::size_t>(rows.cols())};
}

std::vector<McValue> density_average(const CovariateMatrix& rows,
                                     const ConditionalDensity& density,
                                     std::span<const double> points) {
  return chunked_average(
      static_cast<std::size_t>(rows.rows()), points,
      [&](std::size_t begin, std::size_t end, double a, std::span<double> out) {
        thread_local std::vector<RowParams> params;
        params.resize(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          params[i - begin] = density.prepare(row_of(rows, i));
        }
        density.evaluate_rows(params, a, out);
      });
}

std::vector<McValue> regression_average(const CovariateMatrix& rows,
                                        const OutcomeRegression& outcome,
                                        std::span<const double> points) {
  return chunked_average(
      static_cast<std::size_t>(rows.rows()), points,
      [&](std::size_t begin, std::size_t end, double a, std::span<double> out) {
        for (std::size_t i = begin; i < end; ++i) {
          out[i - begin] = outcome(row_of(rows, i), a);
        }
      });
}

std::vector<double> values_of(const std::vector<McValue>& v) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k].value;
  return out;
}

}  // namespace

double true_lambda(std::span<const double> l) {
  return kTreatmentScale *
         expit(-0.8 + 0.1 * l[0] + 0.1 * l[1] - 0.1 * l[2] + 0.2 * l[3]);
}

double true_pi(std::span<const double> l, double a) {
  if (!(a > 0.0 && a < kTreatmentScale)) return 0.0;
  const double lambda = true_lambda(l);
  const double x = a / kTreatmentScale;
  return boost::math::ibeta_derivative(lambda, kTreatmentScale - lambda, x) /
         kTreatmentScale;
}

double true_mu(std::span<const double> l, double a) {
  return expit(1.0 + 0.2 * l[0] + 0.2 * l[1] + 0.3 * l[2] - 0.1 * l[3] +
               a * (0.1 - 0.1 * l[0] + 0.1 * l[2] - kCubic * a * a));
}

std::shared_ptr<const BetaDensity> true_density() {
  static const auto d = std::make_shared<const BetaDensity>(
      linear_covariates(kCovariates), treatment_coef(), kTreatmentScale,
      kTreatmentScale);
  return d;
}

std::shared_ptr<const LinearPredictorRegression> true_outcome() {
  static const auto m = std::make_shared<const LinearPredictorRegression>(
      true_outcome_design(),
      (Eigen::VectorXd(9) << 1.0, 0.2, 0.2, 0.3, -0.1, 0.1, -0.1, 0.1, -kCubic)
          .finished(),
      Link::logistic);
  return m;
}

std::array<double, 4> misspecify_covariates(std::span<const double> l) {
  return kang_schafer(l);
}

std::string_view to_string(ModelSpec m) {
  return m == ModelSpec::correct ? "correct" : "misspecified";
}

ModelSpec parse_model_spec(std::string_view name) {
  if (name == "correct") return ModelSpec::correct;
  if (name == "misspecified") return ModelSpec::misspecified;
  throw InputError("unknown model specification '" + std::string(name) +
                   "' (expected correct or misspecified)");
}

TreatmentModelSpec treatment_model(ModelSpec m) {
  TreatmentModelSpec t;
  t.kind = TreatmentModelKind::beta;
  t.mean_design = FeatureMap::from_strings(
      m == ModelSpec::correct ? CovariateTransform::none
                              : CovariateTransform::kang_schafer,
      {"1", "l1", "l2", "l3", "l4"});
  t.scale = kTreatmentScale;
  t.precision = kTreatmentScale;
  return t;
}

OutcomeModelSpec outcome_model(ModelSpec m) {
  OutcomeModelSpec o;
  o.link = Link::logistic;
  o.design = m == ModelSpec::correct
                 ? true_outcome_design()
                 : FeatureMap::from_strings(
                       CovariateTransform::kang_schafer,
                       {"1", "l1", "l2", "l3", "l4", "a", "a*l1", "a*l3"});
  return o;
}

NuisanceSpec nuisance_spec(ModelSpec treatment, ModelSpec outcome) {
  NuisanceSpec s;
  s.treatment = treatment_model(treatment);
  s.outcome = outcome_model(outcome);
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset generate_data(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InputError("need n >= 2");
  boost::random::mt19937_64 gen(seed);
  boost::random::normal_distribution<double> normal;
  boost::random::uniform_01<double> unif;
  CovariateMatrix cov(static_cast<Eigen::Index>(n), kCovariates);
  std::vector<double> a(n);
  std::vector<double> y(n);
  std::array<double, kCovariates> l{};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kCovariates; ++j) {
      l[j] = normal(gen);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = l[j];
    }
    const double lambda = true_lambda(l);
    boost::random::beta_distribution<double> beta(lambda,
                                                  kTreatmentScale - lambda);
    double x = 0.0;
    do {
      x = beta(gen);
    } while (!(x > 0.0 && x < 1.0));
    a[i] = kTreatmentScale * x;
    y[i] = unif(gen) < true_mu(l, a[i]) ? 1.0 : 0.0;
  }
  return Dataset(std::move(cov), std::move(a), std::move(y),
                 Support{0.0, kTreatmentScale});
}

// --- truth oracle --------------------------------------------------------

struct TruthOracle::Splines {
  boost::math::interpolators::cardinal_cubic_b_spline<double> theta;
  boost::math::interpolators::cardinal_cubic_b_spline<double> varpi;
};

TruthOracle::TruthOracle(std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("oracle needs >= 2 draws");
  boost::random::mt19937_64 gen(seed);
  boost::random::normal_distribution<double> normal;
  rows_.resize(static_cast<Eigen::Index>(draws), kCovariates);
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) rows_(i, j) = normal(gen);
  }
  std::vector<double> grid(kTruthGrid);
  for (std::size_t k = 0; k < kTruthGrid; ++k) grid[k] = kTruthStep * k;
  theta_grid_ = values_of(regression_average(rows_, *true_outcome(), grid));
  varpi_grid_ = values_of(density_average(rows_, *true_density(), grid));
  splines_ = std::make_shared<const Splines>(Splines{
      {theta_grid_.begin(), theta_grid_.end(), 0.0, kTruthStep},
      {varpi_grid_.begin(), varpi_grid_.end(), 0.0, kTruthStep}});

  // Cumulative treatment distribution by the trapezoid rule on a fine grid.
  constexpr std::size_t fine = 4001;
  cdf_points_.resize(fine);
  cdf_values_.resize(fine);
  double prev = 0.0;
  for (std::size_t k = 0; k < fine; ++k) {
    cdf_points_[k] = kTreatmentScale * static_cast<double>(k) / (fine - 1);
    const double v = varpi(cdf_points_[k]);
    cdf_values_[k] =
        k == 0 ? 0.0
               : cdf_values_[k - 1] +
                     0.5 * (prev + v) * (cdf_points_[k] - cdf_points_[k - 1]);
    prev = v;
  }
  const double total = cdf_values_.back();
  for (double& c : cdf_values_) c /= total;
}

double TruthOracle::theta(double a) const {
  return splines_->theta(std::clamp(a, 0.0, kTreatmentScale));
}

double TruthOracle::varpi(double a) const {
  if (!(a > 0.0 && a < kTreatmentScale)) return 0.0;
  return std::max(0.0, splines_->varpi(a));
}

McValue TruthOracle::theta_exact(double a) const {
  const double p[1] = {a};
  return regression_average(rows_, *true_outcome(), p)[0];
}

McValue TruthOracle::varpi_exact(double a) const {
  const double p[1] = {a};
  return density_average(rows_, *true_density(), p)[0];
}

std::vector<double> TruthOracle::theta_exact(std::span<const double> points) const {
  return values_of(regression_average(rows_, *true_outcome(), points));
}

double TruthOracle::treatment_quantile(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile outside [0, 1]");
  const auto it = std::lower_bound(cdf_values_.begin(), cdf_values_.end(), q);
  if (it == cdf_values_.begin()) return cdf_points_.front();
  if (it == cdf_values_.end()) return cdf_points_.back();
  const auto k = static_cast<std::size_t>(it - cdf_values_.begin());
  const double c0 = cdf_values_[k - 1];
  const double c1 = cdf_values_[k];
  const double t = c1 > c0 ? (q - c0) / (c1 - c0) : 0.0;
  return cdf_points_[k - 1] + t * (cdf_points_[k] - cdf_points_[k - 1]);
}

McValue TruthOracle::average(
    const std::function<double(std::span<const double>, double)>& f,
    double a) const {
  const double p[1] = {a};
  return chunked_average(
      static_cast<std::size_t>(rows_.rows()), p,
      [&](std::size_t begin, std::size_t end, double t, std::span<double> out) {
        for (std::size_t i = begin; i < end; ++i) out[i - begin] = f(row_of(rows_, i), t);
      })[0];
}

const TruthOracle& TruthOracle::shared() {
  static const TruthOracle oracle;
  return oracle;
}

McValue theta_monte_carlo(double a, std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("need >= 2 draws");
  boost::random::mt19937_64 gen(seed);
  boost::random::normal_distribution<double> normal;
  CovariateMatrix rows(static_cast<Eigen::Index>(draws), kCovariates);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(i, j) = normal(gen);
  }
  const double p[1] = {a};
  return regression_average(rows, *true_outcome(), p)[0];
}

// --- study harness -------------------------------------------------------

std::string_view to_string(BandwidthMode m) {
  switch (m) {
    case BandwidthMode::loo:
      return "loo";
    case BandwidthMode::oracle:
      return "oracle";
    case BandwidthMode::fixed:
      return "fixed";
  }
  return "unknown";
}

BandwidthMode parse_bandwidth_mode(std::string_view name) {
  if (name == "loo") return BandwidthMode::loo;
  if (name == "oracle") return BandwidthMode::oracle;
  if (name == "fixed") return BandwidthMode::fixed;
  throw InputError("unknown bandwidth mode '" + std::string(name) +
                   "' (expected loo, oracle or fixed)");
}

void SimConfig::validate() const {
  if (n < 50) throw InputError("simulation n must be >= 50");
  if (replications < 1) throw InputError("replications must be >= 1");
  if (estimators.empty()) throw InputError("no estimators configured");
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw InputError("trim_fraction must be in [0, 0.5)");
  }
  if (!(h_min > 0.0 && h_min <= h_max && std::isfinite(h_max))) {
    throw InputError("bandwidth range must satisfy 0 < h_min <= h_max");
  }
  if (!(fixed_bandwidth > 0.0 && std::isfinite(fixed_bandwidth))) {
    throw InputError("fixed_bandwidth must be positive");
  }
  if (grid_points < 2) throw InputError("grid_points must be >= 2");
  if (!(max_failure_rate > 0.0 && max_failure_rate <= 1.0)) {
    throw InputError("max_failure_rate must be in (0, 1]");
  }
  const bool smoothed = std::any_of(estimators.begin(), estimators.end(),
                                    [](EstimatorKind k) { return k != EstimatorKind::reg; });
  if (smoothed && bandwidth_modes.empty()) {
    throw InputError("no bandwidth modes configured");
  }
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["replications"] = replications;
  j["base_seed"] = base_seed;
  j["treatment_model"] = std::string(to_string(treatment));
  j["outcome_model"] = std::string(to_string(outcome));
  j["estimators"] = nlohmann::json::array();
  for (auto k : estimators) j["estimators"].push_back(std::string(drcurve::to_string(k)));
  j["bandwidth_modes"] = nlohmann::json::array();
  for (auto m : bandwidth_modes) j["bandwidth_modes"].push_back(std::string(to_string(m)));
  j["trim_fraction"] = trim_fraction;
  j["kernel"] = std::string(drcurve::to_string(kernel));
  j["h_range"] = {h_min, h_max};
  j["fixed_bandwidth"] = fixed_bandwidth;
  j["grid_points"] = grid_points;
  j["max_failure_rate"] = max_failure_rate;
  return j;
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("simulation config must be an object");
  static const std::vector<std::string> known = {
      "n", "replications", "base_seed", "treatment_model", "outcome_model",
      "estimators", "bandwidth_modes", "trim_fraction", "kernel", "h_range",
      "fixed_bandwidth", "grid_points", "max_failure_rate"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("unknown simulation setting '" + key + "'");
    }
  }
  SimConfig c;
  try {
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("treatment_model")) {
      c.treatment = parse_model_spec(j.at("treatment_model").get<std::string>());
    }
    if (j.contains("outcome_model")) {
      c.outcome = parse_model_spec(j.at("outcome_model").get<std::string>());
    }
    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& e : j.at("estimators")) {
        c.estimators.push_back(parse_estimator_kind(e.get<std::string>()));
      }
    }
    if (j.contains("bandwidth_modes")) {
      c.bandwidth_modes.clear();
      for (const auto& m : j.at("bandwidth_modes")) {
        c.bandwidth_modes.push_back(parse_bandwidth_mode(m.get<std::string>()));
      }
    }
    if (j.contains("trim_fraction")) c.trim_fraction = j.at("trim_fraction").get<double>();
    if (j.contains("kernel")) c.kernel = parse_kernel_family(j.at("kernel").get<std::string>());
    if (j.contains("h_range")) {
      const auto& r = j.at("h_range");
      if (!r.is_array() || r.size() != 2) throw InputError("h_range must be [h_min, h_max]");
      c.h_min = r[0].get<double>();
      c.h_max = r[1].get<double>();
    }
    if (j.contains("fixed_bandwidth")) c.fixed_bandwidth = j.at("fixed_bandwidth").get<double>();
    if (j.contains("grid_points")) c.grid_points = j.at("grid_points").get<std::size_t>();
    if (j.contains("max_failure_rate")) {
      c.max_failure_rate = j.at("max_failure_rate").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string CellResult::label() const {
  std::string s = kind == EstimatorKind::reg ? "Reg"
                  : kind == EstimatorKind::ipw ? "IPW"
                                               : "DR";
  if (mode == BandwidthMode::oracle) s += "*";
  if (mode == BandwidthMode::fixed) s += "+fixed";
  return s;
}

const CellResult* SimulationReport::find(EstimatorKind kind,
                                         std::optional<BandwidthMode> mode) const {
  for (const auto& c : cells) {
    if (c.kind == kind && (kind == EstimatorKind::reg || c.mode == mode)) return &c;
  }
  return nullptr;
}

namespace {

std::string correct_model_label(const SimConfig& c) {
  const bool t = c.treatment == ModelSpec::correct;
  const bool o = c.outcome == ModelSpec::correct;
  if (t && o) return "both";
  if (t) return "treatment";
  if (o) return "outcome";
  return "neither";
}

}  // namespace

nlohmann::json SimulationReport::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["correct_model"] = correct_model_label(config);
  j["completed"] = completed;
  j["failed"] = failed;
  j["failures"] = failure_messages;
  j["metric_grid"] = {{"lower", grid.front()}, {"upper", grid.back()},
                      {"points", grid.size()}};
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cj;
    cj["estimator"] = c.label();
    cj["kind"] = std::string(drcurve::to_string(c.kind));
    cj["bandwidth_mode"] =
        c.mode ? nlohmann::json(std::string(to_string(*c.mode))) : nlohmann::json(nullptr);
    cj["integrated_bias"] = c.integrated_bias;
    cj["integrated_rmse"] = c.integrated_rmse;
    cj["bias_mc_se"] = c.bias_mc_se;
    cj["rmse_mc_se"] = c.rmse_mc_se;
    if (c.mode) {
      cj["bandwidth"] = {{"mean", c.bandwidth.mean},
                         {"sd", c.bandwidth.sd},
                         {"min", c.bandwidth.min},
                         {"median", c.bandwidth.median},
                         {"max", c.bandwidth.max}};
    }
    j["cells"].push_back(cj);
  }
  return j;
}

std::string SimulationReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "estimator,correct_model,n,replications,bias,rmse,bias_se,rmse_se,"
         "h_mean,h_median\n";
  const std::string cell = correct_model_label(config);
  for (const auto& c : cells) {
    out << c.label() << ',' << cell << ',' << config.n << ',' << completed << ','
        << c.integrated_bias << ',' << c.integrated_rmse << ',' << c.bias_mc_se
        << ',' << c.rmse_mc_se << ',';
    if (c.mode) {
      out << c.bandwidth.mean << ',' << c.bandwidth.median;
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

MetricGrid metric_grid(const TruthOracle& truth, double trim_fraction,
                       std::size_t points) {
  if (points < 2) throw std::invalid_argument("metric grid needs >= 2 points");
  const double lo = truth.treatment_quantile(0.5 * trim_fraction);
  const double hi = truth.treatment_quantile(1.0 - 0.5 * trim_fraction);
  MetricGrid g;
  g.points.resize(points);
  g.weights.resize(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    g.points[k] = lo + step * static_cast<double>(k);
    const double trap = (k == 0 || k + 1 == points) ? 0.5 : 1.0;
    g.weights[k] = trap * truth.varpi(g.points[k]);
    total += g.weights[k];
  }
  for (double& w : g.weights) w /= total;
  return g;
}

namespace {

struct CellKey {
  EstimatorKind kind;
  std::optional<BandwidthMode> mode;
};

struct Replicate {
  bool ok = false;
  std::string error;
  std::vector<std::vector<double>> curves;  // per cell
  std::vector<double> bandwidths;           // per cell (NaN for reg)
};

Replicate run_replicate(const SimConfig& config, const std::vector<CellKey>& cells,
                        const NuisanceSpec& spec, std::span<const double> grid,
                        const TruthOracle& truth, std::size_t index) {
  Replicate r;
  const Dataset data = generate_data(config.n, derive_seed(config.base_seed, index));
  const NuisanceFit fit = fit_nuisance(data, spec);
  BandwidthSearch search;
  search.h_min = config.h_min;
  search.h_max = config.h_max;
  const auto theta = [&](double a) { return truth.theta(a); };

  std::optional<PseudoOutcomes> pseudo_ipw;
  std::optional<PseudoOutcomes> pseudo_dr;
  for (const auto& cell : cells) {
    if (cell.kind == EstimatorKind::reg) {
      r.curves.push_back(fit.regression_curve(grid));
      r.bandwidths.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    auto& slot = cell.kind == EstimatorKind::ipw ? pseudo_ipw : pseudo_dr;
    if (!slot) slot = compute_pseudo(data, nuisance_for(fit, cell.kind));
    double h = config.fixed_bandwidth;
    if (cell.mode == BandwidthMode::loo) {
      h = select_bandwidth(data.treatment(), *slot, config.kernel, search).selected;
    } else if (cell.mode == BandwidthMode::oracle) {
      h = oracle_bandwidth(data.treatment(), *slot, theta, config.kernel, search)
              .selected;
    }
    const EffectCurve curve = smooth_pseudo_outcomes(
        data.treatment(), *slot, grid, KernelSpec(config.kernel, h), cell.kind);
    if (curve.feasible_count() != curve.size()) {
      throw SingularDesign("singular local design on the metric grid at h = " +
                           std::to_string(h));
    }
    r.curves.push_back(curve.estimates);
    r.bandwidths.push_back(h);
  }
  r.ok = true;
  return r;
}

BandwidthSummary summarize(std::vector<double> h) {
  BandwidthSummary s;
  if (h.empty()) return s;
  std::sort(h.begin(), h.end());
  CompensatedSum sum;
  for (double v : h) sum.add(v);
  s.mean = sum.value() / static_cast<double>(h.size());
  CompensatedSum ss;
  for (double v : h) ss.add((v - s.mean) * (v - s.mean));
  s.sd = h.size() > 1 ? std::sqrt(ss.value() / static_cast<double>(h.size() - 1)) : 0.0;
  s.min = h.front();
  s.max = h.back();
  const std::size_t m = h.size() / 2;
  s.median = h.size() % 2 ? h[m] : 0.5 * (h[m - 1] + h[m]);
  return s;
}

double sample_sd(const std::vector<double>& z) {
  if (z.size() < 2) return 0.0;
  CompensatedSum s;
  for (double v : z) s.add(v);
  const double mean = s.value() / static_cast<double>(z.size());
  CompensatedSum ss;
  for (double v : z) ss.add((v - mean) * (v - mean));
  return std::sqrt(ss.value() / static_cast<double>(z.size() - 1));
}

}  // namespace

SimulationReport run_study(const SimConfig& config, const TruthOracle& truth,
                           const ProgressFn& progress) {
  config.validate();
  SimulationReport report;
  report.config = config;
  const MetricGrid mg = metric_grid(truth, config.trim_fraction, config.grid_points);
  report.grid = mg.points;
  report.weights = mg.weights;
  report.truth = truth.theta_exact(report.grid);

  std::vector<CellKey> cells;
  for (auto kind : config.estimators) {
    if (kind == EstimatorKind::reg) {
      cells.push_back({kind, std::nullopt});
    } else {
      for (auto mode : config.bandwidth_modes) cells.push_back({kind, mode});
    }
  }
  const NuisanceSpec spec = nuisance_spec(config.treatment, config.outcome);

  const std::size_t S = config.replications;
  std::vector<Replicate> reps(S);
  std::size_t done = 0;
  std::mutex progress_mutex;
  const auto count = static_cast<std::ptrdiff_t>(S);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto i = static_cast<std::size_t>(s);
    try {
      reps[i] = run_replicate(config, cells, spec, report.grid, truth, i);
    } catch (const std::exception& e) {
      reps[i].ok = false;
      reps[i].error = "replication " + std::to_string(i) + ": " + e.what();
    }
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(++done, S);
    }
  }

  for (const auto& r : reps) {
    if (r.ok) {
      ++report.completed;
    } else {
      ++report.failed;
      report.failure_messages.push_back(r.error);
    }
  }
  if (static_cast<double>(report.failed) >=
      config.max_failure_rate * static_cast<double>(S)) {
    throw StudyFailed(std::to_string(report.failed) + " of " + std::to_string(S) +
                      " replications failed" +
                      (report.failure_messages.empty()
                           ? std::string()
                           : "; first: " + report.failure_messages.front()));
  }

  const std::size_t G = report.grid.size();
  const double used = static_cast<double>(report.completed);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult cell;
    cell.kind = cells[c].kind;
    cell.mode = cells[c].mode;
    cell.mean_curve.assign(G, 0.0);
    std::vector<double> mse(G, 0.0);
    std::vector<double> h;
    for (std::size_t k = 0; k < G; ++k) {
      CompensatedSum m;
      CompensatedSum e2;
      for (const auto& r : reps) {
        if (!r.ok) continue;
        const double e = r.curves[c][k] - report.truth[k];
        m.add(r.curves[c][k]);
        e2.add(e * e);
      }
      cell.mean_curve[k] = m.value() / used;
      mse[k] = e2.value() / used;
    }
    for (const auto& r : reps) {
      if (r.ok && cells[c].mode) h.push_back(r.bandwidths[c]);
    }
    cell.bandwidth = summarize(std::move(h));

    // Integrated metrics and delta-method Monte Carlo standard errors.
    std::vector<double> sign(G);
    std::vector<double> rmse(G);
    double bias = 0.0;
    double root = 0.0;
    for (std::size_t k = 0; k < G; ++k) {
      const double b = cell.mean_curve[k] - report.truth[k];
      sign[k] = b >= 0.0 ? 1.0 : -1.0;
      rmse[k] = std::sqrt(mse[k]);
      bias += report.weights[k] * std::abs(b);
      root += report.weights[k] * rmse[k];
    }
    std::vector<double> zb;
    std::vector<double> zr;
    for (const auto& r : reps) {
      if (!r.ok) continue;
      double b = 0.0;
      double q = 0.0;
      for (std::size_t k = 0; k < G; ++k) {
        const double e = r.curves[c][k] - report.truth[k];
        b += report.weights[k] * sign[k] * e;
        if (rmse[k] > 0.0) q += report.weights[k] * e * e / (2.0 * rmse[k]);
      }
      zb.push_back(b);
      zr.push_back(q);
    }
    cell.integrated_bias = 100.0 * bias;
    cell.integrated_rmse = 100.0 * root;
    cell.bias_mc_se = 100.0 * sample_sd(zb) / std::sqrt(used);
    cell.rmse_mc_se = 100.0 * sample_sd(zr) / std::sqrt(used);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

AsymptoticTerms asymptotic_diagnostics(double a, const KernelSpec& spec,
                                   const TruthOracle& truth,
                                   const ConditionalDensity* pi_bar,
                                   const OutcomeRegression* mu_bar) {
  const ConditionalDensity& pib = pi_bar ? *pi_bar : *true_density();
  const OutcomeRegression& mub = mu_bar ? *mu_bar : *true_outcome();
  const ConditionalDensity& pi = *true_density();
  const OutcomeRegression& mu = *true_outcome();

  const double delta = 0.1;
  const double t_lo = truth.theta_exact(a - delta).value;
  const double t_mid = truth.theta_exact(a).value;
  const double t_hi = truth.theta_exact(a + delta).value;
  const double second = (t_hi - 2.0 * t_mid + t_lo) / (delta * delta);
  const KernelMoments km = kernel_moments(spec);
  const double h = spec.bandwidth();

  const double varpi = truth.varpi_exact(a).value;
  const double varpi_bar =
      truth.average([&](std::span<const double> l, double t) { return pib(l, t); }, a)
          .value;
  const double m_bar =
      truth.average([&](std::span<const double> l, double t) { return mub(l, t); }, a)
          .value;
  const double expectation =
      truth
          .average(
              [&](std::span<const double> l, double t) {
                const double m = mu(l, t);
                const double mb = mub(l, t);
                const double ratio = pi(l, t) / varpi;
                const double ratio_bar = pib(l, t) / varpi_bar;
                return (m * (1.0 - m) + (m - mb) * (m - mb)) * ratio /
                       (ratio_bar * ratio_bar);
              },
              a)
          .value;
  AsymptoticTerms out;
  out.second_derivative = second;
  out.bias = second * h * h * 0.5 * km.second_moment;
  out.variance = expectation - (t_mid - m_bar) * (t_mid - m_bar);
  out.scaled_variance = out.variance * km.roughness / varpi;
  return out;
}

}  // namespace drcurve::sim
