#include "drcurve/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drcurve/bandwidth.hpp"
#include "drcurve/errors.hpp"
#include "drcurve/estimator.hpp"
#include "drcurve/io.hpp"
#include "drcurve/nuisance.hpp"
#include "drcurve/simulate.hpp"
#include "drcurve/smoothing.hpp"

namespace drcurve::cli {

namespace {

using nlohmann::json;

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> kind;
  std::optional<std::string> kernel;
  std::optional<std::string> bandwidth;
  std::optional<double> ci_level;
  std::optional<std::string> what;
  std::optional<std::size_t> n;
};

json load_config(const std::string& path, const std::vector<std::string>& allowed) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  if (!j.contains("schema") || j["schema"] != 1) {
    throw InputError("config must declare \"schema\": 1");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "schema") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InputError("unknown config key '" + key + "'");
    }
  }
  return j;
}

template <class T>
T config_value(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string sibling_json_path(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash) &&
      path.substr(dot) == ".csv") {
    return path.substr(0, dot) + ".json";
  }
  return path + ".json";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write output file '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing output file '" + path + "'");
}

void apply_jobs(const Options& o) {
  if (o.jobs) {
    if (*o.jobs < 1) throw InputError("--jobs must be >= 1");
    set_thread_count(*o.jobs);
    return;
  }
  if (const char* env = std::getenv("DRCURVE_THREADS")) {
    const std::string s(env);
    const auto v = io::parse_double(s);
    if (!v || *v < 1 || *v != std::floor(*v)) {
      throw InputError("DRCURVE_THREADS must be a positive integer, got '" + s + "'");
    }
    set_thread_count(static_cast<int>(*v));
  }
}

/// Bandwidth request: "loo", "oracle" or a positive number.
struct BandwidthChoice {
  enum class Mode { loo, oracle, value } mode = Mode::loo;
  double value = 0.0;
};

BandwidthChoice parse_bandwidth(const std::string& text) {
  if (text == "loo") return {BandwidthChoice::Mode::loo, 0.0};
  if (text == "oracle") return {BandwidthChoice::Mode::oracle, 0.0};
  const auto v = io::parse_double(text);
  if (!v || !std::isfinite(*v) || *v <= 0.0) {
    throw InputError("--bandwidth must be loo, oracle or a positive number, got '" +
                     text + "'");
  }
  return {BandwidthChoice::Mode::value, *v};
}

BandwidthChoice bandwidth_from(const Options& o, const json& cfg) {
  if (o.bandwidth) return parse_bandwidth(*o.bandwidth);
  if (!cfg.contains("bandwidth")) return {};
  const auto& b = cfg["bandwidth"];
  if (b.is_number()) return parse_bandwidth(io::format_double(b.get<double>()));
  if (b.is_string()) return parse_bandwidth(b.get<std::string>());
  throw InputError("config key 'bandwidth' must be a string or number");
}

// --- estimate / bandwidth shared setup -----------------------------------

const std::vector<std::string> kEstimateKeys = {
    "kind", "kernel", "bandwidth", "ci_level", "variance_method",
    "grid", "search", "nuisance", "support"};

struct Prepared {
  Dataset data;
  NuisanceSpec spec;
  NuisanceFit fit;
  EstimatorKind kind;
  KernelFamily kernel;
  BandwidthSearch search;
  bool split = false;
};

Prepared prepare(const Options& o, const json& cfg) {
  if (o.input.empty()) throw InputError("--input is required");
  std::optional<Support> support;
  if (cfg.contains("support")) {
    const auto& s = cfg["support"];
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number() ||
        !(s[0].get<double>() < s[1].get<double>())) {
      throw InputError("config key 'support' must be [lower, upper] with lower < upper");
    }
    support = Support{s[0].get<double>(), s[1].get<double>()};
  }
  Dataset data = io::read_dataset_file(o.input, support);
  const EstimatorKind kind = parse_estimator_kind(
      o.kind ? *o.kind : config_value<std::string>(cfg, "kind", "dr"));
  const KernelFamily kernel = parse_kernel_family(
      o.kernel ? *o.kernel : config_value<std::string>(cfg, "kernel", "epanechnikov"));
  NuisanceSpec spec = default_nuisance_spec(data);
  if (cfg.contains("nuisance")) spec = NuisanceSpec::from_json(cfg["nuisance"], spec);

  BandwidthSearch search = default_search(data.treatment());
  bool split = false;
  if (cfg.contains("search")) {
    const json& s = cfg["search"];
    if (!s.is_object()) throw InputError("config key 'search' must be an object");
    for (const auto& [key, value] : s.items()) {
      if (key != "h_range" && key != "optimizer" && key != "grid_size" && key != "split") {
        throw InputError("unknown search setting '" + key + "'");
      }
    }
    if (s.contains("h_range")) {
      const auto& r = s["h_range"];
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
        throw InputError("search.h_range must be [h_min, h_max]");
      }
      search.h_min = r[0].get<double>();
      search.h_max = r[1].get<double>();
    }
    if (s.contains("optimizer")) {
      search.optimizer = parse_optimizer(config_value<std::string>(s, "optimizer", ""));
    }
    search.grid_size = config_value<std::size_t>(s, "grid_size", search.grid_size);
    split = config_value<bool>(s, "split", false);
  }
  try {
    search.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("search: ") + e.what());
  }
  NuisanceFit fit = fit_nuisance(data, spec);
  return {std::move(data), std::move(spec), std::move(fit), kind, kernel,
          std::move(search), split};
}

BandwidthSearch run_selection(const Prepared& p) {
  if (p.split) {
    return select_bandwidth_split(p.data, p.spec, p.kind, p.kernel, p.search);
  }
  const PseudoOutcomes pseudo = compute_pseudo(p.data, nuisance_for(p.fit, p.kind));
  return select_bandwidth(p.data.treatment(), pseudo, p.kernel, p.search);
}

std::vector<double> grid_from(const json& cfg, std::span<const double> treatments) {
  if (!cfg.contains("grid")) return default_grid(treatments);
  const json& g = cfg["grid"];
  if (g.is_array()) {
    std::vector<double> grid;
    for (const auto& v : g) {
      if (!v.is_number()) throw InputError("grid values must be numbers");
      grid.push_back(v.get<double>());
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) throw InputError("grid must be strictly increasing");
    }
    if (grid.empty()) throw InputError("grid is empty");
    return grid;
  }
  if (!g.is_object()) throw InputError("config key 'grid' must be an array or object");
  for (const auto& [key, value] : g.items()) {
    if (key != "points" && key != "lower_quantile" && key != "upper_quantile") {
      throw InputError("unknown grid setting '" + key + "'");
    }
  }
  try {
    return default_grid(treatments, config_value<std::size_t>(g, "points", 101),
                        config_value<double>(g, "lower_quantile", 0.05),
                        config_value<double>(g, "upper_quantile", 0.95));
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("grid: ") + e.what());
  }
}

int cmd_estimate(const Options& o, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(o.config, kEstimateKeys);
  if (o.output.empty()) throw InputError("--output is required");
  const Prepared p = prepare(o, cfg);
  const std::vector<double> grid = grid_from(cfg, p.data.treatment());
  std::vector<std::string> warnings;

  double h = 1.0;
  if (p.kind != EstimatorKind::reg) {
    const BandwidthChoice choice = bandwidth_from(o, cfg);
    if (choice.mode == BandwidthChoice::Mode::oracle) {
      throw InputError("the oracle bandwidth needs the true curve; use 'simulate'");
    }
    if (choice.mode == BandwidthChoice::Mode::value) {
      h = choice.value;
    } else {
      const BandwidthSearch s = run_selection(p);
      h = s.selected;
      if (h <= s.h_min * (1 + 1e-9) || h >= s.h_max * (1 - 1e-9)) {
        warnings.push_back("selected bandwidth " + io::format_double(h) +
                           " lies on the boundary of the search range");
      }
    }
  }
  const KernelSpec spec(p.kernel, h);
  EffectCurve curve = estimate_curve(p.data, p.fit, grid, spec, p.kind);
  if (curve.feasible_count() == 0) {
    err << "drcurve: every grid point has a singular local design at h = "
        << io::format_double(h) << '\n';
    return kExitNumerical;
  }
  if (p.kind != EstimatorKind::reg) {
    const double level = o.ci_level ? *o.ci_level : config_value<double>(cfg, "ci_level", 0.95);
    if (!(level > 0.0 && level < 1.0)) throw InputError("ci level must be in (0, 1)");
    const VarianceMethod method = parse_variance_method(
        config_value<std::string>(cfg, "variance_method", "influence"));
    curve = add_wald_ci(std::move(curve), p.data, p.fit, spec, level, method);
  }
  if (curve.floored_count > 0) {
    warnings.push_back(std::to_string(curve.floored_count) +
                       " conditional density values were raised to the floor");
  }
  if (curve.feasible_count() < curve.size()) {
    warnings.push_back(std::to_string(curve.size() - curve.feasible_count()) +
                       " grid points have a singular local design (written as nan)");
  }
  std::ostringstream csv;
  io::write_curve(csv, curve);
  write_text(o.output, csv.str());
  json meta = io::curve_metadata(curve, warnings);
  meta["n"] = p.data.size();
  meta["nuisance"] = p.spec.to_json();
  write_text(sibling_json_path(o.output), meta.dump(2) + "\n");
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << "wrote " << o.output << " (" << curve.size() << " points, h = "
      << io::format_double(curve.bandwidth) << ")\n";
  return kExitOk;
}

int cmd_bandwidth(const Options& o, std::ostream& out, std::ostream&) {
  const json cfg = load_config(o.config, kEstimateKeys);
  const Prepared p = prepare(o, cfg);
  if (p.kind == EstimatorKind::reg) {
    throw InputError("bandwidth selection applies to ipw and dr only");
  }
  if (bandwidth_from(o, cfg).mode == BandwidthChoice::Mode::oracle) {
    throw InputError("the oracle bandwidth needs the true curve; use 'simulate'");
  }
  const BandwidthSearch s = run_selection(p);
  std::ostringstream table;
  io::write_risk_table(table, s);
  out << "selected_h," << io::format_double(s.selected) << '\n';
  out << "risk," << io::format_double(s.risk_at_selected) << '\n';
  if (o.output.empty()) {
    out << table.str();
  } else {
    write_text(o.output, table.str());
  }
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> keys = {"n", "replications", "base_seed", "treatment_model",
                                   "outcome_model", "estimators", "bandwidth_modes",
                                   "trim_fraction", "kernel", "h_range",
                                   "fixed_bandwidth", "grid_points",
                                   "max_failure_rate", "truth_draws"};
  json cfg = load_config(o.config, keys);
  if (o.output.empty()) throw InputError("--output is required");
  const std::size_t draws = config_value<std::size_t>(cfg, "truth_draws", 1'000'000);
  if (draws < 1000) throw InputError("truth_draws must be >= 1000");
  cfg.erase("schema");
  cfg.erase("truth_draws");
  sim::SimConfig config = sim::SimConfig::from_json(cfg);
  if (o.seed) config.base_seed = *o.seed;
  if (o.kernel) config.kernel = parse_kernel_family(*o.kernel);
  if (o.kind) config.estimators = {parse_estimator_kind(*o.kind)};
  if (o.bandwidth) {
    const BandwidthChoice b = parse_bandwidth(*o.bandwidth);
    if (b.mode == BandwidthChoice::Mode::loo) {
      config.bandwidth_modes = {sim::BandwidthMode::loo};
    } else if (b.mode == BandwidthChoice::Mode::oracle) {
      config.bandwidth_modes = {sim::BandwidthMode::oracle};
    } else {
      config.bandwidth_modes = {sim::BandwidthMode::fixed};
      config.fixed_bandwidth = b.value;
    }
  }
  config.validate();

  err << "building truth oracle (" << draws << " draws)\n";
  const sim::TruthOracle truth(draws);
  const std::size_t step = std::max<std::size_t>(1, config.replications / 10);
  const auto report = sim::run_study(config, truth, [&](std::size_t done, std::size_t total) {
    if (done % step == 0 || done == total) {
      err << "replication " << done << "/" << total << '\n';
    }
  });
  write_text(o.output, report.to_csv());
  json j = report.to_json();
  j["schema"] = 1;
  j["truth_draws"] = draws;
  write_text(sibling_json_path(o.output), j.dump(2) + "\n");
  if (report.failed > 0) {
    err << "warning: " << report.failed << " replications failed and were dropped\n";
  }
  out << report.to_csv();
  return kExitOk;
}

int cmd_export(const Options& o, std::ostream& out, std::ostream&) {
  const json cfg = load_config(o.config, {"what", "n", "seed", "truth_draws", "points"});
  if (o.output.empty()) throw InputError("--output is required");
  const std::string what = o.what ? *o.what : config_value<std::string>(cfg, "what", "data");
  std::ostringstream text;
  if (what == "data") {
    const std::size_t n = o.n ? *o.n : config_value<std::size_t>(cfg, "n", 1000);
    const std::uint64_t seed = o.seed ? *o.seed : config_value<std::uint64_t>(cfg, "seed", 1);
    if (n < 2) throw InputError("n must be >= 2");
    io::write_dataset(text, sim::generate_data(n, seed));
  } else if (what == "truth") {
    const std::size_t draws = config_value<std::size_t>(cfg, "truth_draws", 1'000'000);
    const std::size_t points = config_value<std::size_t>(cfg, "points", 101);
    if (draws < 1000 || points < 2) throw InputError("need truth_draws >= 1000, points >= 2");
    const sim::TruthOracle truth(draws);
    text << "a,theta,theta_se,varpi,varpi_se\n";
    for (std::size_t k = 0; k < points; ++k) {
      const double a = sim::kTreatmentScale * static_cast<double>(k) /
                       static_cast<double>(points - 1);
      const auto t = truth.theta_exact(a);
      const auto v = truth.varpi_exact(a);
      text << io::format_double(a) << ',' << io::format_double(t.value) << ','
           << io::format_double(t.std_error) << ',' << io::format_double(v.value) << ','
           << io::format_double(v.std_error) << '\n';
    }
  } else {
    throw InputError("--what must be data or truth, got '" + what + "'");
  }
  write_text(o.output, text.str());
  out << "wrote " << o.output << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& o, bool with_input, bool with_estimation) {
  if (with_input) cmd->add_option("--input", o.input, "Input CSV (header y,a,l1..lp)");
  cmd->add_option("--output", o.output, "Output path");
  cmd->add_option("--config", o.config, "JSON config (\"schema\": 1)");
  cmd->add_option("--jobs", o.jobs, "Worker threads (fallback: DRCURVE_THREADS)");
  if (with_estimation) {
    cmd->add_option("--kind", o.kind, "Estimator: reg, ipw or dr");
    cmd->add_option("--kernel", o.kernel,
                    "Kernel: epanechnikov, uniform or truncated_gaussian");
    cmd->add_option("--bandwidth", o.bandwidth, "loo, oracle or a positive value");
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Doubly robust estimation of continuous treatment effect curves",
               "drcurve"};
  app.require_subcommand(1);
  auto* estimate = app.add_subcommand("estimate", "Estimate an effect curve from CSV data");
  auto* simulate = app.add_subcommand("simulate", "Run the simulation study");
  auto* bandwidth = app.add_subcommand("bandwidth", "Select a bandwidth by leave-one-out risk");
  auto* exporter = app.add_subcommand("export", "Export simulated data or the true curve");
  add_common(estimate, o, true, true);
  estimate->add_option("--ci-level", o.ci_level, "Wald interval level (default 0.95)");
  add_common(bandwidth, o, true, true);
  add_common(simulate, o, false, true);
  simulate->add_option("--seed", o.seed, "Base seed");
  add_common(exporter, o, false, false);
  exporter->add_option("--seed", o.seed, "Seed for generated data");
  exporter->add_option("--what", o.what, "data or truth");
  exporter->add_option("--n", o.n, "Sample size for generated data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  }

  try {
    apply_jobs(o);
    if (estimate->parsed()) return cmd_estimate(o, out, err);
    if (simulate->parsed()) return cmd_simulate(o, out, err);
    if (bandwidth->parsed()) return cmd_bandwidth(o, out, err);
    return cmd_export(o, out, err);
  } catch (const InputError& e) {
    err << "drcurve: input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "drcurve: input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "drcurve: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace drcurve::cli
