#include "drcurve/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "drcurve/errors.hpp"
#include "drcurve/numeric.hpp"

namespace drcurve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<PointEstimate> fit_at_observations(double h,
                                               const SortedDesign& design,
                                               KernelFamily family) {
  return smooth_at(design, design.treatments(), KernelSpec(family, h));
}

}  // namespace

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::grid ? "grid" : "golden_section";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "golden_section" || name == "golden") return Optimizer::golden_section;
  if (name == "grid") return Optimizer::grid;
  throw InputError("unknown optimizer '" + std::string(name) +
                   "' (expected golden_section or grid)");
}

void BandwidthSearch::validate() const {
  if (!(std::isfinite(h_min) && std::isfinite(h_max) && h_min > 0.0 &&
        h_min <= h_max)) {
    throw std::invalid_argument("bandwidth range must satisfy 0 < h_min <= h_max");
  }
  if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
}

BandwidthSearch default_search(std::span<const double> treatments) {
  if (treatments.size() < 2) throw InputError("need at least 2 treatments");
  CompensatedSum s;
  for (double a : treatments) s.add(a);
  const double mean = s.value() / static_cast<double>(treatments.size());
  CompensatedSum ss;
  for (double a : treatments) ss.add((a - mean) * (a - mean));
  const double sd =
      std::sqrt(ss.value() / static_cast<double>(treatments.size() - 1));
  const auto [lo, hi] = std::minmax_element(treatments.begin(), treatments.end());
  if (!(sd > 0.0)) throw InputError("treatment has no variation");
  BandwidthSearch search;
  search.h_min = 0.05 * sd;
  search.h_max = 5.0 * (*hi - *lo);
  return search;
}

double loo_risk(double h, const SortedDesign& design, KernelFamily family) {
  const auto fits = fit_at_observations(h, design, family);
  const auto y = design.responses();
  CompensatedSum risk;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].feasible || !(fits[i].self_weight < 1.0)) return kInf;
    const double r = (y[i] - fits[i].value) / (1.0 - fits[i].self_weight);
    risk.add(r * r);
  }
  return risk.value();
}

double loo_risk(double h, std::span<const double> treatments,
                const PseudoOutcomes& pseudo, KernelFamily family) {
  return loo_risk(h, SortedDesign(treatments, pseudo.values), family);
}

double oracle_risk(double h, const SortedDesign& design, KernelFamily family,
                   const std::function<double(double)>& truth) {
  const auto fits = fit_at_observations(h, design, family);
  const auto a = design.treatments();
  CompensatedSum risk;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].feasible) return kInf;
    const double r = truth(a[i]) - fits[i].value;
    risk.add(r * r);
  }
  return risk.value() / static_cast<double>(fits.size());
}

BandwidthSearch minimize_risk(const std::function<double(double)>& risk,
                              BandwidthSearch search) {
  search.validate();
  search.risk_table.clear();
  if (search.h_min == search.h_max) {
    const double r = risk(search.h_min);
    search.risk_table.push_back({search.h_min, r});
    if (!std::isfinite(r)) {
      throw SingularDesign("bandwidth " + std::to_string(search.h_min) +
                           " is infeasible");
    }
    search.selected = search.h_min;
    search.risk_at_selected = r;
    return search;
  }

  const double log_lo = std::log(search.h_min);
  const double log_hi = std::log(search.h_max);
  const std::size_t m = search.grid_size;
  std::vector<double> log_h(m);
  for (std::size_t k = 0; k < m; ++k) {
    log_h[k] = log_lo + (log_hi - log_lo) * static_cast<double>(k) /
                            static_cast<double>(m - 1);
  }
  std::size_t best = m;
  for (std::size_t k = 0; k < m; ++k) {
    // Exact endpoints so the scan covers the closed range.
    const double h = k == 0 ? search.h_min
                            : (k + 1 == m ? search.h_max : std::exp(log_h[k]));
    const double r = risk(h);
    search.risk_table.push_back({h, r});
    if (std::isfinite(r) && (best == m || r < search.risk_table[best].risk)) {
      best = k;
    }
  }
  if (best == m) {
    throw SingularDesign("no bandwidth in [" + std::to_string(search.h_min) +
                         ", " + std::to_string(search.h_max) +
                         "] gives a feasible fit");
  }
  search.selected = search.risk_table[best].bandwidth;
  search.risk_at_selected = search.risk_table[best].risk;
  if (search.optimizer == Optimizer::grid) return search;

  // Golden-section on log h over the neighbouring grid cells.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = log_h[best == 0 ? 0 : best - 1];
  double b = log_h[std::min(best + 1, m - 1)];
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = risk(std::exp(c));
  double fd = risk(std::exp(d));
  while (b - a > 1e-7) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = risk(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = risk(std::exp(d));
    }
  }
  const double x = fc <= fd ? c : d;
  const double fx = std::min(fc, fd);
  if (fx < search.risk_at_selected) {
    search.selected = std::clamp(std::exp(x), search.h_min, search.h_max);
    search.risk_at_selected = fx;
  }
  return search;
}

BandwidthSearch select_bandwidth(std::span<const double> treatments,
                                 const PseudoOutcomes& pseudo,
                                 KernelFamily family, BandwidthSearch search) {
  const SortedDesign design(treatments, pseudo.values);
  return minimize_risk(
      [&](double h) { return loo_risk(h, design, family); }, std::move(search));
}

BandwidthSearch oracle_bandwidth(std::span<const double> treatments,
                                 const PseudoOutcomes& pseudo,
                                 const std::function<double(double)>& truth,
                                 KernelFamily family, BandwidthSearch search) {
  const SortedDesign design(treatments, pseudo.values);
  return minimize_risk(
      [&](double h) { return oracle_risk(h, design, family, truth); },
      std::move(search));
}

BandwidthSearch select_bandwidth_split(const Dataset& data,
                                       const NuisanceSpec& spec,
                                       EstimatorKind kind, KernelFamily family,
                                       BandwidthSearch search) {
  if (kind == EstimatorKind::reg) {
    throw std::invalid_argument("bandwidth selection needs an ipw or dr kind");
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (i % 2 == 0 ? train : held_out).push_back(i);
  }
  const Dataset fit_half = data.subset(train);
  const Dataset eval_half = data.subset(held_out);
  const NuisanceFit fit = nuisance_for(fit_nuisance(fit_half, spec), kind);
  const PseudoOutcomes pseudo = compute_pseudo(eval_half, fit);
  return select_bandwidth(eval_half.treatment(), pseudo, family, std::move(search));
}

}  // namespace drcurve
