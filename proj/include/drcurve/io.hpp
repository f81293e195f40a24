#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drcurve/bandwidth.hpp"
#include "drcurve/estimator.hpp"
#include "drcurve/nuisance.hpp"

namespace drcurve::io {

/// Comma-separated, header `y,a,l1,...,lp` (columns in any order, each
/// exactly once). Throws InputError naming the column or row at fault.
Dataset read_dataset(std::istream& in, std::optional<Support> support = {});
Dataset read_dataset_file(const std::string& path,
                          std::optional<Support> support = {});
void write_dataset(std::ostream& out, const Dataset& data);

/// Columns a,estimate,stderr,ci_low,ci_high; 17 significant digits, so a
/// re-read reproduces every value exactly. Infeasible points print "nan".
void write_curve(std::ostream& out, const EffectCurve& curve);
/// Reads the columns written by write_curve (metadata is not restored).
EffectCurve read_curve(std::istream& in);

nlohmann::json curve_metadata(const EffectCurve& curve,
                              const std::vector<std::string>& warnings);

void write_risk_table(std::ostream& out, const BandwidthSearch& search);

/// Locale-independent double parse of the whole field. nullopt on failure.
std::optional<double> parse_double(std::string_view text);
/// Shortest round-trip text of a double ("nan", "inf" for non-finite).
std::string format_double(double x);

}  // namespace drcurve::io
