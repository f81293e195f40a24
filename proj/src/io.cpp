#include "drcurve/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "drcurve/errors.hpp"

namespace drcurve::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::optional<double> parse_double(std::string_view text) {
  if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return x;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

Dataset read_dataset(std::istream& in, std::optional<Support> support) {
  std::string line;
  if (!std::getline(in, line) || blank(line)) {
    throw InputError("input CSV is empty; expected header y,a,l1,...");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  int col_y = -1;
  int col_a = -1;
  std::map<int, int> covariate_cols;  // covariate index -> column
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    const int col = static_cast<int>(c);
    int* target = nullptr;
    if (name == "y") {
      target = &col_y;
    } else if (name == "a") {
      target = &col_a;
    } else if (name.size() > 1 && name[0] == 'l' &&
               name.find_first_not_of("0123456789", 1) == std::string::npos &&
               name[1] != '0') {
      const int k = std::stoi(name.substr(1));
      if (covariate_cols.count(k)) {
        throw InputError("duplicate column '" + name + "' in header");
      }
      covariate_cols[k] = col;
      continue;
    } else {
      throw InputError("unexpected column '" + name +
                       "' in header (expected y, a, l1, ..., lp)");
    }
    if (*target >= 0) throw InputError("duplicate column '" + name + "' in header");
    *target = col;
  }
  if (col_y < 0) throw InputError("missing column 'y' in header");
  if (col_a < 0) throw InputError("missing column 'a' in header");
  const std::size_t p = covariate_cols.size();
  for (std::size_t k = 1; k <= p; ++k) {
    if (!covariate_cols.count(static_cast<int>(k))) {
      throw InputError("missing column 'l" + std::to_string(k) +
                       "' (covariates must be l1..lp without gaps)");
    }
  }

  std::vector<double> y;
  std::vector<double> a;
  std::vector<double> l;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw InputError("row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    const auto get = [&](int col) {
      const auto v = parse_double(fields[static_cast<std::size_t>(col)]);
      if (!v || !std::isfinite(*v)) {
        throw InputError("row " + std::to_string(row) + ", column '" +
                         header[static_cast<std::size_t>(col)] +
                         "': not a finite number ('" +
                         fields[static_cast<std::size_t>(col)] + "')");
      }
      return *v;
    };
    y.push_back(get(col_y));
    a.push_back(get(col_a));
    for (std::size_t k = 1; k <= p; ++k) l.push_back(get(covariate_cols[static_cast<int>(k)]));
  }
  const std::size_t n = y.size();
  CovariateMatrix cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = l[i * p + k];
    }
  }
  return Dataset(std::move(cov), std::move(a), std::move(y), support);
}

Dataset read_dataset_file(const std::string& path, std::optional<Support> support) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return read_dataset(in, support);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "y,a";
  for (std::size_t k = 1; k <= data.covariate_count(); ++k) out << ",l" << k;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.outcome()[i]) << ',' << format_double(data.treatment()[i]);
    for (double v : data.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_curve(std::ostream& out, const EffectCurve& curve) {
  out << "a,estimate,stderr,ci_low,ci_high\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << format_double(curve.grid[k]) << ',' << format_double(curve.estimates[k])
        << ',' << format_double(curve.std_error[k]) << ','
        << format_double(curve.ci_low[k]) << ',' << format_double(curve.ci_high[k])
        << '\n';
  }
}

EffectCurve read_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      split_fields(line) !=
          std::vector<std::string>{"a", "estimate", "stderr", "ci_low", "ci_high"}) {
    throw InputError("curve CSV must start with a,estimate,stderr,ci_low,ci_high");
  }
  EffectCurve c;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    const auto f = split_fields(line);
    if (f.size() != 5) throw InputError("curve row " + std::to_string(row) + " malformed");
    std::array<double, 5> v{};
    for (std::size_t j = 0; j < 5; ++j) {
      const auto x = parse_double(f[j]);
      if (!x) throw InputError("curve row " + std::to_string(row) + " malformed");
      v[j] = *x;
    }
    c.grid.push_back(v[0]);
    c.estimates.push_back(v[1]);
    c.std_error.push_back(v[2]);
    c.ci_low.push_back(v[3]);
    c.ci_high.push_back(v[4]);
    c.feasible.push_back(!std::isnan(v[1]));
  }
  return c;
}

nlohmann::json curve_metadata(const EffectCurve& curve,
                              const std::vector<std::string>& warnings) {
  nlohmann::json j;
  j["schema"] = 1;
  j["kind"] = std::string(to_string(curve.kind));
  j["kernel"] = std::string(to_string(curve.kernel));
  j["bandwidth"] = curve.kind == EstimatorKind::reg ? nlohmann::json(nullptr)
                                                    : nlohmann::json(curve.bandwidth);
  j["variance_method"] = curve.variance_method
                             ? nlohmann::json(std::string(to_string(*curve.variance_method)))
                             : nlohmann::json(nullptr);
  j["ci_level"] = curve.variance_method ? nlohmann::json(curve.ci_level)
                                        : nlohmann::json(nullptr);
  if (curve.variance_method) {
    j["ci_target"] = "smoothed parameter theta*_h(a), not theta(a)";
  }
  j["floored_count"] = curve.floored_count;
  j["grid_points"] = curve.size();
  j["feasible_points"] = curve.feasible_count();
  j["warnings"] = warnings;
  return j;
}

void write_risk_table(std::ostream& out, const BandwidthSearch& search) {
  out << "h,risk\n";
  for (const auto& r : search.risk_table) {
    out << format_double(r.bandwidth) << ',' << format_double(r.risk) << '\n';
  }
}

}  // namespace drcurve::io
