#include "drcurve/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "drcurve/errors.hpp"

namespace drcurve {

std::array<double, 4> kang_schafer(std::span<const double> l) {
  if (l.size() < 4) {
    throw std::invalid_argument("kang_schafer transform needs 4 covariates");
  }
  const double x3 = l[0] * l[2] / 25.0 + 0.6;
  const double x4 = l[1] + l[3] + 20.0;
  return {std::exp(l[0] / 2.0), l[1] / (1.0 + std::exp(l[0])) + 10.0,
          x3 * x3 * x3, x4 * x4};
}

namespace {

std::string trim(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

int parse_positive_int(std::string_view digits, std::string_view term) {
  if (digits.empty() ||
      !std::all_of(digits.begin(), digits.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw InputError("malformed design term '" + std::string(term) + "'");
  }
  return std::stoi(std::string(digits));
}

}  // namespace

Term Term::parse(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) throw InputError("empty design term");
  Term term;
  bool seen_constant = false;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t stop = std::min(s.find('*', start), s.size());
    const std::string_view factor(s.data() + start, stop - start);
    if (factor == "1") {
      seen_constant = true;
    } else if (!factor.empty() && factor[0] == 'a') {
      if (term.a_power != 0) throw InputError("repeated 'a' in term '" + s + "'");
      if (factor.size() == 1) {
        term.a_power = 1;
      } else if (factor[1] == '^') {
        term.a_power = parse_positive_int(factor.substr(2), s);
      } else {
        throw InputError("malformed design term '" + s + "'");
      }
    } else if (!factor.empty() && factor[0] == 'l') {
      if (term.covariate >= 0) {
        throw InputError("term '" + s + "' multiplies two covariates");
      }
      const int idx = parse_positive_int(factor.substr(1), s);
      if (idx < 1) throw InputError("covariate indices start at l1");
      term.covariate = idx - 1;
    } else {
      throw InputError("malformed design term '" + s + "'");
    }
    start = stop + 1;
  }
  if (seen_constant && (term.covariate >= 0 || term.a_power > 0)) {
    throw InputError("malformed design term '" + s + "'");
  }
  if (term.a_power > kMaxTreatmentPower) {
    throw InputError("treatment power above " +
                     std::to_string(kMaxTreatmentPower) + " in '" + s + "'");
  }
  return term;
}

std::string Term::name() const {
  std::string a_part;
  if (a_power == 1) a_part = "a";
  if (a_power > 1) a_part = "a^" + std::to_string(a_power);
  if (covariate < 0) return a_part.empty() ? "1" : a_part;
  const std::string l_part = "l" + std::to_string(covariate + 1);
  return a_part.empty() ? l_part : a_part + "*" + l_part;
}

FeatureMap::FeatureMap(CovariateTransform transform, std::vector<Term> terms)
    : transform_(transform), terms_(std::move(terms)) {
  for (const Term& t : terms_) {
    if (t.a_power < 0 || t.a_power > kMaxTreatmentPower || t.covariate < -1) {
      throw std::invalid_argument("invalid design term " + t.name());
    }
    if (transform_ == CovariateTransform::kang_schafer && t.covariate > 3) {
      throw std::invalid_argument("kang_schafer designs have 4 covariates");
    }
  }
}

FeatureMap FeatureMap::from_strings(CovariateTransform transform,
                                    const std::vector<std::string>& terms) {
  std::vector<Term> parsed;
  parsed.reserve(terms.size());
  for (const auto& t : terms) parsed.push_back(Term::parse(t));
  return FeatureMap(transform, std::move(parsed));
}

int FeatureMap::max_a_power() const {
  int p = 0;
  for (const Term& t : terms_) p = std::max(p, t.a_power);
  return p;
}

std::size_t FeatureMap::required_covariates() const {
  if (transform_ == CovariateTransform::kang_schafer) return 4;
  int max_idx = -1;
  for (const Term& t : terms_) max_idx = std::max(max_idx, t.covariate);
  return static_cast<std::size_t>(max_idx + 1);
}

std::vector<double> FeatureMap::transform_row(
    std::span<const double> row) const {
  if (transform_ == CovariateTransform::kang_schafer) {
    const auto x = kang_schafer(row);
    return {x.begin(), x.end()};
  }
  return {row.begin(), row.end()};
}

void FeatureMap::expand(std::span<const double> row, double a,
                        std::span<double> out) const {
  std::array<double, 4> ks{};
  std::span<const double> x = row;
  if (transform_ == CovariateTransform::kang_schafer) {
    ks = kang_schafer(row);
    x = ks;
  }
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const Term& t = terms_[k];
    double v = t.covariate < 0 ? 1.0 : x[static_cast<std::size_t>(t.covariate)];
    for (int p = 0; p < t.a_power; ++p) v *= a;
    out[k] = v;
  }
}

std::array<double, kMaxTreatmentPower + 1> FeatureMap::row_polynomial(
    std::span<const double> row, std::span<const double> coef) const {
  std::array<double, 4> ks{};
  std::span<const double> x = row;
  if (transform_ == CovariateTransform::kang_schafer) {
    ks = kang_schafer(row);
    x = ks;
  }
  std::array<double, kMaxTreatmentPower + 1> poly{};
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const Term& t = terms_[k];
    const double v =
        t.covariate < 0 ? 1.0 : x[static_cast<std::size_t>(t.covariate)];
    poly[static_cast<std::size_t>(t.a_power)] += coef[k] * v;
  }
  return poly;
}

nlohmann::json FeatureMap::to_json() const {
  nlohmann::json terms = nlohmann::json::array();
  for (const Term& t : terms_) terms.push_back(t.name());
  return {{"transform", transform_ == CovariateTransform::kang_schafer
                            ? "kang_schafer"
                            : "none"},
          {"terms", terms}};
}

FeatureMap FeatureMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("design must be a JSON object");
  CovariateTransform transform = CovariateTransform::none;
  if (j.contains("transform")) {
    if (!j["transform"].is_string()) {
      throw InputError("design.transform must be a string");
    }
    const auto name = j["transform"].get<std::string>();
    if (name == "kang_schafer") {
      transform = CovariateTransform::kang_schafer;
    } else if (name != "none") {
      throw InputError("unknown design transform '" + name + "'");
    }
  }
  if (!j.contains("terms") || !j["terms"].is_array()) {
    throw InputError("design.terms must be an array of strings");
  }
  std::vector<std::string> terms;
  for (const auto& t : j["terms"]) {
    if (!t.is_string()) throw InputError("design terms must be strings");
    terms.push_back(t.get<std::string>());
  }
  return from_strings(transform, terms);
}

FeatureMap linear_covariates(std::size_t p) {
  std::vector<Term> terms{{-1, 0}};
  for (std::size_t k = 0; k < p; ++k) {
    terms.push_back({static_cast<int>(k), 0});
  }
  return FeatureMap(CovariateTransform::none, std::move(terms));
}

}  // namespace drcurve
