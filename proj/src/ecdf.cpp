#include "ecorank/ecdf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecorank {

double ParamECDF::operator()(double x) const {
  if (support.empty() || x < support.front()) return 0.0;
  if (x >= support.back()) return cdf.back();
  // first knot strictly greater than x
  auto it = std::upper_bound(support.begin(), support.end(), x);
  const auto hi = static_cast<std::size_t>(it - support.begin());
  const auto lo = hi - 1;
  if (shape == Shape::Step) return cdf[lo];
  const double w = (x - support[lo]) / (support[hi] - support[lo]);
  return cdf[lo] + w * (cdf[hi] - cdf[lo]);
}

double ParamECDF::left_limit(double x) const {
  if (support.empty() || x <= support.front()) return 0.0;
  if (x > support.back()) return cdf.back();
  auto it = std::lower_bound(support.begin(), support.end(), x);
  const auto hi = static_cast<std::size_t>(it - support.begin());
  const auto lo = hi - 1;
  if (shape == Shape::Step) return cdf[lo];
  const double w = (x - support[lo]) / (support[hi] - support[lo]);
  return cdf[lo] + w * (cdf[hi] - cdf[lo]);
}

double ParamECDF::mean() const {
  if (support.empty()) return 0.0;
  double m = support.front() * cdf.front();
  for (std::size_t i = 1; i < support.size(); ++i) {
    const double mass = cdf[i] - cdf[i - 1];
    m += mass * (shape == Shape::Step ? support[i] : 0.5 * (support[i - 1] + support[i]));
  }
  return m;
}

ParamECDF ParamECDF::shifted(double delta) const {
  ParamECDF out = *this;
  for (auto& x : out.support) x += delta;
  return out;
}

ParamECDF empirical_cdf(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empirical_cdf: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  ParamECDF f;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    f.support.push_back(sorted[i]);
    f.cdf.push_back(static_cast<double>(i + 1) / n);
  }
  f.cdf.back() = 1.0;
  return f;
}

void check_invariants(const ParamECDF& f) {
  if (f.support.empty()) throw std::invalid_argument("ECDF has no knots");
  if (f.support.size() != f.cdf.size()) throw std::invalid_argument("ECDF support/cdf size mismatch");
  for (std::size_t i = 0; i < f.support.size(); ++i) {
    if (!std::isfinite(f.support[i])) throw std::invalid_argument("ECDF knot not finite");
    if (!(f.cdf[i] >= 0.0 && f.cdf[i] <= 1.0)) throw std::invalid_argument("ECDF value outside [0,1]");
    if (i > 0 && !(f.support[i] > f.support[i - 1])) throw std::invalid_argument("ECDF support not increasing");
    if (i > 0 && f.cdf[i] < f.cdf[i - 1]) throw std::invalid_argument("ECDF decreasing");
  }
  if (f.cdf.back() != 1.0) throw std::invalid_argument("ECDF does not end at 1");
}

void to_json(nlohmann::json& j, const ParamECDF& f) {
  j = nlohmann::json{{"shape", f.shape == ParamECDF::Shape::Step ? "step" : "linear"},
                     {"support", f.support},
                     {"cdf", f.cdf}};
}

void from_json(const nlohmann::json& j, ParamECDF& f) {
  f.shape = j.at("shape").get<std::string>() == "linear" ? ParamECDF::Shape::Linear : ParamECDF::Shape::Step;
  f.support = j.at("support").get<std::vector<double>>();
  f.cdf = j.at("cdf").get<std::vector<double>>();
  check_invariants(f);
}

}  // namespace ecorank
