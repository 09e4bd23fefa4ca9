#pragma once

#include <span>
#include <vector>

#include "json.hpp"

namespace ecorank {

/// A cumulative distribution stored as knots.
///
/// Step CDFs are right-continuous: the value cdf[i] holds on
/// [support[i], support[i+1]) and the function is 0 left of support[0].
/// Linear CDFs interpolate between knots (KDE grids); they are 0 left of the
/// first knot and 1 right of the last.
///
/// Invariants: support strictly increasing, cdf nondecreasing in [0, 1],
/// cdf.back() == 1.
struct ParamECDF {
  enum class Shape { Step, Linear };

  std::vector<double> support;
  std::vector<double> cdf;
  Shape shape = Shape::Step;

  double operator()(double x) const;  // F(x)
  double left_limit(double x) const;  // F(x-)

  double lower() const { return support.front(); }
  double upper() const { return support.back(); }
  double mean() const;
  bool empty() const { return support.empty(); }

  /// Copy with every knot moved by delta.
  ParamECDF shifted(double delta) const;
};

/// Standard empirical CDF of a sample. Throws std::invalid_argument when empty.
ParamECDF empirical_cdf(std::span<const double> values);

/// Throws std::invalid_argument describing the first broken invariant.
void check_invariants(const ParamECDF& f);

void to_json(nlohmann::json& j, const ParamECDF& f);
void from_json(const nlohmann::json& j, ParamECDF& f);

}  // namespace ecorank
