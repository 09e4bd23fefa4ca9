#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "ecorank/ingest.hpp"
#include "json.hpp"

namespace ecorank {

inline constexpr double kBalanceMin = 32.0;  // degrees F
inline constexpr double kBalanceMax = 100.0;
inline constexpr double kAnnualBalancePoint = 65.0;

/// Five-parameter change-point model plus noise scale.
///
/// base is the weather-independent daily load; the slopes are energy per
/// degree-day below t_heat and above t_cool. When fit on area-normalized
/// data, base and the slopes are per square foot. sigma is NaN when the
/// estimator does not produce one (annual inversion).
struct ParamPoint {
  double base = 0.0;
  double gamma_heat = 0.0;
  double gamma_cool = 0.0;
  double t_heat = kAnnualBalancePoint;
  double t_cool = kAnnualBalancePoint;
  double sigma = std::numeric_limits<double>::quiet_NaN();

  static constexpr std::size_t kDims = 6;
  std::array<double, kDims> as_array() const { return {base, gamma_heat, gamma_cool, t_heat, t_cool, sigma}; }
  static ParamPoint from_array(const std::array<double, kDims>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

  bool operator==(const ParamPoint&) const = default;
};

inline constexpr std::array<std::string_view, ParamPoint::kDims> kParamNames = {
    "base", "gamma_heat", "gamma_cool", "t_heat", "t_cool", "sigma"};

/// Checks the bounds on the five model parameters; sigma is checked only when
/// require_sigma is set.
bool is_valid(const ParamPoint& p, bool require_sigma = false);

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

inline double predict_day(const ParamPoint& p, double temp_f) {
  return p.base + p.gamma_heat * hinge(p.t_heat - temp_f) + p.gamma_cool * hinge(temp_f - p.t_cool);
}

struct PredictedSeries {
  std::vector<DayValue> days;
};

PredictedSeries predict(const ParamPoint& p, const WeatherSeries& weather);
std::vector<double> predict(const ParamPoint& p, std::span<const double> temps);

double residual_sum_squares(const ParamPoint& p, const AlignedSeries& aligned);

/// Least squares with both balance points pinned at 65 F.
ParamPoint fit_ls_65(const AlignedSeries& aligned);

struct LsRangeOptions {
  double lattice_step = 1.0;   // coarse grid over (t_heat, t_cool)
  double polish_step = 0.1;    // local refinement around the best cell
  bool exact_segments = true;  // closed-form solve with the polished day partition fixed
};

/// Least squares over all five parameters.
ParamPoint fit_ls_range(const AlignedSeries& aligned, const LsRangeOptions& options = {});

struct EnergySplit {
  double heating = 0.0;
  double cooling = 0.0;
  double baseload = 0.0;
  double total = 0.0;
};

EnergySplit energy_split(const ParamPoint& p, const WeatherSeries& weather);
EnergySplit energy_split(const ParamPoint& p, std::span<const double> temps);

/// Energy-use intensity in kBtu per square foot for a split computed in kWh.
double eui_kbtu_per_sqft(const EnergySplit& split, double floor_area);

/// Signed percentage error of an estimate against ground truth.
double percent_error(double estimate, double truth);

void to_json(nlohmann::json& j, const ParamPoint& p);
void from_json(const nlohmann::json& j, ParamPoint& p);
void to_json(nlohmann::json& j, const EnergySplit& s);

}  // namespace ecorank
