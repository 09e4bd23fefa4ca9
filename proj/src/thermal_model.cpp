#include "ecorank/thermal_model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

// Dense solve for the tiny normal-equation systems used here (n <= 5).
// Returns false when the system is numerically singular.
template <std::size_t N>
bool solve_small(std::array<std::array<double, N>, N> a, std::array<double, N> b, std::size_t n,
                 std::array<double, N>& x) {
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i][i]));
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) <= 1e-12 * scale) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return true;
}

// Sufficient statistics of y against the regressors [1, heating hinge, cooling hinge].
struct HingeStats {
  double n = 0, sy = 0, syy = 0;
  double sh = 0, shh = 0, shy = 0;
  double sc = 0, scc = 0, scy = 0;
  double shc = 0;
};

HingeStats hinge_stats(const AlignedSeries& a, double t_heat, double t_cool) {
  HingeStats s;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double y = a.energy[k];
    const double xh = hinge(t_heat - a.temperature[k]);
    const double xc = hinge(a.temperature[k] - t_cool);
    s.n += 1;
    s.sy += y;
    s.syy += y * y;
    s.sh += xh;
    s.shh += xh * xh;
    s.shy += xh * y;
    s.sc += xc;
    s.scc += xc * xc;
    s.scy += xc * y;
    s.shc += xh * xc;
  }
  return s;
}

struct Coefficients {
  double base = 0, gamma_heat = 0, gamma_cool = 0;
  double sse = 0;
};

// Exact nonnegative least squares over (base, gamma_heat, gamma_cool) by
// enumerating active sets; with three variables this is cheap and exact.
Coefficients clamped_least_squares(const HingeStats& s) {
  const double g[3][3] = {{s.n, s.sh, s.sc}, {s.sh, s.shh, s.shc}, {s.sc, s.shc, s.scc}};
  const double r[3] = {s.sy, s.shy, s.scy};
  Coefficients best;
  best.sse = s.syy;
  bool have = false;
  for (unsigned mask = 1; mask < 8; ++mask) {
    std::array<std::size_t, 3> idx{};
    std::size_t m = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (mask & (1u << j)) idx[m++] = j;
    }
    std::array<std::array<double, 3>, 3> a{};
    std::array<double, 3> b{}, x{};
    for (std::size_t i = 0; i < m; ++i) {
      b[i] = r[idx[i]];
      for (std::size_t k = 0; k < m; ++k) a[i][k] = g[idx[i]][idx[k]];
    }
    if (!solve_small<3>(a, b, m, x)) continue;
    bool feasible = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (x[i] < 0.0) feasible = false;
    }
    if (!feasible) continue;
    double fitted = 0.0;
    for (std::size_t i = 0; i < m; ++i) fitted += x[i] * b[i];
    const double sse = std::max(0.0, s.syy - fitted);
    if (!have || sse < best.sse) {
      Coefficients c;
      c.sse = sse;
      for (std::size_t i = 0; i < m; ++i) {
        if (idx[i] == 0) c.base = x[i];
        if (idx[i] == 1) c.gamma_heat = x[i];
        if (idx[i] == 2) c.gamma_cool = x[i];
      }
      best = c;
      have = true;
    }
  }
  return best;
}

double residual_sd(double sse, std::size_t n, std::size_t fitted) {
  const double dof = n > fitted ? static_cast<double>(n - fitted) : 1.0;
  return std::sqrt(sse / dof);
}

struct Candidate {
  ParamPoint p;
  double sse = 0;
};

Candidate evaluate(const AlignedSeries& a, double t_heat, double t_cool) {
  const auto c = clamped_least_squares(hinge_stats(a, t_heat, t_cool));
  Candidate out;
  out.p = ParamPoint{c.base, c.gamma_heat, c.gamma_cool, t_heat, t_cool, 0.0};
  out.sse = c.sse;
  return out;
}

// With the heating/cooling day partition fixed the model is linear in
// (base, gamma_h * t_h, gamma_h, gamma_c, gamma_c * t_c). Solving that system
// recovers continuous balance points that the lattice cannot hit exactly.
std::optional<ParamPoint> solve_fixed_partition(const AlignedSeries& a, double heat_below, double cool_above,
                                                bool use_heat, bool use_cool) {
  std::array<std::array<double, 5>, 5> g{};
  std::array<double, 5> r{};
  std::array<std::size_t, 5> idx{};
  std::size_t m = 0;
  idx[m++] = 0;
  if (use_heat) {
    idx[m++] = 1;
    idx[m++] = 2;
  }
  if (use_cool) {
    idx[m++] = 3;
    idx[m++] = 4;
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a.temperature[k];
    const bool h = t < heat_below;
    const bool c = t > cool_above;
    const double col[5] = {1.0, h ? 1.0 : 0.0, h ? -t : 0.0, c ? t : 0.0, c ? -1.0 : 0.0};
    for (std::size_t i = 0; i < m; ++i) {
      r[i] += col[idx[i]] * a.energy[k];
      for (std::size_t j = 0; j < m; ++j) g[i][j] += col[idx[i]] * col[idx[j]];
    }
  }
  std::array<double, 5> x{};
  if (!solve_small<5>(g, r, m, x)) return std::nullopt;
  double coef[5] = {0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < m; ++i) coef[idx[i]] = x[i];
  ParamPoint p;
  p.base = coef[0];
  p.gamma_heat = coef[2];
  p.gamma_cool = coef[3];
  p.t_heat = use_heat && coef[2] > 0 ? coef[1] / coef[2] : kBalanceMin;
  p.t_cool = use_cool && coef[3] > 0 ? coef[4] / coef[3] : kBalanceMax;
  p.sigma = 0.0;
  if (use_heat && !(coef[2] > 0)) return std::nullopt;
  if (use_cool && !(coef[3] > 0)) return std::nullopt;
  if (!is_valid(p)) return std::nullopt;
  // the solution must reproduce the partition it was solved under
  for (double t : a.temperature) {
    if (use_heat && ((t < heat_below) != (t < p.t_heat)) && t != p.t_heat) return std::nullopt;
    if (use_cool && ((t > cool_above) != (t > p.t_cool)) && t != p.t_cool) return std::nullopt;
  }
  return p;
}

void apply_sentinels(ParamPoint& p) {
  if (p.gamma_heat == 0.0) p.t_heat = kBalanceMin;
  if (p.gamma_cool == 0.0) p.t_cool = kBalanceMax;
}

}  // namespace

bool is_valid(const ParamPoint& p, bool require_sigma) {
  if (!(p.base >= 0.0 && p.gamma_heat >= 0.0 && p.gamma_cool >= 0.0)) return false;
  if (!(p.t_heat >= kBalanceMin && p.t_cool <= kBalanceMax && p.t_heat <= p.t_cool)) return false;
  if (!std::isfinite(p.base) || !std::isfinite(p.gamma_heat) || !std::isfinite(p.gamma_cool)) return false;
  if (require_sigma && !(p.sigma > 0.0 && std::isfinite(p.sigma))) return false;
  return true;
}

PredictedSeries predict(const ParamPoint& p, const WeatherSeries& weather) {
  PredictedSeries out;
  out.days.reserve(weather.days.size());
  for (const auto& d : weather.days) out.days.push_back({d.date, predict_day(p, d.value)});
  return out;
}

std::vector<double> predict(const ParamPoint& p, std::span<const double> temps) {
  std::vector<double> out;
  out.reserve(temps.size());
  for (double t : temps) out.push_back(predict_day(p, t));
  return out;
}

double residual_sum_squares(const ParamPoint& p, const AlignedSeries& aligned) {
  double sse = 0.0;
  for (std::size_t k = 0; k < aligned.size(); ++k) {
    const double r = aligned.energy[k] - predict_day(p, aligned.temperature[k]);
    sse += r * r;
  }
  return sse;
}

ParamPoint fit_ls_65(const AlignedSeries& aligned) {
  if (aligned.size() < 10) throw Error(ErrorCode::DegenerateDesign, aligned.building_id + ": fewer than 10 days");
  const auto [lo, hi] = std::minmax_element(aligned.temperature.begin(), aligned.temperature.end());
  if (*lo == *hi && *lo != kAnnualBalancePoint) {
    throw Error(ErrorCode::DegenerateDesign, aligned.building_id + ": constant temperature");
  }
  auto cand = evaluate(aligned, kAnnualBalancePoint, kAnnualBalancePoint);
  cand.p.sigma = residual_sd(cand.sse, aligned.size(), 3);
  return cand.p;
}

ParamPoint fit_ls_range(const AlignedSeries& aligned, const LsRangeOptions& options) {
  if (aligned.size() < 20) throw Error(ErrorCode::DegenerateDesign, aligned.building_id + ": fewer than 20 days");
  const auto [lo, hi] = std::minmax_element(aligned.temperature.begin(), aligned.temperature.end());
  if (*hi - *lo < 15.0) {
    throw Error(ErrorCode::DegenerateDesign, aligned.building_id + ": temperatures span less than 15 F");
  }

  // Per-balance-point statistics; the hinges never overlap when t_heat <= t_cool,
  // so the pair statistics are sums of the one-sided ones.
  const int steps = static_cast<int>(std::lround((kBalanceMax - kBalanceMin) / options.lattice_step));
  std::vector<HingeStats> heat(steps + 1), cool(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = kBalanceMin + i * options.lattice_step;
    heat[i] = hinge_stats(aligned, t, kBalanceMax + 1e9);
    cool[i] = hinge_stats(aligned, -1e9, t);
  }
  // Keep a few of the best lattice points: with a weak slope the best coarse
  // point can sit more than one step from the true balance point.
  constexpr std::size_t kPolishSeeds = 4;
  std::vector<Candidate> top;
  for (int i = 0; i <= steps; ++i) {
    for (int j = i; j <= steps; ++j) {
      HingeStats s = heat[i];
      s.sc = cool[j].sc;
      s.scc = cool[j].scc;
      s.scy = cool[j].scy;
      s.shc = 0.0;
      const auto c = clamped_least_squares(s);
      if (top.size() == kPolishSeeds && !(c.sse < top.back().sse)) continue;
      Candidate cand;
      cand.p = ParamPoint{c.base, c.gamma_heat, c.gamma_cool, kBalanceMin + i * options.lattice_step,
                          kBalanceMin + j * options.lattice_step, 0.0};
      cand.sse = c.sse;
      auto pos = std::upper_bound(top.begin(), top.end(), cand.sse,
                                  [](double v, const Candidate& x) { return v < x.sse; });
      top.insert(pos, cand);
      if (top.size() > kPolishSeeds) top.pop_back();
    }
  }
  Candidate best = top.front();

  // Polish on a finer lattice around each kept coarse point.
  const int span = static_cast<int>(std::lround(options.lattice_step / options.polish_step));
  for (const auto& coarse : top) {
    for (int di = -span; di <= span; ++di) {
      const double th = coarse.p.t_heat + di * options.polish_step;
      if (th < kBalanceMin || th > kBalanceMax) continue;
      for (int dj = -span; dj <= span; ++dj) {
        const double tc = coarse.p.t_cool + dj * options.polish_step;
        if (tc < th || tc > kBalanceMax) continue;
        auto c = evaluate(aligned, th, tc);
        if (c.sse < best.sse) best = c;
      }
    }
  }

  if (options.exact_segments) {
    std::vector<double> u = aligned.temperature;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    const auto m = static_cast<long>(u.size());
    const auto below = [&](double t) { return static_cast<long>(std::lower_bound(u.begin(), u.end(), t) - u.begin()); };
    const auto above = [&](double t) { return static_cast<long>(u.end() - std::upper_bound(u.begin(), u.end(), t)); };
    const long kh = below(best.p.t_heat);
    const long kc = above(best.p.t_cool);
    for (long dh = -1; dh <= 1; ++dh) {
      for (long dc = -1; dc <= 1; ++dc) {
        const long h = kh + dh, c = kc + dc;
        if (h < 0 || c < 0 || h > m || c > m || h + c > m) continue;
        const bool use_heat = h >= 2 && best.p.gamma_heat > 0.0;
        const bool use_cool = c >= 2 && best.p.gamma_cool > 0.0;
        const double heat_below = h < m ? u[h] : u[m - 1] + 1.0;
        const double cool_above = c < m ? u[m - 1 - c] : u[0] - 1.0;
        auto p = solve_fixed_partition(aligned, heat_below, cool_above, use_heat, use_cool);
        if (!p) continue;
        const double sse = residual_sum_squares(*p, aligned);
        if (sse < best.sse) {
          best.p = *p;
          best.sse = sse;
        }
      }
    }
  }

  apply_sentinels(best.p);
  best.p.sigma = residual_sd(best.sse, aligned.size(), 5);
  return best.p;
}

EnergySplit energy_split(const ParamPoint& p, std::span<const double> temps) {
  EnergySplit s;
  for (double t : temps) {
    s.heating += p.gamma_heat * hinge(p.t_heat - t);
    s.cooling += p.gamma_cool * hinge(t - p.t_cool);
  }
  s.baseload = p.base * static_cast<double>(temps.size());
  s.total = s.heating + s.cooling + s.baseload;
  return s;
}

EnergySplit energy_split(const ParamPoint& p, const WeatherSeries& weather) {
  const auto temps = weather.temperatures();
  return energy_split(p, temps);
}

double eui_kbtu_per_sqft(const EnergySplit& split, double floor_area) {
  if (!(floor_area > 0.0)) throw Error(ErrorCode::ZeroArea, "EUI needs a positive floor area");
  return to_kbtu(split.total) / floor_area;
}

double percent_error(double estimate, double truth) {
  if (truth == 0.0) return estimate == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return 100.0 * (estimate - truth) / truth;
}

void to_json(nlohmann::json& j, const ParamPoint& p) {
  j = nlohmann::json::object();
  const auto a = p.as_array();
  for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
    if (std::isfinite(a[i])) j[std::string(kParamNames[i])] = a[i];
    else j[std::string(kParamNames[i])] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ParamPoint& p) {
  std::array<double, ParamPoint::kDims> a{};
  for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
    const auto& v = j.at(std::string(kParamNames[i]));
    a[i] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  }
  p = ParamPoint::from_array(a);
}

void to_json(nlohmann::json& j, const EnergySplit& s) {
  j = nlohmann::json{{"heating", s.heating}, {"cooling", s.cooling}, {"baseload", s.baseload}, {"total", s.total}};
}

}  // namespace ecorank
