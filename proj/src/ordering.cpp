#include "ecorank/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

// Walks a CDF along increasing abscissae. After at(x), `next_` is the first
// knot strictly greater than x.
class Cursor {
 public:
  explicit Cursor(const ParamECDF& f) : f_(f) {}

  double at(double x) {
    while (next_ < f_.support.size() && f_.support[next_] <= x) ++next_;
    return segment_value(x);
  }

  // Limit from the left at y, where y lies in the segment found by the last at().
  double left_limit_within(double y) const { return segment_value(y); }

 private:
  double segment_value(double x) const {
    if (next_ == 0) return 0.0;
    if (next_ == f_.support.size()) return f_.cdf.back();
    if (f_.shape == ParamECDF::Shape::Step) return f_.cdf[next_ - 1];
    const double x0 = f_.support[next_ - 1], x1 = f_.support[next_];
    const double w = (x - x0) / (x1 - x0);
    return f_.cdf[next_ - 1] + w * (f_.cdf[next_] - f_.cdf[next_ - 1]);
  }

  const ParamECDF& f_;
  std::size_t next_ = 0;
};

std::vector<double> merged_knots(const ParamECDF& f, const ParamECDF& g) {
  std::vector<double> x;
  x.reserve(f.support.size() + g.support.size());
  std::merge(f.support.begin(), f.support.end(), g.support.begin(), g.support.end(), std::back_inserter(x));
  x.erase(std::unique(x.begin(), x.end()), x.end());
  return x;
}

}  // namespace

SsdIntegral ssd_integral(const ParamECDF& f, const ParamECDF& g) {
  SsdIntegral out;
  const auto x = merged_knots(f, g);
  if (x.size() < 2) return out;
  Cursor cf(f), cg(g);
  double running = 0.0;
  double min_running = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double width = x[k + 1] - x[k];
    const double d0 = cg.at(x[k]) - cf.at(x[k]);
    const double d1 = cg.left_limit_within(x[k + 1]) - cf.left_limit_within(x[k + 1]);
    if (d0 < 0.0 && d1 > 0.0) {
      // integrand crosses zero inside the interval: the running integral bottoms out there
      const double t = width * (-d0) / (d1 - d0);
      min_running = std::min(min_running, running + 0.5 * d0 * t);
    }
    running += 0.5 * (d0 + d1) * width;
    min_running = std::min(min_running, running);
  }
  out.min_running = min_running;
  out.total = running;
  return out;
}

double default_ssd_epsilon(const ParamECDF& f, const ParamECDF& g) {
  const double lo = std::min(f.lower(), g.lower());
  const double hi = std::max(f.upper(), g.upper());
  return 1e-9 * (hi - lo);
}

namespace {

// Same walk as ssd_integral, stopping as soon as the running integral drops
// below -eps. The total equals mean(f) - mean(g) up to rounding, so a mean
// gap well under eps settles the pair without a walk.
bool dominates_scan(const ParamECDF& f, const ParamECDF& g, double mean_f, double mean_g, double eps) {
  if (mean_f - mean_g <= 0.5 * eps) return false;
  // merge the two supports lazily; most pairs exit within the left tail
  const auto& xf = f.support;
  const auto& xg = g.support;
  std::size_t i = 0, j = 0;
  auto next_knot = [&]() -> std::optional<double> {
    if (i == xf.size() && j == xg.size()) return std::nullopt;
    double v;
    if (j == xg.size() || (i < xf.size() && xf[i] < xg[j])) {
      v = xf[i];
    } else {
      v = xg[j];
    }
    while (i < xf.size() && xf[i] == v) ++i;
    while (j < xg.size() && xg[j] == v) ++j;
    return v;
  };
  auto x0 = next_knot();
  if (!x0) return false;
  Cursor cf(f), cg(g);
  double running = 0.0;
  for (auto x1 = next_knot(); x1; x0 = x1, x1 = next_knot()) {
    const double width = *x1 - *x0;
    const double d0 = cg.at(*x0) - cf.at(*x0);
    const double d1 = cg.left_limit_within(*x1) - cf.left_limit_within(*x1);
    if (d0 < 0.0 && d1 > 0.0) {
      const double t = width * (-d0) / (d1 - d0);
      if (running + 0.5 * d0 * t < -eps) return false;
    }
    running += 0.5 * (d0 + d1) * width;
    if (running < -eps) return false;
  }
  return running > eps;
}

}  // namespace

bool ssd_dominates(const ParamECDF& f, const ParamECDF& g, std::optional<double> epsilon) {
  const double eps = epsilon.value_or(default_ssd_epsilon(f, g));
  return dominates_scan(f, g, f.mean(), g.mean(), eps);
}

std::string_view to_string(DominanceVerdict v) {
  switch (v) {
    case DominanceVerdict::FirstDominates: return "FirstDominates";
    case DominanceVerdict::SecondDominates: return "SecondDominates";
    case DominanceVerdict::Neither: return "Neither";
  }
  return "Neither";
}

DominanceVerdict verdict(const ParamECDF& f, const ParamECDF& g, std::optional<double> epsilon) {
  const bool fg = ssd_dominates(f, g, epsilon);
  const bool gf = ssd_dominates(g, f, epsilon);
  if (fg && !gf) return DominanceVerdict::FirstDominates;
  if (gf && !fg) return DominanceVerdict::SecondDominates;
  return DominanceVerdict::Neither;
}

std::vector<PeerGroup> make_peer_groups(std::span<const BuildingRecord> buildings, const BucketSpec& buckets) {
  std::map<CohortKey, std::vector<std::string>> by_key;
  for (const auto& b : buildings) by_key[cohort_key(b, buckets)].push_back(b.id);
  std::vector<PeerGroup> out;
  for (auto& [key, ids] : by_key) {
    std::sort(ids.begin(), ids.end());
    PeerGroup g;
    g.key = key;
    g.member_ids = std::move(ids);
    g.discarded = static_cast<int>(g.member_ids.size()) < buckets.min_cohort;
    out.push_back(std::move(g));
  }
  return out;
}

int DominanceCounts::of(ModelParam p, const std::string& id) const {
  const auto& m = wins[static_cast<std::size_t>(p)];
  auto it = m.find(id);
  return it == m.end() ? 0 : it->second;
}

DominanceCounts dominance_counts(const PeerGroup& group, const std::map<std::string, BuildingEcdfs>& ecdfs,
                                 int jobs) {
  DominanceCounts out;
  out.group_size = group.member_ids.size();
  std::vector<const BuildingEcdfs*> members;
  for (const auto& id : group.member_ids) {
    auto it = ecdfs.find(id);
    if (it == ecdfs.end()) throw Error(ErrorCode::MissingEcdf, id);
    members.push_back(&it->second);
  }
  const std::size_t n = members.size();
  if (n < 2) return out;

  std::array<std::vector<double>, 3> means;
  for (auto p : kModelParams) {
    const auto k = static_cast<std::size_t>(p);
    for (const auto* m : members) means[k].push_back((*m)[k].mean());
  }

  // wins[p][i]; each worker owns whole rows i so there is no shared write.
  std::array<std::vector<int>, 3> wins;
  for (auto& w : wins) w.assign(n, 0);
  auto rows = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        for (auto p : kModelParams) {
          const auto k = static_cast<std::size_t>(p);
          const auto& fi = (*members[i])[k];
          const auto& fj = (*members[j])[k];
          if (dominates_scan(fi, fj, means[k][i], means[k][j], default_ssd_epsilon(fi, fj))) ++wins[k][i];
        }
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(n)));
  if (workers == 1) {
    rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(rows, w, workers);
  }
  for (auto p : kModelParams) {
    const auto k = static_cast<std::size_t>(p);
    for (std::size_t i = 0; i < n; ++i) out.wins[k][group.member_ids[i]] = wins[k][i];
  }
  return out;
}

void write_dominance_counts(const std::filesystem::path& path, std::span<const DominanceCounts> counts) {
  std::ostringstream os;
  os << "building_id,param,wins,group_size\n";
  for (const auto& c : counts) {
    for (auto p : kModelParams) {
      for (const auto& [id, w] : c.wins[static_cast<std::size_t>(p)]) {
        os << id << ',' << to_string(p) << ',' << w << ',' << c.group_size << '\n';
      }
    }
  }
  csv::write_atomic(path, os.str());
}

}  // namespace ecorank
