#include "ecorank/region.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using Point = bg::model::point<double, 2, bg::cs::cartesian>;  // (longitude, latitude)
using Box = bg::model::box<Point>;
using Entry = std::pair<Point, std::size_t>;

struct SpatialIndex::Tree {
  bgi::rtree<Entry, bgi::quadratic<16>> rtree;
};

ParamPoint solve_annual(const AnnualRecord& rec, const WeatherSeries& weather, double floor_area) {
  if (!(floor_area > 0.0)) throw Error(ErrorCode::ZeroArea, rec.building_id);
  if (weather.days.empty()) throw Error(ErrorCode::ZeroDegreeDays, rec.building_id + ": no weather days");
  double hdd = 0.0, cdd = 0.0;
  for (const auto& d : weather.days) {
    hdd += hinge(kAnnualBalancePoint - d.value);
    cdd += hinge(d.value - kAnnualBalancePoint);
  }
  if (hdd == 0.0 && rec.heating > 0.0) throw Error(ErrorCode::ZeroDegreeDays, rec.building_id + ": heating");
  if (cdd == 0.0 && rec.cooling > 0.0) throw Error(ErrorCode::ZeroDegreeDays, rec.building_id + ": cooling");
  const double days = static_cast<double>(weather.days.size());
  ParamPoint p;
  p.gamma_heat = (hdd > 0.0 ? rec.heating / hdd : 0.0) / floor_area;
  p.gamma_cool = (cdd > 0.0 ? rec.cooling / cdd : 0.0) / floor_area;
  p.base = std::max(0.0, rec.total - rec.heating - rec.cooling) / days / floor_area;
  p.t_heat = p.t_cool = kAnnualBalancePoint;
  p.sigma = std::numeric_limits<double>::quiet_NaN();
  return p;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double silverman_bandwidth(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(s.size() - 1));
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
}

ParamECDF build_kde_cdf(std::span<const double> values, std::optional<double> bandwidth) {
  if (values.empty()) throw Error(ErrorCode::BadValue, "KDE needs at least one value");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    // degenerate sample: a point mass
    ParamECDF f;
    f.support = {lo};
    f.cdf = {1.0};
    return f;
  }
  if (values.size() < 2) throw Error(ErrorCode::BadValue, "KDE needs at least two values");
  const double h = bandwidth.value_or(silverman_bandwidth(values));
  if (!(h > 0.0)) throw Error(ErrorCode::BadValue, "KDE bandwidth must be > 0");

  ParamECDF f;
  f.shape = ParamECDF::Shape::Linear;
  f.support.resize(kKdeGridPoints);
  f.cdf.resize(kKdeGridPoints);
  const double a = lo - 3.0 * h, b = hi + 3.0 * h;
  const double inv_n = 1.0 / static_cast<double>(values.size());
  for (std::size_t i = 0; i < kKdeGridPoints; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(kKdeGridPoints - 1);
    double c = 0.0;
    for (double v : values) c += normal_cdf((x - v) / h);
    f.support[i] = x;
    f.cdf[i] = c * inv_n;
  }
  const double c0 = f.cdf.front(), c1 = f.cdf.back();
  for (auto& c : f.cdf) c = std::clamp((c - c0) / (c1 - c0), 0.0, 1.0);
  f.cdf.front() = 0.0;
  f.cdf.back() = 1.0;
  return f;
}

SpatialIndex::SpatialIndex(std::span<const BuildingRecord> buildings) : tree_(std::make_unique<Tree>()) {
  records_.assign(buildings.begin(), buildings.end());
  std::vector<Entry> entries;
  entries.reserve(records_.size());
  bool first = true;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& loc = records_[i].location;
    if (!loc) throw Error(ErrorCode::MissingLocation, records_[i].id);
    entries.emplace_back(Point(loc->longitude, loc->latitude), i);
    if (first) {
      bounds_ = {loc->latitude, loc->longitude, loc->latitude, loc->longitude};
      first = false;
    } else {
      bounds_.min_lat = std::min(bounds_.min_lat, loc->latitude);
      bounds_.max_lat = std::max(bounds_.max_lat, loc->latitude);
      bounds_.min_lon = std::min(bounds_.min_lon, loc->longitude);
      bounds_.max_lon = std::max(bounds_.max_lon, loc->longitude);
    }
  }
  tree_->rtree = decltype(tree_->rtree)(entries.begin(), entries.end());  // packing build
}

SpatialIndex::~SpatialIndex() = default;
SpatialIndex::SpatialIndex(SpatialIndex&&) noexcept = default;
SpatialIndex& SpatialIndex::operator=(SpatialIndex&&) noexcept = default;

std::vector<const BuildingRecord*> SpatialIndex::query(const GeoBox& box) const {
  std::vector<Entry> hits;
  const Box q(Point(box.min_lon, box.min_lat), Point(box.max_lon, box.max_lat));
  tree_->rtree.query(bgi::intersects(q), std::back_inserter(hits));
  std::vector<const BuildingRecord*> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(&records_[h.second]);
  std::sort(out.begin(), out.end(), [](const BuildingRecord* a, const BuildingRecord* b) { return a->id < b->id; });
  return out;
}

SpatialIndex spatial_index(std::span<const BuildingRecord> buildings) { return SpatialIndex(buildings); }

double distance_m(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadiusM = 6371008.8;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double x = (b.longitude - a.longitude) * kRad * std::cos(a.latitude * kRad);
  const double y = (b.latitude - a.latitude) * kRad;
  return kEarthRadiusM * std::hypot(x, y);
}

CohortSearch expanding_cohort(const SpatialIndex& index, const RegionQuery& q) {
  if (index.size() == 0) throw Error(ErrorCode::InsufficientCohort, "empty spatial index");
  if (q.min_cohort < 1 || !(q.initial_side_deg > 0.0)) throw Error(ErrorCode::BadSpec, "invalid region query");
  CohortSearch out;
  double half = q.initial_side_deg / 2.0;
  while (true) {
    const GeoBox box{q.location.latitude - half, q.location.longitude - half, q.location.latitude + half,
                     q.location.longitude + half};
    std::vector<const BuildingRecord*> matches;
    for (const auto* b : index.query(box)) {
      if (cohort_key(*b, q.buckets) == q.attributes) matches.push_back(b);
    }
    if (static_cast<int>(matches.size()) >= q.min_cohort) {
      std::stable_sort(matches.begin(), matches.end(), [&](const BuildingRecord* a, const BuildingRecord* b) {
        const double da = distance_m(q.location, *a->location), db = distance_m(q.location, *b->location);
        return da < db || (da == db && a->id < b->id);
      });
      for (const auto* m : matches) out.members.push_back(*m);
      out.side_deg = 2.0 * half;
      return out;
    }
    if (box.covers(index.bounds())) {
      throw Error(ErrorCode::InsufficientCohort, std::to_string(matches.size()) + " matching homes, need " +
                                                     std::to_string(q.min_cohort));
    }
    half *= 2.0;
    ++out.doublings;
  }
}

const ParamECDF& RegionDistribution::cdf(ModelParam p) const {
  switch (p) {
    case ModelParam::base: return base_cdf;
    case ModelParam::gamma_heat: return gamma_heat_cdf;
    case ModelParam::gamma_cool: return gamma_cool_cdf;
  }
  return base_cdf;
}

RegionDistribution region_distribution(std::span<const BuildingRecord> cohort,
                                       const std::map<std::string, AnnualRecord>& annuals,
                                       const WeatherSeries& weather, int min_cohort) {
  std::vector<double> base, heat, cool;
  RegionDistribution out;
  for (const auto& b : cohort) {
    auto it = annuals.find(b.id);
    if (it == annuals.end()) continue;
    try {
      const auto p = solve_annual(it->second, weather, b.floor_area);
      base.push_back(p.base);
      heat.push_back(p.gamma_heat);
      cool.push_back(p.gamma_cool);
      out.member_ids.push_back(b.id);
    } catch (const Error&) {
      // dropped member
    }
  }
  if (static_cast<int>(out.member_ids.size()) < min_cohort) {
    throw Error(ErrorCode::InsufficientCohort, std::to_string(out.member_ids.size()) +
                                                   " usable region members, need " + std::to_string(min_cohort));
  }
  out.base_cdf = build_kde_cdf(base);
  out.gamma_heat_cdf = build_kde_cdf(heat);
  out.gamma_cool_cdf = build_kde_cdf(cool);
  out.bandwidths = {silverman_bandwidth(base), silverman_bandwidth(heat), silverman_bandwidth(cool)};
  return out;
}

void to_json(nlohmann::json& j, const RegionDistribution& r) {
  j = nlohmann::json{{"base", r.base_cdf},
                     {"gamma_heat", r.gamma_heat_cdf},
                     {"gamma_cool", r.gamma_cool_cdf},
                     {"member_ids", r.member_ids},
                     {"bandwidths", {{"base", r.bandwidths[0]}, {"gamma_heat", r.bandwidths[1]},
                                     {"gamma_cool", r.bandwidths[2]}}}};
}

void from_json(const nlohmann::json& j, RegionDistribution& r) {
  r.base_cdf = j.at("base").get<ParamECDF>();
  r.gamma_heat_cdf = j.at("gamma_heat").get<ParamECDF>();
  r.gamma_cool_cdf = j.at("gamma_cool").get<ParamECDF>();
  r.member_ids = j.at("member_ids").get<std::vector<std::string>>();
  const auto& bw = j.at("bandwidths");
  r.bandwidths = {bw.at("base").get<double>(), bw.at("gamma_heat").get<double>(), bw.at("gamma_cool").get<double>()};
}

}  // namespace ecorank
