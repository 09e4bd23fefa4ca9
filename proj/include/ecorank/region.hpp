#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecorank/bayes_fit.hpp"
#include "ecorank/cohort.hpp"
#include "ecorank/ecdf.hpp"
#include "ecorank/ingest.hpp"
#include "ecorank/thermal_model.hpp"

namespace ecorank {

/// Invert annual totals for the model parameters with both balance points at
/// 65 F. The result is per square foot and has no sigma.
ParamPoint solve_annual(const AnnualRecord& rec, const WeatherSeries& weather, double floor_area);

/// Silverman's rule of thumb, 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> values);

inline constexpr std::size_t kKdeGridPoints = 512;

/// Gaussian-kernel CDF on a 512-point grid over [min - 3h, max + 3h],
/// rescaled so the grid ends are exactly 0 and 1. Identical inputs fall back
/// to a point-mass step CDF.
ParamECDF build_kde_cdf(std::span<const double> values, std::optional<double> bandwidth = std::nullopt);

struct GeoBox {
  double min_lat = 0, min_lon = 0, max_lat = 0, max_lon = 0;

  bool contains(const GeoPoint& p) const {
    return p.latitude >= min_lat && p.latitude <= max_lat && p.longitude >= min_lon && p.longitude <= max_lon;
  }
  bool covers(const GeoBox& other) const {
    return min_lat <= other.min_lat && min_lon <= other.min_lon && max_lat >= other.max_lat &&
           max_lon >= other.max_lon;
  }
};

/// R-tree over building locations. Query results are sorted by building id,
/// so they do not depend on insertion order. Boundaries are inclusive.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::span<const BuildingRecord> buildings);
  ~SpatialIndex();
  SpatialIndex(SpatialIndex&&) noexcept;
  SpatialIndex& operator=(SpatialIndex&&) noexcept;

  std::vector<const BuildingRecord*> query(const GeoBox& box) const;

  std::size_t size() const { return records_.size(); }
  const GeoBox& bounds() const { return bounds_; }

 private:
  struct Tree;
  std::vector<BuildingRecord> records_;
  std::unique_ptr<Tree> tree_;
  GeoBox bounds_;
};

SpatialIndex spatial_index(std::span<const BuildingRecord> buildings);

struct RegionQuery {
  GeoPoint location;
  CohortKey attributes;
  BucketSpec buckets;
  int min_cohort = 20;
  double initial_side_deg = 0.05;
};

struct CohortSearch {
  std::vector<BuildingRecord> members;  // nearest first
  int doublings = 0;
  double side_deg = 0.0;  // side of the final search box
};

/// Grow a square box around the query location, doubling its side, until at
/// least min_cohort attribute matches fall inside or the box covers the
/// whole index.
CohortSearch expanding_cohort(const SpatialIndex& index, const RegionQuery& q);

/// Approximate ground distance in meters (equirectangular about a).
double distance_m(const GeoPoint& a, const GeoPoint& b);

struct RegionDistribution {
  ParamECDF gamma_heat_cdf;
  ParamECDF gamma_cool_cdf;
  ParamECDF base_cdf;
  std::vector<std::string> member_ids;
  std::array<double, 3> bandwidths{};  // base, gamma_heat, gamma_cool

  const ParamECDF& cdf(ModelParam p) const;
};

/// Annual inversion per member, then one KDE CDF per parameter. Members whose
/// inversion fails are dropped; fewer than min_cohort survivors is an error.
RegionDistribution region_distribution(std::span<const BuildingRecord> cohort,
                                       const std::map<std::string, AnnualRecord>& annuals,
                                       const WeatherSeries& weather, int min_cohort = 20);

void to_json(nlohmann::json& j, const RegionDistribution& r);
void from_json(const nlohmann::json& j, RegionDistribution& r);

}  // namespace ecorank
