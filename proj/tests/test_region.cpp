#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ecorank/errors.hpp"
#include "ecorank/region.hpp"
#include "test_util.hpp"

using namespace ecorank;
using ecorank::testing::seasonal_weather;

namespace {

BuildingRecord home(const std::string& id, double lat, double lon, PropertyType type = PropertyType::SingleFamily) {
  BuildingRecord b;
  b.id = id;
  b.property_type = type;
  b.year_built = 1990;
  b.floor_area = 1500;
  b.location = GeoPoint{lat, lon};
  return b;
}

// Annual totals of the noiseless model with both balance points at 65 F.
AnnualRecord annual_of(const std::string& id, const ParamPoint& normalized, const WeatherSeries& w, double area) {
  AnnualRecord r{id, 0, 0, 0};
  for (const auto& d : w.days) {
    r.heating += area * normalized.gamma_heat * hinge(65.0 - d.value);
    r.cooling += area * normalized.gamma_cool * hinge(d.value - 65.0);
    r.total += area * predict_day(normalized, d.value);
  }
  return r;
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

RegionQuery query_at(double lat, double lon, int min_cohort = 20) {
  RegionQuery q;
  q.location = {lat, lon};
  q.attributes = cohort_key(home("q", lat, lon), q.buckets);
  q.min_cohort = min_cohort;
  return q;
}

}  // namespace

TEST(SolveAnnual, DirectDivision) {
  WeatherSeries w;
  for (int d = 0; d < 100; ++d) w.days.push_back({Date(2023, 1, 1).plus_days(d), 55.0});
  auto p = solve_annual({"a", 3000, 2000, 0}, w, 1.0);
  EXPECT_DOUBLE_EQ(p.gamma_heat, 2.0);
  EXPECT_DOUBLE_EQ(p.gamma_cool, 0.0);
  EXPECT_DOUBLE_EQ(p.base, 10.0);
  EXPECT_EQ(p.t_heat, 65.0);
  EXPECT_EQ(p.t_cool, 65.0);
}

TEST(SolveAnnual, NoComponentsGivesFlatBase) {
  auto w = seasonal_weather(365, 55, 20, 4, 1);
  auto p = solve_annual({"a", 7300, 0, 0}, w, 2.0);
  EXPECT_EQ(p.gamma_heat, 0.0);
  EXPECT_EQ(p.gamma_cool, 0.0);
  EXPECT_DOUBLE_EQ(p.base, 7300.0 / 365.0 / 2.0);
}

TEST(SolveAnnual, InvertsForwardAggregation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto w = seasonal_weather(365, 55, 25, 5, 2);
  for (int i = 0; i < 100; ++i) {
    ParamPoint p{0.02 * u(rng), 0.002 * u(rng), 0.002 * u(rng), 65, 65};
    const double area = 500 + 3000 * u(rng);
    auto got = solve_annual(annual_of("a", p, w, area), w, area);
    EXPECT_NEAR(got.base, p.base, 1e-9 * std::max(1.0, p.base));
    EXPECT_NEAR(got.gamma_heat, p.gamma_heat, 1e-9);
    EXPECT_NEAR(got.gamma_cool, p.gamma_cool, 1e-9);
  }
}

TEST(SolveAnnual, Errors) {
  WeatherSeries warm;
  for (int d = 0; d < 10; ++d) warm.days.push_back({Date(2023, 7, 1).plus_days(d), 80.0});
  try {
    solve_annual({"a", 100, 10, 0}, warm, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroDegreeDays);
  }
  EXPECT_THROW(solve_annual({"a", 100, 0, 0}, warm, 0.0), Error);
}

TEST(Kde, PointMassFallback) {
  std::vector<double> v(30, 4.2);
  auto f = build_kde_cdf(v);
  EXPECT_EQ(f(4.19), 0.0);
  EXPECT_EQ(f(4.2), 1.0);
}

TEST(Kde, SymmetricPair) {
  std::vector<double> v{0.0, 1.0};
  auto f = build_kde_cdf(v, 0.1);
  EXPECT_NEAR(f(0.5), 0.5, 1e-9);
}

TEST(Kde, StandardNormalMonteCarlo) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(10000);
  for (auto& x : v) x = n(rng);
  auto f = build_kde_cdf(v);
  EXPECT_NEAR(f(0.0), 0.5, 0.02);
  EXPECT_NEAR(f(1.96), 0.975, 0.02);
  check_invariants(f);
  EXPECT_EQ(f.support.size(), kKdeGridPoints);
  for (std::size_t i = 1; i < f.cdf.size(); ++i) ASSERT_GE(f.cdf[i], f.cdf[i - 1]);
  EXPECT_LE(f.cdf.front(), 0.005);
  EXPECT_GE(f.cdf.back(), 0.995);
}

TEST(Kde, SilvermanBandwidth) {
  std::vector<double> v{1, 2, 3, 4, 5};
  // sd = 1.5811, IQR = 2 -> 2/1.34 = 1.4925
  EXPECT_NEAR(silverman_bandwidth(v), 0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2), 1e-9);
}

TEST(SpatialIndex, UniversalAndEmptyQueries) {
  std::vector<BuildingRecord> b;
  for (int i = 0; i < 10; ++i) b.push_back(home("h" + std::to_string(i), 40 + 0.01 * i, -75 + 0.01 * i));
  auto idx = spatial_index(b);
  EXPECT_EQ(idx.query({39, -76, 41, -74}).size(), 10u);
  EXPECT_TRUE(idx.query({10, 10, 11, 11}).empty());
}

TEST(SpatialIndex, MissingLocationRejected) {
  auto b = home("x", 1, 1);
  b.location.reset();
  std::vector<BuildingRecord> v{b};
  EXPECT_THROW(spatial_index(v), Error);
}

TEST(SpatialIndex, MatchesLinearScan) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> lat(40, 41), lon(-75, -74);
  for (std::size_t n : {0u, 1u, 7u, 100u, 1000u}) {
    std::vector<BuildingRecord> b;
    for (std::size_t i = 0; i < n; ++i) {
      // snap some points onto a coarse lattice so box edges hit them exactly
      double la = lat(rng), lo = lon(rng);
      if (i % 5 == 0) la = std::round(la * 20) / 20, lo = std::round(lo * 20) / 20;
      b.push_back(home("h" + std::to_string(i), la, lo));
    }
    auto idx = spatial_index(b);
    for (int q = 0; q < 100; ++q) {
      double a1 = lat(rng), a2 = lat(rng), o1 = lon(rng), o2 = lon(rng);
      if (q % 4 == 0) a1 = std::round(a1 * 20) / 20, o2 = std::round(o2 * 20) / 20;
      GeoBox box{std::min(a1, a2), std::min(o1, o2), std::max(a1, a2), std::max(o1, o2)};
      std::vector<std::string> want, got;
      for (const auto& r : b)
        if (box.contains(*r.location)) want.push_back(r.id);
      for (const auto* r : idx.query(box)) got.push_back(r->id);
      std::sort(want.begin(), want.end());
      EXPECT_EQ(got, want);
    }
  }
}

TEST(ExpandingCohort, NoExpansionWhenInitialBoxSuffices) {
  std::vector<BuildingRecord> b;
  for (int i = 0; i < 30; ++i) b.push_back(home("h" + std::to_string(i), 40 + 0.0005 * i, -75 - 0.0003 * i));
  b.push_back(home("far", 45, -70));
  auto idx = spatial_index(b);
  auto r = expanding_cohort(idx, query_at(40.005, -75.005));
  EXPECT_EQ(r.doublings, 0);
  EXPECT_EQ(r.members.size(), 30u);
  for (std::size_t i = 1; i < r.members.size(); ++i) {
    EXPECT_LE(distance_m({40.005, -75.005}, *r.members[i - 1].location),
              distance_m({40.005, -75.005}, *r.members[i].location));
  }
}

TEST(ExpandingCohort, NoMatchesIsInsufficientCohort) {
  std::vector<BuildingRecord> b;
  for (int i = 0; i < 30; ++i) b.push_back(home("a" + std::to_string(i), 40 + 0.01 * i, -75, PropertyType::Apartment));
  auto idx = spatial_index(b);
  try {
    expanding_cohort(idx, query_at(40, -75));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientCohort);
  }
}

TEST(ExpandingCohort, MatchesAtFourTimesTheRadius) {
  const double half = 0.025;  // initial side 0.05
  std::vector<BuildingRecord> b;
  for (int i = 0; i < 20; ++i) {
    const double angle = 2 * M_PI * i / 20;
    const double r = 3.6 * half;  // outside the 2x box, inside the 4x box
    const double dx = r * std::cos(angle), dy = r * std::sin(angle);
    const double scale = std::max(std::abs(dx), std::abs(dy)) / r;
    b.push_back(home("m" + std::to_string(i), 40 + dy / scale, -75 + dx / scale));
  }
  for (int i = 0; i < 10; ++i) b.push_back(home("x" + std::to_string(i), 40 + 0.001 * i, -75, PropertyType::MultiFamily));
  b.push_back(home("edge", 42, -73, PropertyType::MultiFamily));
  auto idx = spatial_index(b);
  auto r = expanding_cohort(idx, query_at(40, -75));
  EXPECT_EQ(r.doublings, 2);
  EXPECT_NEAR(r.side_deg, 0.2, 1e-12);
  EXPECT_EQ(r.members.size(), 20u);
}

TEST(ExpandingCohort, IndependentOfInsertionOrder) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> lat(40, 40.3), lon(-75, -74.7);
  std::vector<BuildingRecord> b;
  for (int i = 0; i < 300; ++i) {
    b.push_back(home("h" + std::to_string(i), lat(rng), lon(rng),
                     i % 3 == 0 ? PropertyType::Apartment : PropertyType::SingleFamily));
  }
  for (int trial = 0; trial < 5; ++trial) {
    auto q = query_at(lat(rng), lon(rng));
    auto shuffled = b;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto r1 = expanding_cohort(spatial_index(b), q);
    auto r2 = expanding_cohort(spatial_index(shuffled), q);
    EXPECT_EQ(r1.doublings, r2.doublings);
    EXPECT_EQ(r1.members, r2.members);
  }
}

TEST(RegionDistribution, IdenticalMembersArePointMasses) {
  auto w = seasonal_weather(365, 55, 25, 5, 3);
  std::vector<BuildingRecord> cohort;
  std::map<std::string, AnnualRecord> annuals;
  const ParamPoint p{0.01, 0.0006, 0.0008, 65, 65};
  for (int i = 0; i < 25; ++i) {
    cohort.push_back(home("h" + std::to_string(i), 40, -75));
    annuals[cohort.back().id] = annual_of(cohort.back().id, p, w, 1500);
  }
  auto r = region_distribution(cohort, annuals, w);
  for (auto m : kModelParams) {
    const auto& f = r.cdf(m);
    ASSERT_EQ(f.support.size(), 1u) << to_string(m);
    EXPECT_EQ(f.cdf[0], 1.0);
  }
  EXPECT_NEAR(r.gamma_heat_cdf.support[0], p.gamma_heat, 1e-12);
  EXPECT_EQ(r.member_ids.size(), 25u);
}

TEST(RegionDistribution, KdeTracksKnownDistribution) {
  auto w = seasonal_weather(365, 55, 25, 5, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gh(0.0006, 0.0001);
  std::vector<BuildingRecord> cohort;
  std::map<std::string, AnnualRecord> annuals;
  for (int i = 0; i < 200; ++i) {
    cohort.push_back(home("h" + std::to_string(i), 40, -75));
    const ParamPoint p{0.01, std::max(0.0, gh(rng)), 0.0008, 65, 65};
    annuals[cohort.back().id] = annual_of(cohort.back().id, p, w, 1500);
  }
  auto r = region_distribution(cohort, annuals, w);
  double sup = 0;
  for (double x = 0.0002; x <= 0.001; x += 0.000005) {
    sup = std::max(sup, std::abs(r.gamma_heat_cdf(x) - normal_cdf(x, 0.0006, 0.0001)));
  }
  EXPECT_LT(sup, 0.1);
}

TEST(RegionDistribution, TooFewSurvivorsIsAnError) {
  auto w = seasonal_weather(365, 55, 25, 5, 6);
  std::vector<BuildingRecord> cohort;
  std::map<std::string, AnnualRecord> annuals;
  for (int i = 0; i < 20; ++i) {
    cohort.push_back(home("h" + std::to_string(i), 40, -75));
    if (i > 0) annuals[cohort.back().id] = annual_of(cohort.back().id, {0.01, 0.0006, 0.0008, 65, 65}, w, 1500);
  }
  try {
    region_distribution(cohort, annuals, w, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientCohort);
  }
}

TEST(RegionDistribution, JsonRoundTrip) {
  auto w = seasonal_weather(365, 55, 25, 5, 3);
  std::vector<BuildingRecord> cohort;
  std::map<std::string, AnnualRecord> annuals;
  for (int i = 0; i < 20; ++i) {
    cohort.push_back(home("h" + std::to_string(i), 40, -75));
    annuals[cohort.back().id] = annual_of(cohort.back().id, {0.01 + 0.001 * i, 0.0006, 0.0008, 65, 65}, w, 1500);
  }
  auto r = region_distribution(cohort, annuals, w);
  nlohmann::json j = r;
  auto back = j.get<RegionDistribution>();
  EXPECT_EQ(back.base_cdf.support, r.base_cdf.support);
  EXPECT_EQ(back.member_ids, r.member_ids);
}
