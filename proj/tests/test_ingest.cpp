#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ecorank/errors.hpp"
#include "ecorank/ingest.hpp"
#include "test_util.hpp"

using namespace ecorank;
using ecorank::testing::TempDir;
using ecorank::testing::write_text;

namespace {

DailySeries constant_series(const std::string& id, Date start, int days, double v) {
  DailySeries s{id, {}};
  for (int d = 0; d < days; ++d) s.days.push_back({start.plus_days(d), v});
  return s;
}

WeatherSeries constant_weather(Date start, int days, double t) {
  WeatherSeries w;
  for (int d = 0; d < days; ++d) w.days.push_back({start.plus_days(d), t});
  return w;
}

}  // namespace

TEST(Date, ParsesAndFormatsIso) {
  const auto d = Date::parse("2023-02-28");
  EXPECT_EQ(d.iso(), "2023-02-28");
  EXPECT_EQ(d.plus_days(1).iso(), "2023-03-01");
  EXPECT_THROW(Date::parse("2023-02-30"), std::invalid_argument);
  EXPECT_THROW(Date::parse("yesterday"), std::invalid_argument);
}

TEST(LoadBuildings, HeaderOnlyFileIsEmpty) {
  TempDir dir("ingest");
  write_text(dir / "b.csv", "id,property_type,year_built,floor_area_sqft,latitude,longitude\n");
  EXPECT_TRUE(load_buildings(dir / "b.csv").empty());
}

TEST(LoadBuildings, NegativeAreaNamesTheRow) {
  TempDir dir("ingest");
  write_text(dir / "b.csv",
             "id,property_type,year_built,floor_area_sqft,latitude,longitude\n"
             "a,SingleFamily,1990,1500,,\n"
             "b,SingleFamily,1990,-100,,\n");
  try {
    load_buildings(dir / "b.csv");
    FAIL() << "expected BadValue";
  } catch (const BadValueError& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadValue);
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), "floor_area_sqft");
  }
}

TEST(LoadBuildings, MissingColumnAndDuplicateId) {
  TempDir dir("ingest");
  write_text(dir / "a.csv", "id,property_type,year_built\nx,SingleFamily,1990\n");
  try {
    load_buildings(dir / "a.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
  }
  write_text(dir / "b.csv",
             "id,property_type,year_built,floor_area_sqft\n"
             "x,SingleFamily,1990,1000\n"
             "x,Apartment,1991,900\n");
  try {
    load_buildings(dir / "b.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
}

TEST(LoadBuildings, MissingFile) {
  try {
    load_buildings("/nonexistent/buildings.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFile);
  }
}

TEST(LoadBuildings, RoundTripOnGeneratedRows) {
  TempDir dir("ingest");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> area(300.0, 9000.0), lat(-60.0, 60.0), lon(-170.0, 170.0);
  std::uniform_int_distribution<int> year(1850, 2023), type(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BuildingRecord> rows;
    for (int i = 0; i < 3; ++i) {
      BuildingRecord b;
      b.id = "home " + std::to_string(trial) + "/" + std::to_string(i);
      b.property_type = static_cast<PropertyType>(type(rng));
      b.year_built = year(rng);
      b.floor_area = area(rng);
      if (i != 1) b.location = GeoPoint{lat(rng), lon(rng)};
      rows.push_back(b);
    }
    write_buildings(dir / "b.csv", rows);
    auto back = load_buildings(dir / "b.csv");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i], rows[i]) << rows[i].id;
  }
}

TEST(WriteBuildings, UnsplittableIdRejected) {
  TempDir dir("ingest");
  BuildingRecord b;
  b.id = "a,b";
  std::vector<BuildingRecord> rows{b};
  EXPECT_THROW(write_buildings(dir / "b.csv", rows), Error);
  std::vector<DailySeries> s{{"x\"y", {}}};
  EXPECT_THROW(write_energy(dir / "e.csv", s), Error);
}

TEST(LoadEnergy, RoundTripAndSorting) {
  TempDir dir("ingest");
  write_text(dir / "e.csv",
             "building_id,date,kwh\n"
             "b,2023-01-02,5\n"
             "a,2023-01-02,2.5\n"
             "a,2023-01-01,1.25\n");
  auto m = load_energy(dir / "e.csv");
  ASSERT_EQ(m.size(), 2u);
  ASSERT_EQ(m["a"].days.size(), 2u);
  EXPECT_EQ(m["a"].days[0].date.iso(), "2023-01-01");
  EXPECT_DOUBLE_EQ(m["a"].days[1].value, 2.5);

  std::vector<DailySeries> all{m["a"], m["b"]};
  write_energy(dir / "e2.csv", all);
  auto again = load_energy(dir / "e2.csv");
  EXPECT_EQ(again["a"].days, m["a"].days);
  EXPECT_EQ(again["b"].days, m["b"].days);
}

TEST(LoadEnergy, RejectsNegativeAndDuplicateDay) {
  TempDir dir("ingest");
  write_text(dir / "neg.csv", "building_id,date,kwh\na,2023-01-01,-1\n");
  EXPECT_THROW(load_energy(dir / "neg.csv"), BadValueError);
  write_text(dir / "dup.csv", "building_id,date,kwh\na,2023-01-01,1\na,2023-01-01,2\n");
  EXPECT_THROW(load_energy(dir / "dup.csv"), Error);
}

TEST(LoadWeatherAndAnnual, RoundTrip) {
  TempDir dir("ingest");
  auto w = ecorank::testing::seasonal_weather(30, 50, 20, 3, 5);
  write_weather(dir / "w.csv", w);
  EXPECT_EQ(load_weather(dir / "w.csv").days, w.days);

  std::vector<AnnualRecord> ann{{"a", 12000.5, 3000.25, 1000.0}, {"b", 9000, 0, 0}};
  write_annual(dir / "ann.csv", ann);
  EXPECT_EQ(load_annual(dir / "ann.csv"), ann);
}

TEST(LoadAnnual, ComponentsCannotExceedTotal) {
  TempDir dir("ingest");
  write_text(dir / "ann.csv", "building_id,total_kwh,heating_kwh,cooling_kwh\na,100,80,30\n");
  EXPECT_THROW(load_annual(dir / "ann.csv"), Error);
}

TEST(Align, IdenticalRangesKeepEveryDay) {
  const Date start(2023, 1, 1);
  auto s = constant_series("a", start, 365, 10);
  auto w = constant_weather(start, 365, 50);
  auto a = align(s, w);
  EXPECT_EQ(a.size(), 365u);
  EXPECT_DOUBLE_EQ(a.coverage, 1.0);
}

TEST(Align, DisjointRangesAreNoOverlap) {
  auto s = constant_series("a", Date(2023, 1, 1), 10, 1);
  auto w = constant_weather(Date(2024, 1, 1), 10, 50);
  try {
    align(s, w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoOverlap);
  }
}

TEST(Align, MatchesSetIntersection) {
  const Date start(2023, 1, 1);
  auto s = constant_series("a", start, 365, 3);
  auto w = constant_weather(start, 365, 40);
  w.days.erase(w.days.begin() + 200);
  w.days.erase(w.days.begin() + 100);
  auto a = align(s, w);
  EXPECT_EQ(a.size(), 363u);

  std::set<Date> e_dates, w_dates;
  for (const auto& d : s.days) e_dates.insert(d.date);
  for (const auto& d : w.days) w_dates.insert(d.date);
  std::vector<Date> oracle;
  std::set_intersection(e_dates.begin(), e_dates.end(), w_dates.begin(), w_dates.end(), std::back_inserter(oracle));
  EXPECT_EQ(a.dates, oracle);
  EXPECT_NEAR(a.coverage, 363.0 / 365.0, 1e-12);
}

TEST(Align, Idempotent) {
  auto s = constant_series("a", Date(2023, 1, 1), 50, 2);
  auto w = ecorank::testing::seasonal_weather(40, 50, 10, 2, 9, Date(2023, 1, 5));
  auto once = align(s, w);
  auto twice = align(once);
  EXPECT_EQ(twice.dates, once.dates);
  EXPECT_EQ(twice.energy, once.energy);
  EXPECT_EQ(twice.temperature, once.temperature);
}

TEST(Normalize, Examples) {
  BuildingRecord unit;
  unit.id = "a";
  unit.floor_area = 1.0;
  auto s = constant_series("a", Date(2023, 1, 1), 5, 40);
  EXPECT_EQ(normalize_by_area(s, unit).days, s.days);

  BuildingRecord big = unit;
  big.floor_area = 2000;
  auto n = normalize_by_area(s, big);
  ASSERT_EQ(n.days.size(), s.days.size());
  for (std::size_t i = 0; i < n.days.size(); ++i) {
    EXPECT_EQ(n.days[i].date, s.days[i].date);
    EXPECT_NEAR(n.days[i].value, 0.02, 1e-15);
  }
}

TEST(Normalize, RoundTripWithinRelativeTolerance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(0.0, 500.0), area(100.0, 20000.0);
  for (int trial = 0; trial < 50; ++trial) {
    BuildingRecord b;
    b.id = "x";
    b.floor_area = area(rng);
    DailySeries s{"x", {}};
    for (int d = 0; d < 30; ++d) s.days.push_back({Date(2023, 1, 1).plus_days(d), v(rng)});
    auto back = denormalize_by_area(normalize_by_area(s, b), b);
    for (std::size_t i = 0; i < s.days.size(); ++i) {
      EXPECT_NEAR(back.days[i].value, s.days[i].value, 1e-12 * std::max(1.0, s.days[i].value));
    }
  }
}

TEST(Normalize, ZeroAreaRejected) {
  BuildingRecord b;
  b.id = "a";
  b.floor_area = 0.0;
  EXPECT_THROW(normalize_by_area(constant_series("a", Date(2023, 1, 1), 3, 1), b), Error);
}

TEST(Kbtu, Conversion) {
  EXPECT_DOUBLE_EQ(to_kbtu(1.0), 3.412);
  EXPECT_DOUBLE_EQ(to_kbtu(0.0), 0.0);
  EXPECT_NEAR(to_kbtu(10.0), 34.12, 1e-12);
}

TEST(SumTraces, AddsByDateAndDropsPartialDays) {
  auto a = constant_series("h", Date(2023, 1, 1), 5, 1.0);
  auto b = constant_series("h", Date(2023, 1, 3), 5, 2.0);
  std::vector<DailySeries> traces{a, b};
  auto s = sum_traces(traces);
  ASSERT_EQ(s.days.size(), 3u);
  EXPECT_EQ(s.days.front().date.iso(), "2023-01-03");
  for (const auto& d : s.days) EXPECT_DOUBLE_EQ(d.value, 3.0);
}

TEST(Coverage, Threshold) {
  auto s = constant_series("a", Date(2023, 1, 1), 299, 1);
  auto w = constant_weather(Date(2023, 1, 1), 299, 50);
  EXPECT_FALSE(meets_coverage(align(s, w)));
  EXPECT_TRUE(meets_coverage(align(s, w), 299));
}
