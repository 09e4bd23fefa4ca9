#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecorank {

// Calendar day, ISO-8601 on the wire.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days day) : day_(day) {}
  Date(int year, unsigned month, unsigned day);

  static Date parse(std::string_view iso);  // throws std::invalid_argument
  std::string iso() const;

  std::chrono::sys_days sys_days() const { return day_; }
  Date plus_days(int n) const { return Date(day_ + std::chrono::days(n)); }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days day_{};
};

enum class PropertyType { SingleFamily, MultiFamily, Apartment, MixedUse };

std::string_view to_string(PropertyType type);
std::optional<PropertyType> parse_property_type(std::string_view text);

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

struct BuildingRecord {
  std::string id;
  PropertyType property_type = PropertyType::SingleFamily;
  int year_built = 2000;
  double floor_area = 1.0;  // square feet
  std::optional<GeoPoint> location;

  bool operator==(const BuildingRecord&) const = default;
};

struct DayValue {
  Date date;
  double value = 0.0;
  bool operator==(const DayValue&) const = default;
};

/// Daily metered energy for one building, kWh per day (or kWh/sq.ft. per day
/// after normalize_by_area).
struct DailySeries {
  std::string building_id;
  std::vector<DayValue> days;
};

/// Daily mean outdoor temperature, degrees Fahrenheit.
struct WeatherSeries {
  std::vector<DayValue> days;

  std::vector<double> temperatures() const;
};

struct AnnualRecord {
  std::string building_id;
  double total = 0.0;  // kWh/year
  double heating = 0.0;
  double cooling = 0.0;
  bool operator==(const AnnualRecord&) const = default;
};

/// Energy and temperature paired on the days both inputs cover.
struct AlignedSeries {
  std::string building_id;
  std::vector<Date> dates;
  std::vector<double> energy;
  std::vector<double> temperature;
  double coverage = 0.0;  // aligned days / energy days

  std::size_t size() const { return dates.size(); }
};

// Throw Error/BadValueError on invariant violations.
void validate(const BuildingRecord& b);
void validate(const DailySeries& s);
void validate(const WeatherSeries& w);
void validate(const AnnualRecord& a);

std::vector<BuildingRecord> load_buildings(const std::filesystem::path& path);
void write_buildings(const std::filesystem::path& path, std::span<const BuildingRecord> buildings);

// Rows may be interleaved across buildings; each series comes back date-sorted.
std::map<std::string, DailySeries> load_energy(const std::filesystem::path& path);
void write_energy(const std::filesystem::path& path, std::span<const DailySeries> series);

WeatherSeries load_weather(const std::filesystem::path& path);
void write_weather(const std::filesystem::path& path, const WeatherSeries& weather);

std::vector<AnnualRecord> load_annual(const std::filesystem::path& path);
void write_annual(const std::filesystem::path& path, std::span<const AnnualRecord> records);

AlignedSeries align(const DailySeries& series, const WeatherSeries& weather);

/// Re-pair an already aligned series against itself; used to check idempotence.
AlignedSeries align(const AlignedSeries& aligned);

DailySeries normalize_by_area(const DailySeries& series, const BuildingRecord& b);
DailySeries denormalize_by_area(const DailySeries& series, const BuildingRecord& b);
AlignedSeries normalize_by_area(const AlignedSeries& aligned, const BuildingRecord& b);

/// Sum several meters of one building by date. Days missing from any trace
/// are dropped so a partial day is never under-counted.
DailySeries sum_traces(std::span<const DailySeries> traces);

inline constexpr double kKbtuPerKwh = 3.412;
constexpr double to_kbtu(double kwh) { return kwh * kKbtuPerKwh; }

/// Default coverage floor for a year-long fit.
inline constexpr std::size_t kMinAlignedDays = 300;
bool meets_coverage(const AlignedSeries& aligned, std::size_t min_days = kMinAlignedDays);

}  // namespace ecorank
