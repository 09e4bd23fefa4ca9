#include "ecorank/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

int current_year() {
  auto today = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
  return static_cast<int>(std::chrono::year_month_day(today).year());
}

constexpr double kMinTempF = -60.0;
constexpr double kMaxTempF = 140.0;

// Fields are never quoted, so ids must survive a plain comma split and trim.
std::string id_check(const std::string& id) {
  if (id.empty()) return "empty id";
  if (id.find_first_of(",\"\r\n") != std::string::npos) return "id contains a comma, quote or line break";
  if (csv::trim(id).size() != id.size()) return "id has surrounding whitespace";
  return {};
}

void require_writable_id(const std::string& id) {
  if (auto msg = id_check(id); !msg.empty()) throw Error(ErrorCode::BadValue, "'" + id + "': " + msg);
}

std::string building_check(const BuildingRecord& b) {
  if (auto msg = id_check(b.id); !msg.empty()) return msg;
  if (!(b.floor_area > 0.0) || !std::isfinite(b.floor_area)) return "floor_area must be > 0";
  if (b.year_built < 1600 || b.year_built > current_year()) return "year_built out of range";
  if (b.location) {
    const auto& p = *b.location;
    if (!(p.latitude >= -90 && p.latitude <= 90) || !(p.longitude >= -180 && p.longitude <= 180)) {
      return "location out of range";
    }
  }
  return {};
}

void sort_and_check_days(std::vector<DayValue>& days, const std::vector<std::size_t>& lines,
                         const char* what) {
  std::vector<std::size_t> order(days.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return days[a].date < days[b].date; });
  std::vector<DayValue> sorted;
  sorted.reserve(days.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && days[order[k]].date == days[order[k - 1]].date) {
      throw BadValueError(lines[order[k]], "date", std::string("duplicate ") + what + " date " +
                                                       days[order[k]].date.iso());
    }
    sorted.push_back(days[order[k]]);
  }
  days = std::move(sorted);
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year(year), std::chrono::month(month), std::chrono::day(day)};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  day_ = std::chrono::sys_days(ymd);
}

Date Date::parse(std::string_view iso) {
  iso = csv::trim(iso);
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw std::invalid_argument("expected YYYY-MM-DD");
  auto y = csv::parse_int(iso.substr(0, 4));
  auto m = csv::parse_int(iso.substr(5, 2));
  auto d = csv::parse_int(iso.substr(8, 2));
  if (!y || !m || !d || *m < 1 || *d < 1) throw std::invalid_argument("expected YYYY-MM-DD");
  return Date(static_cast<int>(*y), static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

std::string Date::iso() const {
  std::chrono::year_month_day ymd(day_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string_view to_string(PropertyType type) {
  switch (type) {
    case PropertyType::SingleFamily: return "SingleFamily";
    case PropertyType::MultiFamily: return "MultiFamily";
    case PropertyType::Apartment: return "Apartment";
    case PropertyType::MixedUse: return "MixedUse";
  }
  return "SingleFamily";
}

std::optional<PropertyType> parse_property_type(std::string_view text) {
  for (auto t : {PropertyType::SingleFamily, PropertyType::MultiFamily, PropertyType::Apartment,
                 PropertyType::MixedUse}) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

std::vector<double> WeatherSeries::temperatures() const {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.value);
  return out;
}

void validate(const BuildingRecord& b) {
  if (auto msg = building_check(b); !msg.empty()) throw Error(ErrorCode::BadValue, b.id + ": " + msg);
}

void validate(const DailySeries& s) {
  for (std::size_t i = 0; i < s.days.size(); ++i) {
    if (!std::isfinite(s.days[i].value) || s.days[i].value < 0.0) {
      throw Error(ErrorCode::BadValue, s.building_id + ": energy must be finite and >= 0");
    }
    if (i > 0 && !(s.days[i - 1].date < s.days[i].date)) {
      throw Error(ErrorCode::BadValue, s.building_id + ": dates must be strictly increasing");
    }
  }
}

void validate(const WeatherSeries& w) {
  for (std::size_t i = 0; i < w.days.size(); ++i) {
    const double t = w.days[i].value;
    if (!std::isfinite(t) || t < kMinTempF || t > kMaxTempF) {
      throw Error(ErrorCode::BadValue, "temperature out of range on " + w.days[i].date.iso());
    }
    if (i > 0 && !(w.days[i - 1].date < w.days[i].date)) {
      throw Error(ErrorCode::BadValue, "weather dates must be strictly increasing");
    }
  }
}

void validate(const AnnualRecord& a) {
  for (double v : {a.total, a.heating, a.cooling}) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::BadValue, a.building_id + ": negative annual energy");
  }
  if (a.heating + a.cooling > a.total * (1.0 + 1e-12)) {
    throw Error(ErrorCode::BadValue, a.building_id + ": heating + cooling exceeds total");
  }
}

std::vector<BuildingRecord> load_buildings(const std::filesystem::path& path) {
  auto table = csv::read(path, {"id", "property_type", "year_built", "floor_area_sqft"});
  const auto c_id = table.index("id");
  const auto c_type = table.index("property_type");
  const auto c_year = table.index("year_built");
  const auto c_area = table.index("floor_area_sqft");
  const bool has_loc = table.has("latitude") && table.has("longitude");

  std::vector<BuildingRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    BuildingRecord b;
    b.id = row[c_id];
    if (b.id.empty()) throw BadValueError(line, "id", "empty id");

    auto type = parse_property_type(row[c_type]);
    if (!type) throw BadValueError(line, "property_type", "unknown property type '" + row[c_type] + "'");
    b.property_type = *type;

    auto year = csv::parse_int(row[c_year]);
    if (!year) throw BadValueError(line, "year_built", "not an integer");
    b.year_built = static_cast<int>(*year);
    if (b.year_built < 1600 || b.year_built > current_year()) {
      throw BadValueError(line, "year_built", "out of range [1600, current year]");
    }

    auto area = csv::parse_double(row[c_area]);
    if (!area) throw BadValueError(line, "floor_area_sqft", "not a number");
    if (!(*area > 0.0)) throw BadValueError(line, "floor_area_sqft", "must be > 0");
    b.floor_area = *area;

    if (has_loc) {
      const auto& lat_s = row[table.index("latitude")];
      const auto& lon_s = row[table.index("longitude")];
      if (!lat_s.empty() || !lon_s.empty()) {
        auto lat = csv::parse_double(lat_s);
        auto lon = csv::parse_double(lon_s);
        if (!lat || *lat < -90 || *lat > 90) throw BadValueError(line, "latitude", "invalid latitude");
        if (!lon || *lon < -180 || *lon > 180) throw BadValueError(line, "longitude", "invalid longitude");
        b.location = GeoPoint{*lat, *lon};
      }
    }
    if (!seen.insert(b.id).second) throw Error(ErrorCode::DuplicateId, "row " + std::to_string(line) + ": " + b.id);
    out.push_back(std::move(b));
  }
  return out;
}

void write_buildings(const std::filesystem::path& path, std::span<const BuildingRecord> buildings) {
  std::ostringstream os;
  os << "id,property_type,year_built,floor_area_sqft,latitude,longitude\n";
  for (const auto& b : buildings) {
    validate(b);
    os << b.id << ',' << to_string(b.property_type) << ',' << b.year_built << ',' << csv::format(b.floor_area)
       << ',';
    if (b.location) os << csv::format(b.location->latitude) << ',' << csv::format(b.location->longitude);
    else os << ',';
    os << '\n';
  }
  csv::write_atomic(path, os.str());
}

std::map<std::string, DailySeries> load_energy(const std::filesystem::path& path) {
  auto table = csv::read(path, {"building_id", "date", "kwh"});
  const auto c_id = table.index("building_id");
  const auto c_date = table.index("date");
  const auto c_kwh = table.index("kwh");

  std::map<std::string, DailySeries> out;
  std::map<std::string, std::vector<std::size_t>> lines;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    if (row[c_id].empty()) throw BadValueError(line, "building_id", "empty id");
    Date date;
    try {
      date = Date::parse(row[c_date]);
    } catch (const std::invalid_argument& e) {
      throw BadValueError(line, "date", e.what());
    }
    auto kwh = csv::parse_double(row[c_kwh]);
    if (!kwh) throw BadValueError(line, "kwh", "not a finite number");
    if (*kwh < 0.0) throw BadValueError(line, "kwh", "must be >= 0");
    auto& s = out[row[c_id]];
    s.building_id = row[c_id];
    s.days.push_back({date, *kwh});
    lines[row[c_id]].push_back(line);
  }
  for (auto& [id, s] : out) sort_and_check_days(s.days, lines[id], "energy");
  return out;
}

void write_energy(const std::filesystem::path& path, std::span<const DailySeries> series) {
  std::ostringstream os;
  os << "building_id,date,kwh\n";
  for (const auto& s : series) {
    require_writable_id(s.building_id);
    for (const auto& d : s.days) os << s.building_id << ',' << d.date.iso() << ',' << csv::format(d.value) << '\n';
  }
  csv::write_atomic(path, os.str());
}

WeatherSeries load_weather(const std::filesystem::path& path) {
  auto table = csv::read(path, {"date", "mean_temp_f"});
  const auto c_date = table.index("date");
  const auto c_temp = table.index("mean_temp_f");
  WeatherSeries w;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    Date date;
    try {
      date = Date::parse(row[c_date]);
    } catch (const std::invalid_argument& e) {
      throw BadValueError(line, "date", e.what());
    }
    auto t = csv::parse_double(row[c_temp]);
    if (!t || *t < kMinTempF || *t > kMaxTempF) throw BadValueError(line, "mean_temp_f", "outside [-60, 140] F");
    w.days.push_back({date, *t});
  }
  sort_and_check_days(w.days, table.line_numbers, "weather");
  return w;
}

void write_weather(const std::filesystem::path& path, const WeatherSeries& weather) {
  std::ostringstream os;
  os << "date,mean_temp_f\n";
  for (const auto& d : weather.days) os << d.date.iso() << ',' << csv::format(d.value) << '\n';
  csv::write_atomic(path, os.str());
}

std::vector<AnnualRecord> load_annual(const std::filesystem::path& path) {
  auto table = csv::read(path, {"building_id", "total_kwh", "heating_kwh", "cooling_kwh"});
  const auto c_id = table.index("building_id");
  const std::size_t cols[3] = {table.index("total_kwh"), table.index("heating_kwh"), table.index("cooling_kwh")};
  const char* names[3] = {"total_kwh", "heating_kwh", "cooling_kwh"};
  std::vector<AnnualRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    double v[3];
    for (int k = 0; k < 3; ++k) {
      auto x = csv::parse_double(row[cols[k]]);
      if (!x || *x < 0.0) throw BadValueError(line, names[k], "must be a finite number >= 0");
      v[k] = *x;
    }
    AnnualRecord a{row[c_id], v[0], v[1], v[2]};
    if (a.building_id.empty()) throw BadValueError(line, "building_id", "empty id");
    if (a.heating + a.cooling > a.total * (1.0 + 1e-12)) {
      throw BadValueError(line, "total_kwh", "heating + cooling exceeds total");
    }
    if (!seen.insert(a.building_id).second) {
      throw Error(ErrorCode::DuplicateId, "row " + std::to_string(line) + ": " + a.building_id);
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_annual(const std::filesystem::path& path, std::span<const AnnualRecord> records) {
  std::ostringstream os;
  os << "building_id,total_kwh,heating_kwh,cooling_kwh\n";
  for (const auto& a : records) {
    require_writable_id(a.building_id);
    os << a.building_id << ',' << csv::format(a.total) << ',' << csv::format(a.heating) << ','
       << csv::format(a.cooling) << '\n';
  }
  csv::write_atomic(path, os.str());
}

AlignedSeries align(const DailySeries& series, const WeatherSeries& weather) {
  if (series.days.empty() || weather.days.empty()) {
    throw Error(ErrorCode::NoOverlap, series.building_id + ": empty input");
  }
  AlignedSeries out;
  out.building_id = series.building_id;
  std::size_t i = 0, j = 0;
  while (i < series.days.size() && j < weather.days.size()) {
    const auto& e = series.days[i];
    const auto& w = weather.days[j];
    if (e.date < w.date) {
      ++i;
    } else if (w.date < e.date) {
      ++j;
    } else {
      out.dates.push_back(e.date);
      out.energy.push_back(e.value);
      out.temperature.push_back(w.value);
      ++i;
      ++j;
    }
  }
  if (out.dates.empty()) throw Error(ErrorCode::NoOverlap, series.building_id + ": no common dates");
  out.coverage = static_cast<double>(out.dates.size()) / static_cast<double>(series.days.size());
  return out;
}

AlignedSeries align(const AlignedSeries& aligned) {
  DailySeries s{aligned.building_id, {}};
  WeatherSeries w;
  for (std::size_t k = 0; k < aligned.size(); ++k) {
    s.days.push_back({aligned.dates[k], aligned.energy[k]});
    w.days.push_back({aligned.dates[k], aligned.temperature[k]});
  }
  return align(s, w);
}

DailySeries normalize_by_area(const DailySeries& series, const BuildingRecord& b) {
  if (!(b.floor_area > 0.0)) throw Error(ErrorCode::ZeroArea, b.id);
  DailySeries out = series;
  for (auto& d : out.days) d.value /= b.floor_area;
  return out;
}

DailySeries denormalize_by_area(const DailySeries& series, const BuildingRecord& b) {
  if (!(b.floor_area > 0.0)) throw Error(ErrorCode::ZeroArea, b.id);
  DailySeries out = series;
  for (auto& d : out.days) d.value *= b.floor_area;
  return out;
}

AlignedSeries normalize_by_area(const AlignedSeries& aligned, const BuildingRecord& b) {
  if (!(b.floor_area > 0.0)) throw Error(ErrorCode::ZeroArea, b.id);
  AlignedSeries out = aligned;
  for (auto& e : out.energy) e /= b.floor_area;
  return out;
}

DailySeries sum_traces(std::span<const DailySeries> traces) {
  if (traces.empty()) return {};
  DailySeries out{traces.front().building_id, {}};
  std::map<Date, std::pair<double, std::size_t>> acc;
  for (const auto& t : traces) {
    for (const auto& d : t.days) {
      auto& slot = acc[d.date];
      slot.first += d.value;
      slot.second += 1;
    }
  }
  for (const auto& [date, slot] : acc) {
    if (slot.second == traces.size()) out.days.push_back({date, slot.first});
  }
  return out;
}

bool meets_coverage(const AlignedSeries& aligned, std::size_t min_days) { return aligned.size() >= min_days; }

}  // namespace ecorank
