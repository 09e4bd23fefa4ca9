#include "ecorank/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"

namespace ecorank {

std::string_view to_string(WeatherProfile w) {
  switch (w) {
    case WeatherProfile::ColdTemperate: return "ColdTemperate";
    case WeatherProfile::HotArid: return "HotArid";
    case WeatherProfile::Mild: return "Mild";
  }
  return "";
}

std::optional<WeatherProfile> parse_weather_profile(std::string_view text) {
  for (auto w : {WeatherProfile::ColdTemperate, WeatherProfile::HotArid, WeatherProfile::Mild}) {
    if (to_string(w) == text) return w;
  }
  return std::nullopt;
}

namespace {

void validate_dist(const ParamDist& d, const char* name) {
  const bool ok = std::isfinite(d.a) && std::isfinite(d.b) &&
                  (d.kind == ParamDist::Kind::Normal ? d.b >= 0.0 : d.a <= d.b);
  if (!ok) throw Error(ErrorCode::BadSpec, std::string("invalid distribution for ") + name);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), a, b,
                    0x5eedu};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kWeatherStream = 0xffffffffu;

double draw(const ParamDist& d, std::mt19937_64& rng) {
  if (d.kind == ParamDist::Kind::Uniform) return std::uniform_real_distribution<double>(d.a, d.b)(rng);
  if (d.b == 0.0) return d.a;
  return std::normal_distribution<double>(d.a, d.b)(rng);
}

// Redraws until nonnegative; a location far below zero falls back to zero.
double draw_nonnegative(const ParamDist& d, std::mt19937_64& rng) {
  for (int i = 0; i < 100; ++i) {
    const double v = draw(d, rng);
    if (v >= 0.0) return v;
  }
  return 0.0;
}

struct Climate {
  double mean, amplitude, noise;
};

Climate climate(WeatherProfile w) {
  switch (w) {
    case WeatherProfile::ColdTemperate: return {52.0, 28.0, 6.0};
    case WeatherProfile::HotArid: return {75.0, 15.0, 4.0};
    case WeatherProfile::Mild: return {62.0, 10.0, 4.0};
  }
  return {60.0, 15.0, 4.0};
}

WeatherSeries make_weather(const SynthSpec& spec) {
  if (spec.weather_file) return load_weather(*spec.weather_file);
  auto rng = stream(spec.seed, kWeatherStream, 0);
  const auto c = climate(spec.weather_profile);
  std::normal_distribution<double> noise(0.0, c.noise);
  WeatherSeries w;
  w.days.reserve(static_cast<std::size_t>(spec.days));
  for (int d = 0; d < spec.days; ++d) {
    // warmest around day 200 of the year
    const double season = std::cos(2.0 * std::numbers::pi * (d - 200) / 365.0);
    const double t = std::clamp(c.mean + c.amplitude * season + noise(rng), -60.0, 140.0);
    w.days.push_back({spec.start.plus_days(d), t});
  }
  return w;
}

std::string home_id(int i, int n) {
  const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
  auto digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return "H" + digits;
}

void inject(Fault f, ParamPoint& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> slope(1.5, 2.5), appliance(1.5, 2.0), shift(5.0, 10.0);
  switch (f) {
    case Fault::PoorBuildingEnvelope: {
      const double k = slope(rng);
      p.gamma_heat *= k;
      p.gamma_cool *= k;
      break;
    }
    case Fault::InefficientHeater: p.gamma_heat *= slope(rng); break;
    case Fault::InefficientAC: p.gamma_cool *= slope(rng); break;
    case Fault::InefficientAppliances: p.base *= appliance(rng); break;
    case Fault::HighSetPoint:
      p.t_heat = std::min(p.t_heat + shift(rng), kBalanceMax);
      p.t_cool = std::max(p.t_cool, p.t_heat);
      break;
    case Fault::LowSetPoint:
      p.t_cool = std::max(p.t_cool - shift(rng), kBalanceMin);
      p.t_heat = std::min(p.t_heat, p.t_cool);
      break;
  }
}

}  // namespace

void validate(const SynthSpec& s) {
  if (s.n_homes < 1) throw Error(ErrorCode::BadSpec, "n_homes must be >= 1");
  if (!s.weather_file && s.days < 1) throw Error(ErrorCode::BadSpec, "days must be >= 1");
  for (const auto& [f, r] : s.fault_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::BadSpec, "fault rate outside [0, 1]");
  }
  if (!(s.noise_sd >= 0.0) || !(s.noise_relative >= 0.0)) throw Error(ErrorCode::BadSpec, "noise must be >= 0");
  if (s.year_min > s.year_max) throw Error(ErrorCode::BadSpec, "year_min > year_max");
  if (!(s.area_min > 0.0 && s.area_min <= s.area_max)) throw Error(ErrorCode::BadSpec, "invalid area range");
  if (!(s.spread_deg >= 0.0)) throw Error(ErrorCode::BadSpec, "spread_deg must be >= 0");
  validate_dist(s.params.base, "base");
  validate_dist(s.params.gamma_heat, "gamma_heat");
  validate_dist(s.params.gamma_cool, "gamma_cool");
  validate_dist(s.params.t_heat, "t_heat");
  validate_dist(s.params.t_cool, "t_cool");
}

const HomeTruth* GroundTruth::find(const std::string& id) const {
  auto it = std::lower_bound(homes.begin(), homes.end(), id,
                             [](const HomeTruth& h, const std::string& k) { return h.building_id < k; });
  return it != homes.end() && it->building_id == id ? &*it : nullptr;
}

SynthDataset generate(const SynthSpec& spec) {
  validate(spec);
  SynthDataset out;
  out.weather = make_weather(spec);
  const auto temps = out.weather.temperatures();

  for (int i = 0; i < spec.n_homes; ++i) {
    auto rng = stream(spec.seed, static_cast<std::uint32_t>(i), 1);
    BuildingRecord b;
    b.id = home_id(i, spec.n_homes);
    b.property_type = spec.property_type;
    b.year_built = std::uniform_int_distribution<int>(spec.year_min, spec.year_max)(rng);
    b.floor_area = spec.area_min == spec.area_max
                       ? spec.area_min
                       : std::round(std::uniform_real_distribution<double>(spec.area_min, spec.area_max)(rng));
    std::uniform_real_distribution<double> jitter(-spec.spread_deg, spec.spread_deg);
    const double lat = spec.center.latitude + jitter(rng);
    const double lon = spec.center.longitude + jitter(rng);
    b.location = GeoPoint{lat, lon};

    ParamPoint p;
    p.base = draw_nonnegative(spec.params.base, rng);
    p.gamma_heat = draw_nonnegative(spec.params.gamma_heat, rng);
    p.gamma_cool = draw_nonnegative(spec.params.gamma_cool, rng);
    p.t_heat = std::clamp(draw(spec.params.t_heat, rng), kBalanceMin, kBalanceMax);
    p.t_cool = std::clamp(draw(spec.params.t_cool, rng), kBalanceMin, kBalanceMax);
    if (p.t_heat > p.t_cool) std::swap(p.t_heat, p.t_cool);

    HomeTruth truth;
    truth.building_id = b.id;
    truth.before = p;
    // one uniform per fault class, always consumed so the draws do not shift with the rates
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto f : kFaults) {
      const double x = u(rng);
      auto it = spec.fault_rates.find(f);
      if (it != spec.fault_rates.end() && x < it->second) truth.faults.push_back(f);
    }
    // Raising t_heat and lowering t_cool together cannot keep t_heat <= t_cool
    // and move both; the heating fault wins.
    if (std::ranges::count(truth.faults, Fault::HighSetPoint) && std::ranges::count(truth.faults, Fault::LowSetPoint)) {
      std::erase(truth.faults, Fault::LowSetPoint);
    }
    for (auto f : truth.faults) inject(f, p, rng);

    const auto clean = predict(p, temps);
    double mean = 0.0;
    for (double v : clean) mean += v;
    mean = b.floor_area * mean / static_cast<double>(clean.size());
    const double sd = spec.noise_relative > 0.0 ? spec.noise_relative * mean : spec.noise_sd;
    std::normal_distribution<double> noise(0.0, 1.0);

    DailySeries s;
    s.building_id = b.id;
    s.days.reserve(clean.size());
    AnnualRecord a;
    a.building_id = b.id;
    for (std::size_t d = 0; d < clean.size(); ++d) {
      // meters do not read negative
      const double e = std::max(0.0, b.floor_area * clean[d] + (sd > 0.0 ? sd * noise(rng) : 0.0));
      s.days.push_back({out.weather.days[d].date, e});
      a.heating += b.floor_area * p.gamma_heat * hinge(p.t_heat - temps[d]);
      a.cooling += b.floor_area * p.gamma_cool * hinge(temps[d] - p.t_cool);
      a.total += b.floor_area * clean[d];
    }
    a.total = std::max(a.total, a.heating + a.cooling);

    truth.noise_sd = sd;
    truth.before.sigma = sd / b.floor_area;
    p.sigma = sd / b.floor_area;
    truth.params = p;

    out.buildings.push_back(std::move(b));
    out.energy.push_back(std::move(s));
    out.annual.push_back(a);
    out.truth.homes.push_back(std::move(truth));
  }
  return out;
}

std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir, const SynthDataset& data,
                                                 bool emit_annual) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths = {dir / "buildings.csv", dir / "energy.csv", dir / "weather.csv",
                                              dir / "ground_truth.json"};
  write_buildings(paths[0], data.buildings);
  write_energy(paths[1], data.energy);
  write_weather(paths[2], data.weather);
  csv::write_atomic(paths[3], nlohmann::json(data.truth).dump(2) + "\n");
  if (emit_annual) {
    paths.push_back(dir / "annual.csv");
    write_annual(paths.back(), data.annual);
  }
  return paths;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j.get<GroundTruth>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadValue, path.string() + ": " + e.what());
  }
}

std::vector<Fault> attributed_faults(const FaultReport& r, Attribution a) {
  if (a == Attribution::Listed) return r.faults;
  const auto& f = r.flags;
  std::vector<Fault> out;
  auto keep = [&](Fault x) {
    if (std::find(r.faults.begin(), r.faults.end(), x) != r.faults.end()) out.push_back(x);
  };
  if (f.high_gamma_heat && !f.high_gamma_cool) keep(Fault::InefficientHeater);
  if (f.high_gamma_cool && !f.high_gamma_heat) keep(Fault::InefficientAC);
  if (f.high_gamma_heat && f.high_gamma_cool) keep(Fault::PoorBuildingEnvelope);
  if (f.high_t_heat) keep(Fault::HighSetPoint);
  if (f.low_t_cool) keep(Fault::LowSetPoint);
  if (f.high_base) keep(Fault::InefficientAppliances);
  return out;
}

DetectionMetrics score(std::span<const FaultReport> reports, const GroundTruth& truth, Attribution attribution) {
  std::map<std::string, const FaultReport*> by_id;
  for (const auto& r : reports) {
    if (!truth.find(r.building_id)) throw Error(ErrorCode::IdMismatch, r.building_id + " is not in the ground truth");
    if (!by_id.emplace(r.building_id, &r).second) throw Error(ErrorCode::IdMismatch, "duplicate report " + r.building_id);
  }
  DetectionMetrics m;
  for (auto f : kFaults) m.per_class[f];
  for (const auto& h : truth.homes) {
    std::vector<Fault> predicted;
    if (auto it = by_id.find(h.building_id); it != by_id.end()) predicted = attributed_faults(*it->second, attribution);
    for (auto f : kFaults) {
      const bool p = std::find(predicted.begin(), predicted.end(), f) != predicted.end();
      const bool t = std::find(h.faults.begin(), h.faults.end(), f) != h.faults.end();
      auto& c = m.per_class[f];
      if (p && t) ++c.tp;
      if (p && !t) ++c.fp;
      if (!p && t) ++c.fn;
    }
  }
  for (auto& [f, c] : m.per_class) {
    if (c.tp + c.fp > 0) {
      c.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    } else {
      c.precision = c.fn == 0 ? 1.0 : 0.0;
    }
    c.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 1.0;
  }
  return m;
}

double mode_agreement(const std::map<std::string, EfficiencyFlags>& individual,
                      const std::map<std::string, EfficiencyFlags>& region, ModelParam p) {
  std::set<std::string> a, b;
  for (const auto& [id, f] : individual) {
    if (f.flag(p)) a.insert(id);
  }
  for (const auto& [id, f] : region) {
    if (f.flag(p)) b.insert(id);
  }
  std::size_t both = 0;
  for (const auto& id : a) both += b.count(id);
  const std::size_t either = a.size() + b.size() - both;
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

namespace {

nlohmann::json dist_json(const ParamDist& d) {
  if (d.kind == ParamDist::Kind::Uniform) return {{"uniform", {d.a, d.b}}};
  return {{"mean", d.a}, {"sd", d.b}};
}

ParamDist dist_from_json(const nlohmann::json& j) {
  if (j.contains("uniform")) return ParamDist::uniform(j["uniform"].at(0).get<double>(), j["uniform"].at(1).get<double>());
  return ParamDist::normal(j.at("mean").get<double>(), j.at("sd").get<double>());
}

}  // namespace

void to_json(nlohmann::json& j, const SynthSpec& s) {
  nlohmann::json rates = nlohmann::json::object();
  for (const auto& [f, r] : s.fault_rates) rates[std::string(to_string(f))] = r;
  j = nlohmann::json{{"n_homes", s.n_homes},
                     {"seed", s.seed},
                     {"weather_profile", to_string(s.weather_profile)},
                     {"start", s.start.iso()},
                     {"days", s.days},
                     {"parameter_distributions",
                      {{"base", dist_json(s.params.base)},
                       {"gamma_heat", dist_json(s.params.gamma_heat)},
                       {"gamma_cool", dist_json(s.params.gamma_cool)},
                       {"t_heat", dist_json(s.params.t_heat)},
                       {"t_cool", dist_json(s.params.t_cool)}}},
                     {"fault_rates", rates},
                     {"noise_sd", s.noise_sd},
                     {"noise_relative", s.noise_relative},
                     {"property_type", to_string(s.property_type)},
                     {"year_built", {s.year_min, s.year_max}},
                     {"floor_area", {s.area_min, s.area_max}},
                     {"center", {s.center.latitude, s.center.longitude}},
                     {"spread_deg", s.spread_deg},
                     {"emit_annual", s.emit_annual}};
  if (s.weather_file) j["weather_file"] = s.weather_file->string();
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s = SynthSpec{};
  s.n_homes = j.at("n_homes").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("weather_profile")) {
    auto w = parse_weather_profile(j["weather_profile"].get<std::string>());
    if (!w) throw Error(ErrorCode::BadSpec, "unknown weather_profile " + j["weather_profile"].get<std::string>());
    s.weather_profile = *w;
  }
  if (j.contains("weather_file")) s.weather_file = j["weather_file"].get<std::string>();
  if (j.contains("start")) s.start = Date::parse(j["start"].get<std::string>());
  s.days = j.value("days", s.days);
  if (j.contains("parameter_distributions")) {
    const auto& d = j["parameter_distributions"];
    if (d.contains("base")) s.params.base = dist_from_json(d["base"]);
    if (d.contains("gamma_heat")) s.params.gamma_heat = dist_from_json(d["gamma_heat"]);
    if (d.contains("gamma_cool")) s.params.gamma_cool = dist_from_json(d["gamma_cool"]);
    if (d.contains("t_heat")) s.params.t_heat = dist_from_json(d["t_heat"]);
    if (d.contains("t_cool")) s.params.t_cool = dist_from_json(d["t_cool"]);
  }
  if (j.contains("fault_rates")) {
    for (const auto& [name, rate] : j["fault_rates"].items()) {
      auto f = parse_fault(name);
      if (!f) throw Error(ErrorCode::BadSpec, "unknown fault " + name);
      s.fault_rates[*f] = rate.get<double>();
    }
  }
  s.noise_sd = j.value("noise_sd", s.noise_sd);
  s.noise_relative = j.value("noise_relative", s.noise_relative);
  if (j.contains("property_type")) {
    auto t = parse_property_type(j["property_type"].get<std::string>());
    if (!t) throw Error(ErrorCode::BadSpec, "unknown property_type");
    s.property_type = *t;
  }
  if (j.contains("year_built")) {
    s.year_min = j["year_built"].at(0).get<int>();
    s.year_max = j["year_built"].at(1).get<int>();
  }
  if (j.contains("floor_area")) {
    s.area_min = j["floor_area"].at(0).get<double>();
    s.area_max = j["floor_area"].at(1).get<double>();
  }
  if (j.contains("center")) s.center = {j["center"].at(0).get<double>(), j["center"].at(1).get<double>()};
  s.spread_deg = j.value("spread_deg", s.spread_deg);
  s.emit_annual = j.value("emit_annual", s.emit_annual);
}

SynthSpec read_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    nlohmann::json j;
    in >> j;
    auto s = j.get<SynthSpec>();
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadSpec, path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::BadSpec, path.string() + ": " + e.what());
  }
}

void to_json(nlohmann::json& j, const GroundTruth& t) {
  j = nlohmann::json::array();
  for (const auto& h : t.homes) {
    std::vector<std::string> faults;
    for (auto f : h.faults) faults.emplace_back(to_string(f));
    j.push_back({{"building_id", h.building_id},
                 {"before", h.before},
                 {"params", h.params},
                 {"faults", faults},
                 {"noise_sd", h.noise_sd}});
  }
}

void from_json(const nlohmann::json& j, GroundTruth& t) {
  t.homes.clear();
  for (const auto& e : j) {
    HomeTruth h;
    h.building_id = e.at("building_id").get<std::string>();
    h.before = e.at("before").get<ParamPoint>();
    h.params = e.at("params").get<ParamPoint>();
    for (const auto& name : e.at("faults")) {
      auto f = parse_fault(name.get<std::string>());
      if (!f) throw Error(ErrorCode::BadValue, "unknown fault " + name.get<std::string>());
      h.faults.push_back(*f);
    }
    h.noise_sd = e.value("noise_sd", 0.0);
    t.homes.push_back(std::move(h));
  }
  std::sort(t.homes.begin(), t.homes.end(),
            [](const HomeTruth& a, const HomeTruth& b) { return a.building_id < b.building_id; });
}

}  // namespace ecorank
