#include "ecorank/faults.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"

namespace ecorank {

void validate(const Sensitivity& s) {
  if (!(s.tau > 0.0 && s.tau <= 1.0)) throw Error(ErrorCode::BadSpec, "tau must be in (0, 1]");
  if (!std::isfinite(s.t_heat_threshold) || !std::isfinite(s.t_cool_threshold)) {
    throw Error(ErrorCode::BadSpec, "balance point thresholds must be finite");
  }
}

int wins_threshold(std::size_t group_size, double tau) {
  if (group_size < 2) return 0;
  // the tolerance keeps products such as 0.75 * 4 from rounding up past an integer
  return static_cast<int>(std::ceil(tau * static_cast<double>(group_size - 1) - 1e-9));
}

bool EfficiencyFlags::get(Indicator i) const {
  switch (i) {
    case Indicator::HighGammaHeat: return high_gamma_heat;
    case Indicator::HighGammaCool: return high_gamma_cool;
    case Indicator::HighTHeat: return high_t_heat;
    case Indicator::LowTCool: return low_t_cool;
    case Indicator::HighBase: return high_base;
  }
  return false;
}

bool EfficiencyFlags::flag(ModelParam p) const {
  switch (p) {
    case ModelParam::base: return high_base;
    case ModelParam::gamma_heat: return high_gamma_heat;
    case ModelParam::gamma_cool: return high_gamma_cool;
  }
  return false;
}

namespace {

void set_flag(EfficiencyFlags& f, ModelParam p, bool v) {
  switch (p) {
    case ModelParam::base: f.high_base = v; break;
    case ModelParam::gamma_heat: f.high_gamma_heat = v; break;
    case ModelParam::gamma_cool: f.high_gamma_cool = v; break;
  }
}

void set_balance_flags(EfficiencyFlags& f, double t_heat_mean, double t_cool_mean, const Sensitivity& s) {
  f.high_t_heat = t_heat_mean > s.t_heat_threshold;
  f.low_t_cool = t_cool_mean < s.t_cool_threshold;
}

}  // namespace

std::string_view to_string(Indicator i) {
  switch (i) {
    case Indicator::HighGammaHeat: return "high_gamma_heat";
    case Indicator::HighGammaCool: return "high_gamma_cool";
    case Indicator::HighTHeat: return "high_t_heat";
    case Indicator::LowTCool: return "low_t_cool";
    case Indicator::HighBase: return "high_base";
  }
  return "";
}

std::string_view to_string(Fault f) {
  switch (f) {
    case Fault::InefficientHeater: return "InefficientHeater";
    case Fault::InefficientAC: return "InefficientAC";
    case Fault::PoorBuildingEnvelope: return "PoorBuildingEnvelope";
    case Fault::HighSetPoint: return "HighSetPoint";
    case Fault::LowSetPoint: return "LowSetPoint";
    case Fault::InefficientAppliances: return "InefficientAppliances";
  }
  return "";
}

std::optional<Fault> parse_fault(std::string_view text) {
  for (auto f : kFaults) {
    if (to_string(f) == text) return f;
  }
  return std::nullopt;
}

const FaultMap& default_fault_map() {
  static const FaultMap map = {
      {Indicator::HighGammaHeat, {Fault::InefficientHeater, Fault::PoorBuildingEnvelope}},
      {Indicator::HighGammaCool, {Fault::InefficientAC, Fault::PoorBuildingEnvelope}},
      {Indicator::HighTHeat, {Fault::HighSetPoint, Fault::PoorBuildingEnvelope}},
      {Indicator::LowTCool, {Fault::LowSetPoint, Fault::PoorBuildingEnvelope}},
      {Indicator::HighBase, {Fault::InefficientAppliances}},
  };
  return map;
}

std::map<std::string, EfficiencyFlags> flag_cohort(const PeerGroup& group, const DominanceCounts& counts,
                                                   const BalancePointMeans& bp_means, const Sensitivity& s) {
  if (group.member_ids.empty()) throw Error(ErrorCode::EmptyGroup, group.key.label(BucketSpec{}));
  validate(s);
  const std::size_t n = group.member_ids.size();
  const int threshold = wins_threshold(n, s.tau);
  std::map<std::string, EfficiencyFlags> out;
  for (const auto& id : group.member_ids) {
    auto bp = bp_means.find(id);
    if (bp == bp_means.end()) throw Error(ErrorCode::MissingPosterior, id + ": no balance point means");
    EfficiencyFlags f;
    if (n >= 2) {
      for (auto p : kModelParams) {
        const auto& m = counts.wins[static_cast<std::size_t>(p)];
        auto it = m.find(id);
        if (it == m.end()) throw Error(ErrorCode::MissingEcdf, id + ": no dominance count");
        set_flag(f, p, it->second >= threshold);
      }
    }
    set_balance_flags(f, bp->second.first, bp->second.second, s);
    out.emplace(id, f);
  }
  return out;
}

EfficiencyFlags flag_region(const RegionCandidate& candidate, const RegionDistribution& region,
                            const Sensitivity& s) {
  EfficiencyFlags f;
  for (auto p : kModelParams) set_flag(f, p, ssd_dominates(get(candidate.ecdfs, p), region.cdf(p)));
  set_balance_flags(f, candidate.t_heat_mean, candidate.t_cool_mean, s);
  return f;
}

FaultReport root_cause(const std::string& building_id, const EfficiencyFlags& flags, const FaultMap& fault_map) {
  FaultReport r;
  r.building_id = building_id;
  r.flags = flags;
  for (auto i : kIndicators) {
    if (!flags.get(i)) continue;
    auto it = fault_map.find(i);
    if (it == fault_map.end()) continue;
    for (auto fault : it->second) {
      if (std::find(r.faults.begin(), r.faults.end(), fault) == r.faults.end()) r.faults.push_back(fault);
    }
  }
  return r;
}

GridStats grid_aggregate(std::span<const BuildingRecord> buildings, const std::map<std::string, EfficiencyFlags>& flags,
                         double cell_m) {
  if (!(cell_m > 0.0)) throw Error(ErrorCode::BadSpec, "cell size must be > 0");
  GridStats out;
  out.cell_m = cell_m;
  if (buildings.empty()) return out;
  double lat = 0.0, lon = 0.0;
  for (const auto& b : buildings) {
    if (!b.location) throw Error(ErrorCode::MissingLocation, b.id);
    lat += b.location->latitude;
    lon += b.location->longitude;
  }
  const auto n = static_cast<double>(buildings.size());
  out.origin = {lat / n, lon / n};

  constexpr double kEarthRadiusM = 6371008.8;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double cos_lat = std::cos(out.origin.latitude * kRad);
  std::map<std::pair<long, long>, std::pair<int, int>> cells;
  for (const auto& b : buildings) {
    const double x = (b.location->longitude - out.origin.longitude) * kRad * cos_lat * kEarthRadiusM;
    const double y = (b.location->latitude - out.origin.latitude) * kRad * kEarthRadiusM;
    const auto key = std::make_pair(static_cast<long>(std::floor(x / cell_m)), static_cast<long>(std::floor(y / cell_m)));
    auto& [count, flagged] = cells[key];
    ++count;
    auto it = flags.find(b.id);
    if (it != flags.end() && it->second.any()) ++flagged;
  }
  for (const auto& [key, c] : cells) {
    out.cells.push_back({key.first, key.second, c.first, c.second,
                         static_cast<double>(c.second) / static_cast<double>(c.first)});
  }
  return out;
}

void to_json(nlohmann::json& j, const EfficiencyFlags& f) {
  j = nlohmann::json{{"high_gamma_heat", f.high_gamma_heat},
                     {"high_gamma_cool", f.high_gamma_cool},
                     {"high_base", f.high_base},
                     {"high_t_heat", f.high_t_heat},
                     {"low_t_cool", f.low_t_cool}};
}

void from_json(const nlohmann::json& j, EfficiencyFlags& f) {
  f.high_gamma_heat = j.at("high_gamma_heat").get<bool>();
  f.high_gamma_cool = j.at("high_gamma_cool").get<bool>();
  f.high_base = j.at("high_base").get<bool>();
  f.high_t_heat = j.at("high_t_heat").get<bool>();
  f.low_t_cool = j.at("low_t_cool").get<bool>();
}

namespace {

nlohmann::json evidence_json(const Evidence& e) {
  nlohmann::json j{{"mode", e.mode}, {"t_heat_mean", e.t_heat_mean}, {"t_cool_mean", e.t_cool_mean}};
  if (e.mode == "region") {
    nlohmann::json d;
    for (auto p : kModelParams) d[std::string(to_string(p))] = e.dominates_region[static_cast<std::size_t>(p)];
    j["dominates_region"] = d;
    j["region_size"] = e.region_size;
  } else {
    nlohmann::json w;
    for (auto p : kModelParams) w[std::string(to_string(p))] = e.wins[static_cast<std::size_t>(p)];
    j["wins"] = w;
    j["group_size"] = e.group_size;
    j["threshold"] = e.threshold;
  }
  return j;
}

Evidence evidence_from_json(const nlohmann::json& j) {
  Evidence e;
  e.mode = j.at("mode").get<std::string>();
  e.t_heat_mean = j.at("t_heat_mean").get<double>();
  e.t_cool_mean = j.at("t_cool_mean").get<double>();
  for (auto p : kModelParams) {
    const auto k = static_cast<std::size_t>(p);
    const std::string name(to_string(p));
    if (j.contains("wins")) e.wins[k] = j["wins"].at(name).get<int>();
    if (j.contains("dominates_region")) e.dominates_region[k] = j["dominates_region"].at(name).get<bool>();
  }
  e.group_size = j.value("group_size", std::size_t{0});
  e.threshold = j.value("threshold", 0);
  e.region_size = j.value("region_size", std::size_t{0});
  return e;
}

}  // namespace

void to_json(nlohmann::json& j, const FaultReport& r) {
  std::vector<std::string> faults;
  for (auto f : r.faults) faults.emplace_back(to_string(f));
  j = nlohmann::json{{"building_id", r.building_id}, {"flags", r.flags}, {"faults", faults}};
  if (r.evidence) j["evidence"] = evidence_json(*r.evidence);
}

void from_json(const nlohmann::json& j, FaultReport& r) {
  r.building_id = j.at("building_id").get<std::string>();
  r.flags = j.at("flags").get<EfficiencyFlags>();
  r.faults.clear();
  for (const auto& name : j.at("faults")) {
    auto f = parse_fault(name.get<std::string>());
    if (!f) throw Error(ErrorCode::BadValue, "unknown fault " + name.get<std::string>());
    r.faults.push_back(*f);
  }
  r.evidence.reset();
  if (j.contains("evidence")) r.evidence = evidence_from_json(j["evidence"]);
}

std::string render_text(std::span<const FaultReport> reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << "== " << r.building_id << " ==\n";
    os << "flags:";
    bool any = false;
    for (auto i : kIndicators) {
      if (r.flags.get(i)) {
        os << ' ' << to_string(i);
        any = true;
      }
    }
    os << (any ? "\n" : " none\n");
    os << "faults:";
    for (auto f : r.faults) os << ' ' << to_string(f);
    os << (r.faults.empty() ? " none\n" : "\n");
    if (r.evidence) {
      const auto& e = *r.evidence;
      os << "evidence (" << e.mode << "):";
      for (auto p : kModelParams) {
        const auto k = static_cast<std::size_t>(p);
        os << ' ' << to_string(p) << '=';
        if (e.mode == "region") {
          os << (e.dominates_region[k] ? "dominates" : "no");
        } else {
          os << e.wins[k] << '/' << (e.group_size > 0 ? e.group_size - 1 : 0);
        }
      }
      if (e.mode == "region") {
        os << " region_size=" << e.region_size;
      } else {
        os << " threshold=" << e.threshold;
      }
      os << " t_heat_mean=" << csv::format(e.t_heat_mean) << " t_cool_mean=" << csv::format(e.t_cool_mean) << '\n';
    }
    os << '\n';
  }
  return os.str();
}

void write_reports(const std::filesystem::path& json_path, const std::filesystem::path& text_path,
                   std::span<const FaultReport> reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(r);
  csv::write_atomic(json_path, j.dump(2) + "\n");
  csv::write_atomic(text_path, render_text(reports));
}

std::vector<FaultReport> read_reports(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::MissingFile, json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadValue, json_path.string() + ": " + e.what());
  }
  return j.get<std::vector<FaultReport>>();
}

void write_grid_stats(const std::filesystem::path& path, const GridStats& stats) {
  std::ostringstream os;
  os << "cell_x,cell_y,n,frac_inefficient\n";
  for (const auto& c : stats.cells) {
    os << c.cell_x << ',' << c.cell_y << ',' << c.n << ',' << csv::format(c.frac_inefficient) << '\n';
  }
  csv::write_atomic(path, os.str());
}

}  // namespace ecorank
