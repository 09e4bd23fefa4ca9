#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecorank/faults.hpp"
#include "ecorank/ingest.hpp"
#include "ecorank/thermal_model.hpp"
#include "json.hpp"

namespace ecorank {

enum class WeatherProfile { ColdTemperate, HotArid, Mild };

std::string_view to_string(WeatherProfile w);
std::optional<WeatherProfile> parse_weather_profile(std::string_view text);

/// Draw distribution for one model parameter.
struct ParamDist {
  enum class Kind { Normal, Uniform };
  Kind kind = Kind::Normal;
  double a = 0.0;  // mean, or lower bound
  double b = 0.0;  // sd, or upper bound

  static ParamDist normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }
  static ParamDist uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
};

/// Area-normalized parameter distributions (kWh per sq.ft.).
struct ParamDistributions {
  ParamDist base = ParamDist::normal(0.010, 0.0005);
  ParamDist gamma_heat = ParamDist::normal(0.0006, 0.00003);
  ParamDist gamma_cool = ParamDist::normal(0.0008, 0.00004);
  ParamDist t_heat = ParamDist::normal(60.0, 1.5);
  ParamDist t_cool = ParamDist::normal(68.0, 1.5);
};

struct SynthSpec {
  int n_homes = 1;
  std::uint64_t seed = 0;
  WeatherProfile weather_profile = WeatherProfile::ColdTemperate;
  std::optional<std::filesystem::path> weather_file;  // replaces the profile when set
  Date start = Date(2023, 1, 1);
  int days = 365;
  ParamDistributions params;
  std::map<Fault, double> fault_rates;  // independent per home
  double noise_sd = 0.0;                // kWh/day
  double noise_relative = 0.0;          // when > 0, sd = this fraction of the home's mean daily energy
  PropertyType property_type = PropertyType::SingleFamily;
  int year_min = 1980;  // year_built drawn uniformly from [year_min, year_max]
  int year_max = 1999;
  double area_min = 1000.0;  // floor area drawn uniformly, sq.ft.
  double area_max = 1999.0;
  GeoPoint center{40.0, -75.0};
  double spread_deg = 0.02;  // locations uniform in center +- spread
  bool emit_annual = false;
};

void validate(const SynthSpec& spec);

struct HomeTruth {
  std::string building_id;
  ParamPoint before;  // normalized, before fault injection
  ParamPoint params;  // normalized, as generated
  std::vector<Fault> faults;
  double noise_sd = 0.0;  // kWh/day, whole building
};

struct GroundTruth {
  std::vector<HomeTruth> homes;  // sorted by building_id

  const HomeTruth* find(const std::string& id) const;
};

struct SynthDataset {
  std::vector<BuildingRecord> buildings;
  std::vector<DailySeries> energy;
  WeatherSeries weather;
  std::vector<AnnualRecord> annual;  // noiseless component totals
  GroundTruth truth;
};

SynthDataset generate(const SynthSpec& spec);

/// Writes buildings.csv, energy.csv, weather.csv, ground_truth.json and,
/// when requested, annual.csv. Returns the written paths.
std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir, const SynthDataset& data,
                                                 bool emit_annual);

GroundTruth read_ground_truth(const std::filesystem::path& path);

/// How reported faults are matched against injected ones. Listed takes the
/// report's fault list as is. Signature keeps, among the listed candidates,
/// the one whose parameter pattern matches: both slopes for the envelope, a
/// single slope for heater or AC.
enum class Attribution { Listed, Signature };

std::vector<Fault> attributed_faults(const FaultReport& r, Attribution a);

struct ClassMetrics {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 1.0;  // 1 when nothing was predicted and nothing was injected
  double recall = 1.0;
};

struct DetectionMetrics {
  std::map<Fault, ClassMetrics> per_class;
};

DetectionMetrics score(std::span<const FaultReport> reports, const GroundTruth& truth,
                       Attribution attribution = Attribution::Listed);

/// |I ∩ R| / |I ∪ R| over homes flagged on `p`; 1 when both sets are empty.
double mode_agreement(const std::map<std::string, EfficiencyFlags>& individual,
                      const std::map<std::string, EfficiencyFlags>& region, ModelParam p);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);
SynthSpec read_synth_spec(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const GroundTruth& t);
void from_json(const nlohmann::json& j, GroundTruth& t);

}  // namespace ecorank
