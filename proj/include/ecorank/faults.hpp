#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecorank/ordering.hpp"
#include "ecorank/region.hpp"

namespace ecorank {

struct Sensitivity {
  double tau = 0.75;               // fraction of the other cohort members a home must dominate
  double t_heat_threshold = 70.0;  // F; a higher mean heating balance point is flagged
  double t_cool_threshold = 55.0;  // F; a lower mean cooling balance point is flagged
};

void validate(const Sensitivity& s);

/// Minimum pairwise wins for a flag in a group of n: ceil(tau * (n - 1)).
int wins_threshold(std::size_t group_size, double tau);

enum class Indicator { HighGammaHeat, HighGammaCool, HighTHeat, LowTCool, HighBase };

inline constexpr std::array<Indicator, 5> kIndicators = {Indicator::HighGammaHeat, Indicator::HighGammaCool,
                                                         Indicator::HighTHeat, Indicator::LowTCool,
                                                         Indicator::HighBase};

struct EfficiencyFlags {
  bool high_gamma_heat = false;
  bool high_gamma_cool = false;
  bool high_base = false;
  bool high_t_heat = false;
  bool low_t_cool = false;

  bool get(Indicator i) const;
  bool flag(ModelParam p) const;
  bool any() const { return high_gamma_heat || high_gamma_cool || high_base || high_t_heat || low_t_cool; }
  bool operator==(const EfficiencyFlags&) const = default;
};

enum class Fault { InefficientHeater, InefficientAC, PoorBuildingEnvelope, HighSetPoint, LowSetPoint, InefficientAppliances };

inline constexpr std::array<Fault, 6> kFaults = {Fault::InefficientHeater, Fault::InefficientAC,
                                                 Fault::PoorBuildingEnvelope, Fault::HighSetPoint,
                                                 Fault::LowSetPoint, Fault::InefficientAppliances};

std::string_view to_string(Indicator i);
std::string_view to_string(Fault f);
std::optional<Fault> parse_fault(std::string_view text);

using FaultMap = std::map<Indicator, std::vector<Fault>>;

/// Indicator to probable-fault table.
const FaultMap& default_fault_map();

/// What the flags were decided from, kept for the report.
struct Evidence {
  std::string mode;  // "individual" or "region"
  std::array<int, 3> wins{};          // individual mode, indexed by ModelParam
  std::size_t group_size = 0;
  int threshold = 0;
  std::array<bool, 3> dominates_region{};  // region mode
  std::size_t region_size = 0;
  double t_heat_mean = 0.0;
  double t_cool_mean = 0.0;
};

struct FaultReport {
  std::string building_id;
  EfficiencyFlags flags;
  std::vector<Fault> faults;
  std::optional<Evidence> evidence;
};

using BalancePointMeans = std::map<std::string, std::pair<double, double>>;

std::map<std::string, EfficiencyFlags> flag_cohort(const PeerGroup& group, const DominanceCounts& counts,
                                                   const BalancePointMeans& bp_means, const Sensitivity& s);

struct RegionCandidate {
  BuildingEcdfs ecdfs;
  double t_heat_mean = 0.0;
  double t_cool_mean = 0.0;
};

EfficiencyFlags flag_region(const RegionCandidate& candidate, const RegionDistribution& region,
                            const Sensitivity& s);

/// Concatenate the mapped faults of every raised indicator, dropping repeats.
FaultReport root_cause(const std::string& building_id, const EfficiencyFlags& flags,
                       const FaultMap& fault_map = default_fault_map());

struct GridCell {
  long cell_x = 0;
  long cell_y = 0;
  int n = 0;
  int flagged = 0;
  double frac_inefficient = 0.0;
};

struct GridStats {
  GeoPoint origin;  // projection center (dataset centroid)
  double cell_m = 100.0;
  std::vector<GridCell> cells;  // sorted by (cell_x, cell_y)
};

/// Buildings missing from `flags` count as not flagged.
GridStats grid_aggregate(std::span<const BuildingRecord> buildings, const std::map<std::string, EfficiencyFlags>& flags,
                         double cell_m = 100.0);

void to_json(nlohmann::json& j, const EfficiencyFlags& f);
void from_json(const nlohmann::json& j, EfficiencyFlags& f);
void to_json(nlohmann::json& j, const FaultReport& r);
void from_json(const nlohmann::json& j, FaultReport& r);

std::string render_text(std::span<const FaultReport> reports);
void write_reports(const std::filesystem::path& json_path, const std::filesystem::path& text_path,
                   std::span<const FaultReport> reports);
std::vector<FaultReport> read_reports(const std::filesystem::path& json_path);
void write_grid_stats(const std::filesystem::path& path, const GridStats& stats);

}  // namespace ecorank
