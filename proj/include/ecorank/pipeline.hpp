#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecorank/bayes_fit.hpp"
#include "ecorank/cohort.hpp"
#include "ecorank/faults.hpp"
#include "ecorank/synth.hpp"

namespace ecorank {

enum class Mode { Individual, Region };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view text);

struct RunConfig {
  Mode mode = Mode::Individual;
  std::filesystem::path buildings;
  std::filesystem::path energy;
  std::filesystem::path weather;
  std::optional<std::filesystem::path> annual;        // region mode
  std::optional<std::filesystem::path> ground_truth;  // baseline split errors
  std::filesystem::path posterior_dir;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  Sensitivity sensitivity;
  SamplerConfig sampler;
  PriorSpec priors;
  BucketSpec buckets;
  double initial_side_deg = 0.05;
  double grid_cell_m = 100.0;
  std::size_t min_aligned_days = kMinAlignedDays;
  int jobs = 1;  // buildings processed concurrently
};

/// Seed of one building's sampler: the run seed mixed with a hash of the id,
/// so it does not depend on the order or the set of buildings.
std::uint64_t building_seed(std::uint64_t run_seed, const std::string& building_id);

struct FitSummary {
  std::vector<std::string> fitted;       // sorted
  std::vector<std::string> unconverged;  // subset of fitted
  std::vector<std::pair<std::string, std::string>> unfittable;  // id, reason
};

/// Writes <posterior_dir>/<id>.csv and <id>.json per building plus
/// fit_summary.json.
FitSummary run_fit(const RunConfig& config);

struct FlagSummary {
  std::vector<FaultReport> reports;  // sorted by building id
  std::map<std::string, EfficiencyFlags> flags;
  std::vector<PeerGroup> groups;  // individual mode
};

/// Writes reports.json, reports.txt and grid_stats.csv into out_dir, plus
/// dominance_counts.csv and groups.json in individual mode.
FlagSummary run_flag(const RunConfig& config);

struct BaselineRow {
  std::string building_id;
  std::string method;  // ls65, ls_range, bayes
  std::optional<ParamPoint> params;
  std::optional<EnergySplit> split_error;  // percent, per component; total unused
  std::string error;
};

/// Writes baseline.csv into out_dir.
std::vector<BaselineRow> run_baseline(const RunConfig& config);

struct UsageRow {
  std::string building_id;
  std::string source;  // bayes or ls_range
  EnergySplit split;   // kWh over the weather period
  double eui = 0.0;    // kBtu per sq.ft.
};

/// Writes usage.csv into out_dir.
std::vector<UsageRow> run_report(const RunConfig& config);

std::vector<std::filesystem::path> run_synth(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace ecorank
