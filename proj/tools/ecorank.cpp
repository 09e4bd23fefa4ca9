// Command-line front end: synth, fit, baseline, flag, report.
//
// Exit codes: 0 ok, 2 input error, 3 convergence failure under --strict,
// 4 insufficient cohort. Errors go to stderr as one JSON object.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ecorank/errors.hpp"
#include "ecorank/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ecorank;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitCohort = 4;

int report_error(std::string_view code, const std::string& message, int exit_code) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}, {"exit_code", exit_code}}.dump() << std::endl;
  return exit_code;
}

struct Inputs {
  std::string data_dir;
  std::string buildings, energy, weather, annual, ground_truth;
  std::string posteriors;
  std::string out;

  // Unset paths fall back to the standard file names inside --data.
  void resolve(RunConfig& c) const {
    auto pick = [&](const std::string& explicit_path, const char* name) -> fs::path {
      if (!explicit_path.empty()) return explicit_path;
      if (!data_dir.empty()) return fs::path(data_dir) / name;
      return {};
    };
    c.buildings = pick(buildings, "buildings.csv");
    c.energy = pick(energy, "energy.csv");
    c.weather = pick(weather, "weather.csv");
    if (auto a = pick(annual, "annual.csv"); !a.empty() && (!annual.empty() || fs::exists(a))) c.annual = a;
    if (auto g = pick(ground_truth, "ground_truth.json"); !g.empty() && (!ground_truth.empty() || fs::exists(g))) {
      c.ground_truth = g;
    }
    c.posterior_dir = posteriors;
    c.out_dir = out;
  }
};

void add_inputs(CLI::App* cmd, Inputs& in, bool needs_energy) {
  cmd->add_option("--data", in.data_dir, "Directory holding buildings.csv, energy.csv, weather.csv, annual.csv");
  cmd->add_option("--buildings", in.buildings, "Building metadata CSV");
  if (needs_energy) cmd->add_option("--energy", in.energy, "Daily energy CSV");
  cmd->add_option("--weather", in.weather, "Daily weather CSV");
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::MissingFile, std::string("no ") + what + " path given");
  if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, p.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian degree-day fitting, peer ranking and fault reports for building energy data"};
  app.set_config("--config", "", "TOML file with option defaults; command-line flags take precedence");
  app.require_subcommand(1);

  Inputs in;
  RunConfig cfg;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::string mode = "individual";
  std::string spec_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  synth->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required();
  synth->add_option("--out", in.out, "Output directory")->required();
  synth->add_option("--seed", seed, "Override the spec seed");

  auto* fit = app.add_subcommand("fit", "Sample per-building posteriors");
  add_inputs(fit, in, true);
  fit->add_option("--posteriors", in.posteriors, "Output directory for posterior files")->required();
  fit->add_option("--seed", seed, "Run seed (required)")->required();
  fit->add_option("--chains", cfg.sampler.chains, "Chains per building")->capture_default_str();
  fit->add_option("--burn-in", cfg.sampler.burn_in, "Burn-in iterations per chain")->capture_default_str();
  fit->add_option("--draws", cfg.sampler.draws, "Retained draws per chain")->capture_default_str();
  fit->add_option("--min-days", cfg.min_aligned_days, "Minimum aligned days per building")->capture_default_str();
  fit->add_option("--jobs", cfg.jobs, "Buildings fit concurrently")->capture_default_str();
  fit->add_flag("--strict", strict, "Exit 3 when any building fails to converge");

  auto* baseline = app.add_subcommand("baseline", "Least-squares baselines and split errors");
  add_inputs(baseline, in, true);
  baseline->add_option("--ground-truth", in.ground_truth, "ground_truth.json for split errors");
  baseline->add_option("--posteriors", in.posteriors, "Posterior directory; adds the Bayesian row when present");
  baseline->add_option("--out", in.out, "Output directory")->required();
  baseline->add_option("--jobs", cfg.jobs, "Buildings processed concurrently")->capture_default_str();

  auto* flag = app.add_subcommand("flag", "Rank buildings and report probable faults");
  add_inputs(flag, in, false);
  flag->add_option("--annual", in.annual, "Annual records CSV (region mode)");
  flag->add_option("--posteriors", in.posteriors, "Posterior directory")->required();
  flag->add_option("--out", in.out, "Output directory")->required();
  flag->add_option("--mode", mode, "individual or region")
      ->check(CLI::IsMember({"individual", "region"}))
      ->capture_default_str();
  flag->add_option("--tau", cfg.sensitivity.tau, "Dominance fraction for a flag")->capture_default_str();
  flag->add_option("--t-heat-threshold", cfg.sensitivity.t_heat_threshold, "Heating balance point threshold, F")
      ->capture_default_str();
  flag->add_option("--t-cool-threshold", cfg.sensitivity.t_cool_threshold, "Cooling balance point threshold, F")
      ->capture_default_str();
  flag->add_option("--min-cohort", cfg.buckets.min_cohort, "Minimum peer group size")->capture_default_str();
  flag->add_option("--year-bucket", cfg.buckets.year_width, "Year-built bucket width")->capture_default_str();
  flag->add_option("--area-bucket", cfg.buckets.area_width, "Floor area bucket width, sq.ft.")->capture_default_str();
  flag->add_option("--initial-side", cfg.initial_side_deg, "Initial region search box side, degrees")
      ->capture_default_str();
  flag->add_option("--cell", cfg.grid_cell_m, "Grid cell size, meters")->capture_default_str();
  flag->add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();

  auto* report = app.add_subcommand("report", "Energy split and EUI per building");
  add_inputs(report, in, true);
  report->add_option("--posteriors", in.posteriors, "Posterior directory; falls back to LS-Range without it");
  report->add_option("--out", in.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("BadArguments", e.what(), kExitInput);
  }

  try {
    in.resolve(cfg);
    cfg.seed = seed;
    if (*synth) {
      auto spec = read_synth_spec(spec_path);
      if (seed) spec.seed = *seed;
      for (const auto& p : run_synth(spec, in.out)) std::cout << p.string() << '\n';
      return kExitOk;
    }
    if (*fit) {
      require(cfg.buildings, "buildings");
      require(cfg.energy, "energy");
      require(cfg.weather, "weather");
      const auto summary = run_fit(cfg);
      std::cout << nlohmann::json{{"fitted", summary.fitted.size()},
                                  {"unconverged", summary.unconverged},
                                  {"unfittable", summary.unfittable.size()}}
                       .dump()
                << '\n';
      if (strict && !summary.unconverged.empty()) {
        std::string ids;
        for (const auto& id : summary.unconverged) ids += (ids.empty() ? "" : " ") + id;
        return report_error(to_string(ErrorCode::NonConvergence), ids, kExitConvergence);
      }
      return kExitOk;
    }
    if (*baseline) {
      require(cfg.buildings, "buildings");
      require(cfg.energy, "energy");
      require(cfg.weather, "weather");
      const auto rows = run_baseline(cfg);
      std::cout << nlohmann::json{{"rows", rows.size()}}.dump() << '\n';
      return kExitOk;
    }
    if (*flag) {
      cfg.mode = *parse_mode(mode);
      require(cfg.buildings, "buildings");
      if (cfg.mode == Mode::Region) {
        require(cfg.weather, "weather");
        if (!cfg.annual) throw Error(ErrorCode::MissingFile, "region mode needs --annual");
        require(*cfg.annual, "annual");
      }
      const auto summary = run_flag(cfg);
      std::size_t flagged = 0;
      for (const auto& [id, f] : summary.flags) flagged += f.any() ? 1 : 0;
      std::cout << nlohmann::json{{"evaluated", summary.flags.size()}, {"flagged", flagged}}.dump() << '\n';
      return kExitOk;
    }
    if (*report) {
      require(cfg.buildings, "buildings");
      require(cfg.energy, "energy");
      require(cfg.weather, "weather");
      const auto rows = run_report(cfg);
      std::cout << nlohmann::json{{"buildings", rows.size()}}.dump() << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::InsufficientCohort ? kExitCohort : kExitInput;
    return report_error(to_string(e.code()), e.what(), code);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return kExitOk;
}
