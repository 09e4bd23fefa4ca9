#include "ecorank/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"
#include "ecorank/region.hpp"

namespace ecorank {

std::string_view to_string(Mode m) { return m == Mode::Region ? "region" : "individual"; }

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "individual") return Mode::Individual;
  if (text == "region") return Mode::Region;
  return std::nullopt;
}

std::uint64_t building_seed(std::uint64_t run_seed, const std::string& building_id) {
  // FNV-1a over the id, then a splitmix64 finalizer over the combination
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : building_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = run_seed ^ (h + 0x9e3779b97f4a7c15ull + (run_seed << 6) + (run_seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception in
// index order is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::map<std::string, BuildingRecord> index_buildings(const std::vector<BuildingRecord>& buildings) {
  std::map<std::string, BuildingRecord> out;
  for (const auto& b : buildings) out.emplace(b.id, b);
  return out;
}

std::filesystem::path posterior_csv(const RunConfig& c, const std::string& id) { return c.posterior_dir / (id + ".csv"); }
std::filesystem::path posterior_json(const RunConfig& c, const std::string& id) {
  return c.posterior_dir / (id + ".json");
}

std::string opt_format(double v) { return std::isfinite(v) ? csv::format(v) : std::string(); }

nlohmann::json read_json(const std::filesystem::path& path, ErrorCode missing) {
  std::ifstream in(path);
  if (!in) throw Error(missing, path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadValue, path.string() + ": " + e.what());
  }
}

// Fitted building ids from the fit summary when present, else every building.
std::vector<std::string> fitted_ids(const RunConfig& c, const std::vector<BuildingRecord>& buildings) {
  const auto summary = c.posterior_dir / "fit_summary.json";
  std::vector<std::string> ids;
  if (std::filesystem::exists(summary)) {
    ids = read_json(summary, ErrorCode::MissingPosterior).at("fitted").get<std::vector<std::string>>();
  } else {
    for (const auto& b : buildings) ids.push_back(b.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

AlignedSeries prepared_series(const DailySeries& series, const WeatherSeries& weather, const BuildingRecord& b,
                              std::size_t min_days) {
  auto aligned = align(series, weather);
  if (!meets_coverage(aligned, min_days)) {
    throw Error(ErrorCode::Unfittable, b.id + ": " + std::to_string(aligned.size()) + " aligned days, need " +
                                           std::to_string(min_days));
  }
  return normalize_by_area(aligned, b);
}

}  // namespace

FitSummary run_fit(const RunConfig& config) {
  if (!config.seed) throw Error(ErrorCode::BadSpec, "a seed is required for fitting");
  validate(config.priors);
  const auto buildings = load_buildings(config.buildings);
  const auto energy = load_energy(config.energy);
  const auto weather = load_weather(config.weather);
  const auto by_id = index_buildings(buildings);
  for (const auto& [id, s] : energy) {
    if (!by_id.count(id)) throw Error(ErrorCode::IdMismatch, id + " has energy data but no building record");
  }
  std::filesystem::create_directories(config.posterior_dir);

  struct Outcome {
    bool fitted = false;
    bool converged = true;
    std::string reason;
  };
  std::vector<const BuildingRecord*> order;
  for (const auto& b : buildings) order.push_back(&by_id.at(b.id));
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  order.erase(std::unique(order.begin(), order.end(), [](auto* a, auto* b) { return a->id == b->id; }), order.end());
  std::vector<Outcome> outcomes(order.size());

  parallel_for(order.size(), config.jobs, [&](std::size_t i) {
    const auto& b = *order[i];
    auto it = energy.find(b.id);
    if (it == energy.end()) {
      outcomes[i].reason = "no energy data";
      return;
    }
    try {
      const auto aligned = prepared_series(it->second, weather, b, config.min_aligned_days);
      SamplerConfig sc = config.sampler;
      sc.seed = building_seed(*config.seed, b.id);
      sc.jobs = 1;
      const auto samples = sample_posterior(aligned, config.priors, sc);
      write_posterior(posterior_csv(config, b.id), posterior_json(config, b.id), samples, b.id);
      outcomes[i].fitted = true;
      outcomes[i].converged = samples.converged;
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::NoOverlap:
        case ErrorCode::Unfittable:
        case ErrorCode::DegenerateDesign:
        case ErrorCode::ZeroArea: outcomes[i].reason = e.what(); break;
        default: throw;
      }
    }
  });

  FitSummary summary;
  nlohmann::json unfit = nlohmann::json::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& id = order[i]->id;
    if (outcomes[i].fitted) {
      summary.fitted.push_back(id);
      if (!outcomes[i].converged) summary.unconverged.push_back(id);
    } else {
      summary.unfittable.emplace_back(id, outcomes[i].reason);
      unfit.push_back({{"building_id", id}, {"reason", outcomes[i].reason}});
    }
  }
  nlohmann::json j{{"seed", *config.seed},
                   {"fitted", summary.fitted},
                   {"unconverged", summary.unconverged},
                   {"unfittable", unfit}};
  csv::write_atomic(config.posterior_dir / "fit_summary.json", j.dump(2) + "\n");
  return summary;
}

namespace {

struct LoadedPosterior {
  BuildingEcdfs ecdfs;
  double t_heat_mean = 0.0;
  double t_cool_mean = 0.0;
};

std::map<std::string, LoadedPosterior> load_posteriors(const RunConfig& c, const std::vector<std::string>& ids) {
  std::vector<LoadedPosterior> loaded(ids.size());
  parallel_for(ids.size(), c.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    if (!std::filesystem::exists(posterior_csv(c, id)) || !std::filesystem::exists(posterior_json(c, id))) {
      throw Error(ErrorCode::MissingPosterior, id);
    }
    const auto s = read_posterior(posterior_csv(c, id), posterior_json(c, id));
    for (auto p : kModelParams) loaded[i].ecdfs[static_cast<std::size_t>(p)] = ecdf(s, p);
    std::tie(loaded[i].t_heat_mean, loaded[i].t_cool_mean) = balance_point_means(s);
  });
  std::map<std::string, LoadedPosterior> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::move(loaded[i]));
  return out;
}

}  // namespace

FlagSummary run_flag(const RunConfig& config) {
  validate(config.sensitivity);
  const auto buildings = load_buildings(config.buildings);
  const auto by_id = index_buildings(buildings);
  const auto ids = fitted_ids(config, buildings);
  std::vector<BuildingRecord> evaluated;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::IdMismatch, id + " has a posterior but no building record");
    evaluated.push_back(it->second);
  }
  const auto posteriors = load_posteriors(config, ids);
  std::filesystem::create_directories(config.out_dir);

  FlagSummary out;
  std::map<std::string, Evidence> evidence;

  if (config.mode == Mode::Individual) {
    out.groups = make_peer_groups(evaluated, config.buckets);
    std::map<std::string, BuildingEcdfs> ecdfs;
    BalancePointMeans bp;
    for (const auto& [id, p] : posteriors) {
      ecdfs.emplace(id, p.ecdfs);
      bp.emplace(id, std::make_pair(p.t_heat_mean, p.t_cool_mean));
    }
    std::vector<DominanceCounts> all_counts;
    nlohmann::json groups_json = nlohmann::json::array();
    for (const auto& g : out.groups) {
      groups_json.push_back({{"key", g.key.label(config.buckets)},
                             {"members", g.member_ids},
                             {"discarded", g.discarded}});
      if (g.discarded) continue;
      auto counts = dominance_counts(g, ecdfs, config.jobs);
      const auto flags = flag_cohort(g, counts, bp, config.sensitivity);
      const int threshold = wins_threshold(g.member_ids.size(), config.sensitivity.tau);
      for (const auto& [id, f] : flags) {
        out.flags[id] = f;
        Evidence e;
        e.mode = "individual";
        for (auto p : kModelParams) e.wins[static_cast<std::size_t>(p)] = counts.of(p, id);
        e.group_size = g.member_ids.size();
        e.threshold = threshold;
        std::tie(e.t_heat_mean, e.t_cool_mean) = bp.at(id);
        evidence[id] = e;
      }
      all_counts.push_back(std::move(counts));
    }
    write_dominance_counts(config.out_dir / "dominance_counts.csv", all_counts);
    csv::write_atomic(config.out_dir / "groups.json", groups_json.dump(2) + "\n");
  } else {
    if (!config.annual) throw Error(ErrorCode::BadSpec, "region mode needs annual records");
    const auto weather = load_weather(config.weather);
    std::map<std::string, AnnualRecord> annuals;
    for (auto& a : load_annual(*config.annual)) annuals.emplace(a.building_id, a);
    const auto index = spatial_index(buildings);
    std::map<std::vector<std::string>, RegionDistribution> cache;
    for (const auto& b : evaluated) {
      RegionQuery q;
      q.location = *b.location;
      q.attributes = cohort_key(b, config.buckets);
      q.buckets = config.buckets;
      q.min_cohort = config.buckets.min_cohort;
      q.initial_side_deg = config.initial_side_deg;
      const auto search = expanding_cohort(index, q);
      std::vector<std::string> key;
      for (const auto& m : search.members) key.push_back(m.id);
      std::sort(key.begin(), key.end());
      auto it = cache.find(key);
      if (it == cache.end()) {
        it = cache.emplace(key, region_distribution(search.members, annuals, weather, config.buckets.min_cohort)).first;
      }
      const auto& post = posteriors.at(b.id);
      const RegionCandidate cand{post.ecdfs, post.t_heat_mean, post.t_cool_mean};
      const auto f = flag_region(cand, it->second, config.sensitivity);
      out.flags[b.id] = f;
      Evidence e;
      e.mode = "region";
      for (auto p : kModelParams) e.dominates_region[static_cast<std::size_t>(p)] = f.flag(p);
      e.region_size = it->second.member_ids.size();
      e.t_heat_mean = post.t_heat_mean;
      e.t_cool_mean = post.t_cool_mean;
      evidence[b.id] = e;
    }
  }

  for (const auto& [id, f] : out.flags) {
    auto r = root_cause(id, f);
    r.evidence = evidence.at(id);
    out.reports.push_back(std::move(r));
  }
  write_reports(config.out_dir / "reports.json", config.out_dir / "reports.txt", out.reports);

  std::vector<BuildingRecord> located;
  for (const auto& b : evaluated) {
    if (out.flags.count(b.id)) located.push_back(b);
  }
  const bool all_located = std::all_of(located.begin(), located.end(), [](const auto& b) { return b.location.has_value(); });
  if (all_located) write_grid_stats(config.out_dir / "grid_stats.csv", grid_aggregate(located, out.flags, config.grid_cell_m));
  return out;
}

std::vector<BaselineRow> run_baseline(const RunConfig& config) {
  const auto buildings = load_buildings(config.buildings);
  const auto energy = load_energy(config.energy);
  const auto weather = load_weather(config.weather);
  const auto by_id = index_buildings(buildings);
  std::optional<GroundTruth> truth;
  if (config.ground_truth) truth = read_ground_truth(*config.ground_truth);

  std::vector<std::string> ids;
  for (const auto& [id, b] : by_id) {
    if (energy.count(id)) ids.push_back(id);
  }
  std::vector<std::vector<BaselineRow>> per_building(ids.size());
  parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
    const auto& b = by_id.at(ids[i]);
    auto& rows = per_building[i];
    AlignedSeries aligned;
    try {
      aligned = normalize_by_area(align(energy.at(b.id), weather), b);
    } catch (const Error& e) {
      rows.push_back({b.id, "ls65", std::nullopt, std::nullopt, e.what()});
      return;
    }
    const HomeTruth* t = truth ? truth->find(b.id) : nullptr;
    auto add = [&](const std::string& method, const std::function<ParamPoint()>& fit) {
      BaselineRow row{b.id, method, std::nullopt, std::nullopt, ""};
      try {
        row.params = fit();
        if (t) {
          const auto est = energy_split(*row.params, aligned.temperature);
          const auto ref = energy_split(t->params, aligned.temperature);
          row.split_error = EnergySplit{percent_error(est.heating, ref.heating), percent_error(est.cooling, ref.cooling),
                                        percent_error(est.baseload, ref.baseload),
                                        percent_error(est.total, ref.total)};
        }
      } catch (const Error& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    };
    add("ls65", [&] { return fit_ls_65(aligned); });
    add("ls_range", [&] { return fit_ls_range(aligned); });
    if (!config.posterior_dir.empty() && std::filesystem::exists(posterior_csv(config, b.id))) {
      add("bayes", [&] { return read_posterior(posterior_csv(config, b.id), posterior_json(config, b.id)).mean(); });
    }
  });

  std::vector<BaselineRow> out;
  for (auto& rows : per_building) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  std::ostringstream os;
  os << "building_id,method,base,gamma_heat,gamma_cool,t_heat,t_cool,sigma,heating_err_pct,cooling_err_pct,"
        "baseload_err_pct,error\n";
  for (const auto& r : out) {
    os << r.building_id << ',' << r.method;
    if (r.params) {
      for (double v : r.params->as_array()) os << ',' << opt_format(v);
    } else {
      os << ",,,,,,";
    }
    if (r.split_error) {
      os << ',' << opt_format(r.split_error->heating) << ',' << opt_format(r.split_error->cooling) << ','
         << opt_format(r.split_error->baseload);
    } else {
      os << ",,,";
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << ',' << err << '\n';
  }
  std::filesystem::create_directories(config.out_dir);
  csv::write_atomic(config.out_dir / "baseline.csv", os.str());
  return out;
}

std::vector<UsageRow> run_report(const RunConfig& config) {
  const auto buildings = load_buildings(config.buildings);
  const auto energy = load_energy(config.energy);
  const auto weather = load_weather(config.weather);
  const auto by_id = index_buildings(buildings);
  std::vector<UsageRow> out;
  for (const auto& [id, b] : by_id) {
    auto it = energy.find(id);
    if (it == energy.end()) continue;
    const auto aligned = normalize_by_area(align(it->second, weather), b);
    UsageRow row;
    row.building_id = id;
    ParamPoint p;
    if (!config.posterior_dir.empty() && std::filesystem::exists(posterior_csv(config, id))) {
      p = read_posterior(posterior_csv(config, id), posterior_json(config, id)).mean();
      row.source = "bayes";
    } else {
      p = fit_ls_range(aligned);
      row.source = "ls_range";
    }
    const auto per_sqft = energy_split(p, aligned.temperature);
    row.split = {per_sqft.heating * b.floor_area, per_sqft.cooling * b.floor_area, per_sqft.baseload * b.floor_area,
                 per_sqft.total * b.floor_area};
    row.eui = eui_kbtu_per_sqft(row.split, b.floor_area);
    out.push_back(row);
  }
  std::ostringstream os;
  os << "building_id,source,heating_kwh,cooling_kwh,baseload_kwh,total_kwh,eui_kbtu_per_sqft\n";
  for (const auto& r : out) {
    os << r.building_id << ',' << r.source << ',' << csv::format(r.split.heating) << ',' << csv::format(r.split.cooling)
       << ',' << csv::format(r.split.baseload) << ',' << csv::format(r.split.total) << ',' << csv::format(r.eui) << '\n';
  }
  std::filesystem::create_directories(config.out_dir);
  csv::write_atomic(config.out_dir / "usage.csv", os.str());
  return out;
}

std::vector<std::filesystem::path> run_synth(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  return write_dataset(out_dir, generate(spec), spec.emit_annual);
}

}  // namespace ecorank
