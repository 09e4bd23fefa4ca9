#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecorank/bayes_fit.hpp"
#include "ecorank/cohort.hpp"
#include "ecorank/ecdf.hpp"

namespace ecorank {

/// Running integral of G - F from the left end of the merged support.
struct SsdIntegral {
  double min_running = 0.0;  // over every knot and interior turning point
  double total = 0.0;        // equals mean(F) - mean(G)
};

/// Exact for step and piecewise-linear CDFs: the integrand is constant or
/// linear between consecutive merged knots.
SsdIntegral ssd_integral(const ParamECDF& f, const ParamECDF& g);

/// 1e-9 times the range of the merged support.
double default_ssd_epsilon(const ParamECDF& f, const ParamECDF& g);

/// F dominates G in second order when the running integral of G - F never
/// drops below -epsilon and its total exceeds epsilon. The strict total rules
/// out identical distributions.
bool ssd_dominates(const ParamECDF& f, const ParamECDF& g, std::optional<double> epsilon = std::nullopt);

enum class DominanceVerdict { FirstDominates, SecondDominates, Neither };

std::string_view to_string(DominanceVerdict v);

DominanceVerdict verdict(const ParamECDF& f, const ParamECDF& g, std::optional<double> epsilon = std::nullopt);

struct PeerGroup {
  CohortKey key;
  std::vector<std::string> member_ids;  // sorted
  bool discarded = false;               // fewer than min_cohort members
};

std::vector<PeerGroup> make_peer_groups(std::span<const BuildingRecord> buildings, const BucketSpec& buckets);

/// Posterior CDFs of one building, indexed by ModelParam.
using BuildingEcdfs = std::array<ParamECDF, 3>;

inline const ParamECDF& get(const BuildingEcdfs& e, ModelParam p) { return e[static_cast<std::size_t>(p)]; }

struct DominanceCounts {
  std::array<std::map<std::string, int>, 3> wins;  // indexed by ModelParam
  std::size_t group_size = 0;

  int of(ModelParam p, const std::string& id) const;
};

/// All ordered pairs within the group, per parameter. Work is split across
/// `jobs` threads; the counts do not depend on the split.
DominanceCounts dominance_counts(const PeerGroup& group, const std::map<std::string, BuildingEcdfs>& ecdfs,
                                 int jobs = 1);

void write_dominance_counts(const std::filesystem::path& path, std::span<const DominanceCounts> counts);

}  // namespace ecorank
