#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "ecorank/ecdf.hpp"
#include "ecorank/ingest.hpp"
#include "ecorank/thermal_model.hpp"

namespace ecorank {

/// Priors on the change-point model. Gaussian second arguments are standard
/// deviations; the Gaussians are truncated to the nonnegative half-line.
struct PriorSpec {
  double base_mean = 20.0;
  double base_sd = 20.0;
  double gamma_heat_sd = 4.0;
  double gamma_cool_sd = 4.0;
  double t_low = kBalanceMin;
  double t_high = kBalanceMax;
  double sigma_scale = 5.0;  // half-Cauchy
};

void validate(const PriorSpec& priors);

struct SamplerConfig {
  std::optional<std::uint64_t> seed;  // required; there is no entropy default
  int chains = 4;
  int burn_in = 2000;
  int draws = 2000;  // retained per chain
  int adapt_interval = 50;
  double target_accept = 0.44;  // per-coordinate moves
  bool block_moves = true;      // joint proposal from the burn-in covariance
  double rhat_threshold = 1.1;
  int jobs = 1;  // chains run on up to this many threads
};

enum class ModelParam { base, gamma_heat, gamma_cool };

inline constexpr std::array<ModelParam, 3> kModelParams = {ModelParam::base, ModelParam::gamma_heat,
                                                           ModelParam::gamma_cool};

std::string_view to_string(ModelParam p);
std::optional<ModelParam> parse_model_param(std::string_view text);

struct ParamDiagnostics {
  double r_hat = 1.0;
  double ess = 0.0;
};

struct PosteriorSamples {
  using Draw = std::array<double, ParamPoint::kDims>;

  std::vector<Draw> draws;  // chain-major: chain c holds rows [c*per_chain, (c+1)*per_chain)
  int chains = 0;
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::array<ParamDiagnostics, ParamPoint::kDims> diagnostics{};
  std::vector<double> acceptance;  // per chain, coordinate moves after burn-in
  bool converged = true;

  std::size_t per_chain() const { return chains > 0 ? draws.size() / static_cast<std::size_t>(chains) : 0; }
  std::vector<double> column(std::size_t dim) const;
  ParamPoint mean() const;
};

/// Log posterior density up to the truncation constants. Returns -infinity
/// outside the support, including t_heat > t_cool.
double log_posterior(const ParamPoint& p, const AlignedSeries& aligned, const PriorSpec& priors);

/// Analytic gradient of log_posterior in the order of ParamPoint::as_array.
/// Hinge kinks take the one-sided derivative with the inactive side.
std::array<double, ParamPoint::kDims> log_posterior_gradient(const ParamPoint& p, const AlignedSeries& aligned,
                                                             const PriorSpec& priors);

/// Adaptive Metropolis-within-Gibbs. Each chain owns an RNG stream derived from
/// (seed, chain index), so the result does not depend on thread scheduling.
/// A non-converged run is returned with converged == false.
PosteriorSamples sample_posterior(const AlignedSeries& aligned, const PriorSpec& priors,
                                  const SamplerConfig& config);

/// Split R-hat and multi-chain effective sample size per dimension.
std::array<ParamDiagnostics, ParamPoint::kDims> compute_diagnostics(const PosteriorSamples& samples);

ParamECDF ecdf(const PosteriorSamples& samples, ModelParam param, std::size_t min_draws = 1000);

std::pair<double, double> balance_point_means(const PosteriorSamples& samples);

void write_posterior(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                     const PosteriorSamples& samples, const std::string& building_id);
PosteriorSamples read_posterior(const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

}  // namespace ecorank
