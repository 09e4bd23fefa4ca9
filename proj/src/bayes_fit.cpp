#include "ecorank/bayes_fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_prior(const ParamPoint& p, const PriorSpec& pr) {
  if (!(p.base >= 0.0 && p.gamma_heat >= 0.0 && p.gamma_cool >= 0.0)) return kNegInf;
  if (!(p.t_heat >= pr.t_low && p.t_cool <= pr.t_high && p.t_heat <= p.t_cool)) return kNegInf;
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) return kNegInf;
  auto normal = [](double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
  };
  double lp = normal(p.base, pr.base_mean, pr.base_sd);
  lp += normal(p.gamma_heat, 0.0, pr.gamma_heat_sd);
  lp += normal(p.gamma_cool, 0.0, pr.gamma_cool_sd);
  lp -= 2.0 * std::log(pr.t_high - pr.t_low);
  const double u = p.sigma / pr.sigma_scale;
  lp += std::log(2.0 / (std::numbers::pi * pr.sigma_scale)) - std::log1p(u * u);
  return lp;
}

double log_likelihood(const ParamPoint& p, const AlignedSeries& a) {
  const double n = static_cast<double>(a.size());
  const double inv2s2 = 0.5 / (p.sigma * p.sigma);
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double r = a.energy[k] - predict_day(p, a.temperature[k]);
    ss += r * r;
  }
  return -n * (kLogSqrt2Pi + std::log(p.sigma)) - ss * inv2s2;
}

// Splittable seed for one chain: the same (seed, chain) pair always yields
// the same stream.
std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x6a09e667u};
  return std::mt19937_64(seq);
}

using Vec = std::array<double, ParamPoint::kDims>;
using Mat = std::array<Vec, ParamPoint::kDims>;

bool cholesky(const Mat& a, Mat& l) {
  constexpr auto d = ParamPoint::kDims;
  l = Mat{};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return true;
}

ParamPoint fallback_start(const AlignedSeries& a) {
  double mean = 0.0, var = 0.0;
  for (double y : a.energy) mean += y;
  if (a.size() > 0) mean /= static_cast<double>(a.size());
  for (double y : a.energy) var += (y - mean) * (y - mean);
  if (a.size() > 1) var /= static_cast<double>(a.size() - 1);
  const double scale = a.size() > 0 ? std::max(std::abs(mean), 1e-6) : 20.0;
  ParamPoint p;
  p.base = scale;
  p.gamma_heat = 0.05 * scale;
  p.gamma_cool = 0.05 * scale;
  p.t_heat = 55.0;
  p.t_cool = 75.0;
  p.sigma = var > 0.0 ? std::sqrt(var) : 0.1 * scale;
  return p;
}

struct ChainResult {
  std::vector<PosteriorSamples::Draw> draws;
  double acceptance = 0.0;
};

class ChainRunner {
 public:
  ChainRunner(const AlignedSeries& a, const PriorSpec& priors, const SamplerConfig& cfg, const ParamPoint& anchor,
              double data_scale)
      : a_(a), priors_(priors), cfg_(cfg), anchor_(anchor), scale_(data_scale) {}

  ChainResult run(int chain) const {
    auto rng = chain_rng(*cfg_.seed, chain);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vec theta = initial_point(rng);
    double lp = log_posterior(ParamPoint::from_array(theta), a_, priors_);
    // Dispersed starts can land on an infeasible corner; walk back to the anchor.
    for (int tries = 0; !std::isfinite(lp) && tries < 50; ++tries) {
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = 0.5 * (theta[k] + anchor_.as_array()[k]);
      lp = log_posterior(ParamPoint::from_array(theta), a_, priors_);
    }
    if (!std::isfinite(lp)) {
      theta = anchor_.as_array();
      lp = log_posterior(anchor_, a_, priors_);
    }

    Vec step = initial_steps(theta);
    Vec accepted{}, proposed{};
    double block_scale = 2.38 * 2.38 / static_cast<double>(ParamPoint::kDims);
    double block_log_scale = std::log(block_scale);
    int block_acc = 0, block_prop = 0;
    Mat chol{};
    bool have_block = false;

    // Running moments over the second half of burn-in for the block proposal.
    Vec mean{};
    Mat cov{};
    long moments_n = 0;

    ChainResult out;
    out.draws.reserve(static_cast<std::size_t>(cfg_.draws));
    long kept_acc = 0, kept_prop = 0;
    int batch = 0;
    const int total = cfg_.burn_in + cfg_.draws;

    for (int it = 0; it < total; ++it) {
      const bool burning = it < cfg_.burn_in;
      for (std::size_t k = 0; k < ParamPoint::kDims; ++k) {
        Vec cand = theta;
        cand[k] += step[k] * normal(rng);
        const double lp_c = log_posterior(ParamPoint::from_array(cand), a_, priors_);
        const bool ok = std::isfinite(lp_c) && std::log(unif(rng)) < lp_c - lp;
        if (ok) {
          theta = cand;
          lp = lp_c;
        }
        if (burning) {
          accepted[k] += ok;
          proposed[k] += 1;
        } else {
          kept_acc += ok;
          ++kept_prop;
        }
      }

      if (cfg_.block_moves && have_block) {
        Vec z{}, cand = theta;
        for (auto& v : z) v = normal(rng);
        const double s = std::sqrt(block_scale);
        for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += chol[i][j] * z[j];
          cand[i] += s * acc;
        }
        const double lp_c = log_posterior(ParamPoint::from_array(cand), a_, priors_);
        const bool ok = std::isfinite(lp_c) && std::log(unif(rng)) < lp_c - lp;
        if (ok) {
          theta = cand;
          lp = lp_c;
        }
        if (burning) {
          block_acc += ok;
          ++block_prop;
        }
      }

      if (burning) {
        if (it >= cfg_.burn_in / 2) {
          ++moments_n;
          Vec delta{};
          for (std::size_t i = 0; i < theta.size(); ++i) {
            delta[i] = theta[i] - mean[i];
            mean[i] += delta[i] / static_cast<double>(moments_n);
          }
          for (std::size_t i = 0; i < theta.size(); ++i) {
            for (std::size_t j = 0; j < theta.size(); ++j) cov[i][j] += delta[i] * (theta[j] - mean[j]);
          }
        }
        if ((it + 1) % cfg_.adapt_interval == 0) {
          ++batch;
          const double delta = std::min(0.5, 2.0 / std::sqrt(static_cast<double>(batch)));
          for (std::size_t k = 0; k < step.size(); ++k) {
            const double rate = accepted[k] / std::max(1.0, proposed[k]);
            step[k] *= std::exp(rate > cfg_.target_accept ? delta : -delta);
            accepted[k] = proposed[k] = 0;
          }
          if (have_block && block_prop > 0) {
            const double rate = static_cast<double>(block_acc) / block_prop;
            block_log_scale += rate > 0.234 ? delta : -delta;
            block_scale = std::exp(block_log_scale);
            block_acc = block_prop = 0;
          }
          if (cfg_.block_moves && moments_n > 100) {
            Mat c{};
            for (std::size_t i = 0; i < theta.size(); ++i) {
              for (std::size_t j = 0; j < theta.size(); ++j) c[i][j] = cov[i][j] / static_cast<double>(moments_n - 1);
              c[i][i] += 1e-10 * (1.0 + c[i][i]);
            }
            Mat l{};
            if (cholesky(c, l)) {
              chol = l;
              have_block = true;
            }
          }
        }
      } else {
        out.draws.push_back(theta);
      }
    }
    out.acceptance = kept_prop > 0 ? static_cast<double>(kept_acc) / static_cast<double>(kept_prop) : 0.0;
    return out;
  }

 private:
  Vec initial_point(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    ParamPoint p = anchor_;
    p.base *= 1.0 + 0.1 * jitter(rng);
    p.gamma_heat *= 1.0 + 0.1 * jitter(rng);
    p.gamma_cool *= 1.0 + 0.1 * jitter(rng);
    p.t_heat += 3.0 * jitter(rng);
    p.t_cool += 3.0 * jitter(rng);
    p.sigma *= 1.0 + 0.1 * jitter(rng);
    p.t_heat = std::clamp(p.t_heat, priors_.t_low, priors_.t_high);
    p.t_cool = std::clamp(p.t_cool, priors_.t_low, priors_.t_high);
    if (p.t_heat > p.t_cool) std::swap(p.t_heat, p.t_cool);
    return p.as_array();
  }

  Vec initial_steps(const Vec& theta) const {
    const double floor = 1e-3 * scale_;
    return {0.05 * std::max(theta[0], 10 * floor), 0.05 * std::max(theta[1], floor),
            0.05 * std::max(theta[2], floor),       1.0,
            1.0,                                     0.05 * std::max(theta[5], floor)};
  }

  const AlignedSeries& a_;
  const PriorSpec& priors_;
  const SamplerConfig& cfg_;
  ParamPoint anchor_;
  double scale_;
};

double variance(const std::vector<double>& x, double mean) {
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return x.size() > 1 ? s / static_cast<double>(x.size() - 1) : 0.0;
}

}  // namespace

void validate(const PriorSpec& pr) {
  for (double s : {pr.base_sd, pr.gamma_heat_sd, pr.gamma_cool_sd, pr.sigma_scale}) {
    if (!(s > 0.0)) throw Error(ErrorCode::BadSpec, "prior scales must be > 0");
  }
  if (!(pr.t_low < pr.t_high)) throw Error(ErrorCode::BadSpec, "balance-point prior range is empty");
}

std::string_view to_string(ModelParam p) {
  switch (p) {
    case ModelParam::base: return "base";
    case ModelParam::gamma_heat: return "gamma_heat";
    case ModelParam::gamma_cool: return "gamma_cool";
  }
  return "base";
}

std::optional<ModelParam> parse_model_param(std::string_view text) {
  for (auto p : kModelParams) {
    if (text == to_string(p)) return p;
  }
  return std::nullopt;
}

std::vector<double> PosteriorSamples::column(std::size_t dim) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d[dim]);
  return out;
}

ParamPoint PosteriorSamples::mean() const {
  Draw m{};
  for (const auto& d : draws) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += d[i];
  }
  for (auto& v : m) v /= static_cast<double>(std::max<std::size_t>(1, draws.size()));
  return ParamPoint::from_array(m);
}

double log_posterior(const ParamPoint& p, const AlignedSeries& aligned, const PriorSpec& priors) {
  const double lp = log_prior(p, priors);
  if (!std::isfinite(lp)) return kNegInf;
  return lp + log_likelihood(p, aligned);
}

std::array<double, ParamPoint::kDims> log_posterior_gradient(const ParamPoint& p, const AlignedSeries& a,
                                                             const PriorSpec& pr) {
  std::array<double, ParamPoint::kDims> g{};
  const double s2 = p.sigma * p.sigma;
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a.temperature[k];
    const double r = a.energy[k] - predict_day(p, t);
    ss += r * r;
    const double w = r / s2;
    g[0] += w;
    g[1] += w * hinge(p.t_heat - t);
    g[2] += w * hinge(t - p.t_cool);
    if (t < p.t_heat) g[3] += w * p.gamma_heat;
    if (t > p.t_cool) g[4] -= w * p.gamma_cool;
  }
  g[5] = -static_cast<double>(a.size()) / p.sigma + ss / (s2 * p.sigma);

  g[0] -= (p.base - pr.base_mean) / (pr.base_sd * pr.base_sd);
  g[1] -= p.gamma_heat / (pr.gamma_heat_sd * pr.gamma_heat_sd);
  g[2] -= p.gamma_cool / (pr.gamma_cool_sd * pr.gamma_cool_sd);
  g[5] -= 2.0 * p.sigma / (pr.sigma_scale * pr.sigma_scale + s2);
  return g;
}

PosteriorSamples sample_posterior(const AlignedSeries& aligned, const PriorSpec& priors,
                                  const SamplerConfig& config) {
  if (!config.seed) throw Error(ErrorCode::BadSpec, "sampler seed is required");
  if (config.chains < 2) throw Error(ErrorCode::BadSpec, "at least 2 chains are required");
  if (config.draws < 1 || config.burn_in < 0 || config.adapt_interval < 1) {
    throw Error(ErrorCode::BadSpec, "invalid sampler iteration counts");
  }
  validate(priors);

  ParamPoint anchor = fallback_start(aligned);
  double scale = anchor.base;
  try {
    auto ls = fit_ls_range(aligned);
    ls.t_heat = std::clamp(ls.t_heat, priors.t_low, priors.t_high);
    ls.t_cool = std::clamp(ls.t_cool, priors.t_low, priors.t_high);
    // Boundary sentinels carry no information; start such slopes off zero.
    if (ls.gamma_heat == 0.0) ls.t_heat = std::min(ls.t_cool, 55.0);
    if (ls.gamma_cool == 0.0) ls.t_cool = std::max(ls.t_heat, 75.0);
    ls.gamma_heat = std::max(ls.gamma_heat, 1e-3 * scale);
    ls.gamma_cool = std::max(ls.gamma_cool, 1e-3 * scale);
    ls.base = std::max(ls.base, 1e-3 * scale);
    ls.sigma = std::max(ls.sigma, 1e-3 * scale);
    anchor = ls;
  } catch (const Error&) {
    // short or flat series: sample from the generic start
  }

  ChainRunner runner(aligned, priors, config, anchor, scale);
  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  const int jobs = std::clamp(config.jobs, 1, config.chains);
  if (jobs == 1) {
    for (int c = 0; c < config.chains; ++c) results[c] = runner.run(c);
  } else {
    std::vector<std::jthread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (int c = w; c < config.chains; c += jobs) results[c] = runner.run(c);
      });
    }
  }

  PosteriorSamples out;
  out.chains = config.chains;
  out.burn_in = config.burn_in;
  out.seed = *config.seed;
  for (auto& r : results) {
    out.draws.insert(out.draws.end(), r.draws.begin(), r.draws.end());
    out.acceptance.push_back(r.acceptance);
  }
  out.diagnostics = compute_diagnostics(out);
  out.converged = std::all_of(out.diagnostics.begin(), out.diagnostics.end(),
                              [&](const ParamDiagnostics& d) { return d.r_hat <= config.rhat_threshold; });
  return out;
}

std::array<ParamDiagnostics, ParamPoint::kDims> compute_diagnostics(const PosteriorSamples& samples) {
  std::array<ParamDiagnostics, ParamPoint::kDims> out{};
  const std::size_t n_full = samples.per_chain();
  const std::size_t half = n_full / 2;
  if (samples.chains < 1 || half < 2) return out;
  const std::size_t m = static_cast<std::size_t>(samples.chains) * 2;

  for (std::size_t dim = 0; dim < ParamPoint::kDims; ++dim) {
    // Split each chain in two so within-chain drift shows up as disagreement.
    std::vector<std::vector<double>> parts(m);
    for (std::size_t c = 0; c < static_cast<std::size_t>(samples.chains); ++c) {
      for (std::size_t i = 0; i < 2 * half; ++i) parts[2 * c + i / half].push_back(samples.draws[c * n_full + i][dim]);
    }
    std::vector<double> means(m), vars(m);
    double grand = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (double v : parts[j]) s += v;
      means[j] = s / static_cast<double>(half);
      vars[j] = variance(parts[j], means[j]);
      grand += means[j];
    }
    grand /= static_cast<double>(m);
    double w = 0.0, b = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      w += vars[j];
      b += (means[j] - grand) * (means[j] - grand);
    }
    w /= static_cast<double>(m);
    b = b * static_cast<double>(half) / static_cast<double>(m - 1);
    const double n = static_cast<double>(half);
    const double var_plus = (n - 1.0) / n * w + b / n;

    ParamDiagnostics d;
    if (w <= 0.0) {
      d.r_hat = b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
      d.ess = b > 0.0 ? 1.0 : static_cast<double>(m * half);
      out[dim] = d;
      continue;
    }
    d.r_hat = std::sqrt(var_plus / w);

    // Multi-chain autocorrelation with Geyer's initial positive sequence.
    auto autocov = [&](std::size_t lag) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < half; ++i) s += (parts[j][i] - means[j]) * (parts[j][i + lag] - means[j]);
        acc += s / n;
      }
      return acc / static_cast<double>(m);
    };
    auto rho = [&](std::size_t lag) { return 1.0 - (w - autocov(lag)) / var_plus; };
    double tau = -1.0;  // rho_0 = 1 is counted by the first pair
    for (std::size_t t = 0; t + 1 < half; t += 2) {
      const double pair = rho(t) + rho(t + 1);
      if (pair < 0.0) break;
      tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * half)));
    d.ess = static_cast<double>(m) * n / tau;
    out[dim] = d;
  }
  return out;
}

ParamECDF ecdf(const PosteriorSamples& samples, ModelParam param, std::size_t min_draws) {
  if (samples.draws.size() < min_draws) {
    throw Error(ErrorCode::BadSpec, "ECDF needs at least " + std::to_string(min_draws) + " draws");
  }
  const auto col = samples.column(static_cast<std::size_t>(param));
  return empirical_cdf(col);
}

std::pair<double, double> balance_point_means(const PosteriorSamples& samples) {
  const auto m = samples.mean();
  return {m.t_heat, m.t_cool};
}

void write_posterior(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                     const PosteriorSamples& samples, const std::string& building_id) {
  std::ostringstream os;
  os << "chain";
  for (auto name : kParamNames) os << ',' << name;
  os << '\n';
  const auto per = samples.per_chain();
  for (std::size_t i = 0; i < samples.draws.size(); ++i) {
    os << (per > 0 ? i / per : 0);
    for (double v : samples.draws[i]) os << ',' << csv::format(v);
    os << '\n';
  }
  csv::write_atomic(csv_path, os.str());

  nlohmann::json j;
  j["building_id"] = building_id;
  j["chains"] = samples.chains;
  j["burn_in"] = samples.burn_in;
  j["draws_per_chain"] = per;
  j["seed"] = samples.seed;
  j["converged"] = samples.converged;
  j["acceptance"] = samples.acceptance;
  for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
    j["diagnostics"][std::string(kParamNames[i])] = {{"r_hat", samples.diagnostics[i].r_hat},
                                                     {"ess", samples.diagnostics[i].ess}};
  }
  csv::write_atomic(json_path, j.dump(2) + "\n");
}

PosteriorSamples read_posterior(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  std::ifstream jin(json_path);
  if (!jin) throw Error(ErrorCode::MissingPosterior, json_path.string());
  nlohmann::json j = nlohmann::json::parse(jin);
  PosteriorSamples s;
  s.chains = j.at("chains").get<int>();
  s.burn_in = j.at("burn_in").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.converged = j.at("converged").get<bool>();
  s.acceptance = j.at("acceptance").get<std::vector<double>>();
  for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
    const auto& d = j.at("diagnostics").at(std::string(kParamNames[i]));
    s.diagnostics[i] = {d.at("r_hat").get<double>(), d.at("ess").get<double>()};
  }

  if (!std::filesystem::exists(csv_path)) throw Error(ErrorCode::MissingPosterior, csv_path.string());
  auto table = csv::read(csv_path, {"chain", "base", "gamma_heat", "gamma_cool", "t_heat", "t_cool", "sigma"});
  std::array<std::size_t, ParamPoint::kDims> cols{};
  for (std::size_t i = 0; i < ParamPoint::kDims; ++i) cols[i] = table.index(kParamNames[i]);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    PosteriorSamples::Draw d{};
    for (std::size_t i = 0; i < ParamPoint::kDims; ++i) {
      auto v = csv::parse_double(table.rows[r][cols[i]]);
      if (!v) throw BadValueError(table.line_numbers[r], std::string(kParamNames[i]), "not a number");
      d[i] = *v;
    }
    s.draws.push_back(d);
  }
  return s;
}

}  // namespace ecorank
