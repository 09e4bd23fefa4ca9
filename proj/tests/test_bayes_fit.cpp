#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "ecorank/bayes_fit.hpp"
#include "ecorank/errors.hpp"
#include "test_util.hpp"

using namespace ecorank;
using ecorank::testing::aligned_from;
using ecorank::testing::seasonal_weather;
using ecorank::testing::TempDir;

namespace {

const ParamPoint kTruth{10.0, 2.0, 3.0, 60.0, 75.0, 2.0};

SamplerConfig config(std::uint64_t seed, int burn = 2000, int draws = 2000) {
  SamplerConfig c;
  c.seed = seed;
  c.burn_in = burn;
  c.draws = draws;
  return c;
}

// Independent log prior up to a constant.
double oracle_log_prior(const ParamPoint& p, const PriorSpec& s) {
  const double zb = (p.base - s.base_mean) / s.base_sd;
  const double zh = p.gamma_heat / s.gamma_heat_sd;
  const double zc = p.gamma_cool / s.gamma_cool_sd;
  const double r = p.sigma / s.sigma_scale;
  return -0.5 * (zb * zb + zh * zh + zc * zc) - std::log1p(r * r);
}

double sd(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

PosteriorSamples from_column(std::vector<double> values, std::size_t dim) {
  PosteriorSamples s;
  s.chains = 1;
  for (double v : values) {
    PosteriorSamples::Draw d{1, 1, 1, 50, 70, 1};
    d[dim] = v;
    s.draws.push_back(d);
  }
  return s;
}

}  // namespace

TEST(LogPosterior, OutsideSupportIsMinusInfinity) {
  auto a = aligned_from(kTruth, seasonal_weather(60, 55, 20, 3, 1), 2.0);
  PriorSpec pr;
  auto p = kTruth;
  p.t_heat = 76;
  EXPECT_EQ(log_posterior(p, a, pr), -std::numeric_limits<double>::infinity());
  p = kTruth;
  p.gamma_heat = -0.1;
  EXPECT_EQ(log_posterior(p, a, pr), -std::numeric_limits<double>::infinity());
  p = kTruth;
  p.sigma = 0;
  EXPECT_EQ(log_posterior(p, a, pr), -std::numeric_limits<double>::infinity());
  p = kTruth;
  p.t_cool = 100.5;
  EXPECT_EQ(log_posterior(p, a, pr), -std::numeric_limits<double>::infinity());
}

TEST(LogPosterior, EmptyDataIsPriorOnly) {
  AlignedSeries empty;
  PriorSpec pr;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const ParamPoint ref{5, 1, 1, 50, 70, 1};
  for (int i = 0; i < 50; ++i) {
    ParamPoint p{40 * u(rng), 8 * u(rng), 8 * u(rng), 40, 80, 10 * u(rng)};
    const double got = log_posterior(p, empty, pr) - log_posterior(ref, empty, pr);
    const double want = oracle_log_prior(p, pr) - oracle_log_prior(ref, pr);
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST(LogPosterior, GradientMatchesFiniteDifferences) {
  auto a = aligned_from(kTruth, seasonal_weather(120, 55, 25, 4, 3), 2.0, 3);
  PriorSpec pr;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    ParamPoint p{5 + 10 * u(rng), 0.5 + 3 * u(rng), 0.5 + 3 * u(rng), 45 + 20 * u(rng), 0, 1 + 3 * u(rng)};
    p.t_cool = p.t_heat + 5 + 20 * u(rng);
    bool near_kink = false;
    for (double t : a.temperature) near_kink |= std::abs(t - p.t_heat) < 1e-3 || std::abs(t - p.t_cool) < 1e-3;
    if (near_kink) continue;
    ++checked;
    const auto g = log_posterior_gradient(p, a, pr);
    const auto x = p.as_array();
    for (std::size_t k = 0; k < ParamPoint::kDims; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      auto hi = x, lo = x;
      hi[k] += h;
      lo[k] -= h;
      const double fd = (log_posterior(ParamPoint::from_array(hi), a, pr) -
                         log_posterior(ParamPoint::from_array(lo), a, pr)) /
                        (2 * h);
      EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "dim " << k;
    }
  }
}

TEST(SamplePosterior, RequiresSeed) {
  auto a = aligned_from(kTruth, seasonal_weather(30, 55, 20, 3, 1), 2.0);
  SamplerConfig c;
  try {
    sample_posterior(a, PriorSpec{}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadSpec);
  }
}

TEST(SamplePosterior, RecoversGeneratingTruth) {
  auto a = aligned_from(kTruth, seasonal_weather(365, 55, 25, 5, 4), 2.0, 4);
  auto s = sample_posterior(a, PriorSpec{}, config(42));
  const auto m = s.mean();
  EXPECT_NEAR(m.base, kTruth.base, 0.1 * kTruth.base);
  EXPECT_NEAR(m.gamma_heat, kTruth.gamma_heat, 0.1 * kTruth.gamma_heat);
  EXPECT_NEAR(m.gamma_cool, kTruth.gamma_cool, 0.1 * kTruth.gamma_cool);
  EXPECT_NEAR(m.t_heat, kTruth.t_heat, 2.0);
  EXPECT_NEAR(m.t_cool, kTruth.t_cool, 2.0);
  for (std::size_t k = 0; k < ParamPoint::kDims; ++k) EXPECT_LT(s.diagnostics[k].r_hat, 1.05) << kParamNames[k];
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.draws.size(), 4u * 2000u);

  const auto [th, tc] = balance_point_means(s);
  EXPECT_NEAR(th, kTruth.t_heat, 2.0);
  EXPECT_NEAR(tc, kTruth.t_cool, 2.0);

  for (const auto& d : s.draws) {
    ASSERT_GE(d[0], 0.0);
    ASSERT_GE(d[1], 0.0);
    ASSERT_GE(d[2], 0.0);
    ASSERT_LE(d[3], d[4]);
  }
}

TEST(SamplePosterior, SameSeedIsBitwiseIdentical) {
  auto a = aligned_from(kTruth, seasonal_weather(100, 55, 25, 5, 5), 2.0, 5);
  auto c = config(99, 300, 300);
  auto s1 = sample_posterior(a, PriorSpec{}, c);
  c.jobs = 4;
  auto s2 = sample_posterior(a, PriorSpec{}, c);
  ASSERT_EQ(s1.draws.size(), s2.draws.size());
  EXPECT_TRUE(std::equal(s1.draws.begin(), s1.draws.end(), s2.draws.begin(), [](const auto& x, const auto& y) {
    return std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
  }));
  auto s3 = sample_posterior(a, PriorSpec{}, config(100, 300, 300));
  EXPECT_NE(s1.draws.front(), s3.draws.back());
}

TEST(SamplePosterior, NoCoolingDaysPullsGammaCoolBelowPriorMean) {
  auto w = seasonal_weather(365, 40, 15, 3, 6);
  for (auto& d : w.days) d.value = std::min(d.value, 58.0);
  auto a = aligned_from(kTruth, w, 2.0, 6);
  auto s = sample_posterior(a, PriorSpec{}, config(7, 1000, 1000));
  const double prior_mean = 4.0 * std::sqrt(2.0 / M_PI);  // half-normal(4)
  EXPECT_LT(s.mean().gamma_cool, prior_mean);
}

TEST(SamplePosterior, PriorOnlyBalancePointMean) {
  AlignedSeries empty;
  auto s = sample_posterior(empty, PriorSpec{}, config(3, 1000, 2500));
  ASSERT_EQ(s.draws.size(), 10000u);
  const auto m = s.mean();
  EXPECT_NEAR((m.t_heat + m.t_cool) / 2, 66.0, 1.0);
}

TEST(SamplePosterior, MoreDataShrinksSlopeSpread) {
  const int sizes[3] = {60, 180, 365};
  std::vector<double> heat[3], cool[3];
  for (int seed = 0; seed < 20; ++seed) {
    auto full = seasonal_weather(365, 55, 25, 5, 100 + seed);
    for (int k = 0; k < 3; ++k) {
      // evenly thinned so every size spans the whole year
      WeatherSeries w;
      for (int i = 0; i < sizes[k]; ++i) w.days.push_back(full.days[static_cast<std::size_t>(i * 365 / sizes[k])]);
      auto a = aligned_from(kTruth, w, 2.0, 200 + seed);
      auto s = sample_posterior(a, PriorSpec{}, config(seed + 1, 500, 500));
      heat[k].push_back(sd(s.column(1)));
      cool[k].push_back(sd(s.column(2)));
    }
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_GT(median(heat[0]), median(heat[1]));
  EXPECT_GT(median(heat[1]), median(heat[2]));
  EXPECT_GT(median(cool[0]), median(cool[1]));
  EXPECT_GT(median(cool[1]), median(cool[2]));
}

TEST(Ecdf, PointMass) {
  auto s = from_column(std::vector<double>(1000, 2.5), 0);
  auto f = ecdf(s, ModelParam::base);
  ASSERT_EQ(f.support.size(), 1u);
  EXPECT_EQ(f(2.4999), 0.0);
  EXPECT_EQ(f(2.5), 1.0);
}

TEST(Ecdf, EmpiricalDefinition) {
  auto s = from_column({1, 2, 3, 4}, 1);
  auto f = ecdf(s, ModelParam::gamma_heat, 1);
  EXPECT_DOUBLE_EQ(f(2.5), 0.5);
  EXPECT_DOUBLE_EQ(f(0.5), 0.0);
  EXPECT_DOUBLE_EQ(f(4), 1.0);
  EXPECT_THROW(ecdf(s, ModelParam::gamma_heat), Error);  // below the default draw floor
}

TEST(Ecdf, UniformSupDistance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(10000);
  for (auto& x : v) x = u(rng);
  auto f = ecdf(from_column(v, 2), ModelParam::gamma_cool);
  double sup = 0;
  for (std::size_t i = 0; i < f.support.size(); ++i) {
    const double x = f.support[i];
    sup = std::max({sup, std::abs(f(x) - x), std::abs(f.left_limit(x) - x)});
  }
  EXPECT_LT(sup, 0.03);
}

TEST(BalancePointMeans, Examples) {
  auto constant = from_column(std::vector<double>(10, 60.0), 3);
  EXPECT_DOUBLE_EQ(balance_point_means(constant).first, 60.0);
  auto pair = from_column({58, 62, 58, 62}, 3);
  EXPECT_DOUBLE_EQ(balance_point_means(pair).first, 60.0);
}

TEST(Posterior, WriteReadRoundTrip) {
  TempDir dir("bayes");
  auto a = aligned_from(kTruth, seasonal_weather(80, 55, 25, 5, 8), 2.0, 8);
  auto s = sample_posterior(a, PriorSpec{}, config(5, 100, 250));
  write_posterior(dir / "x.csv", dir / "x.json", s, "x");
  auto back = read_posterior(dir / "x.csv", dir / "x.json");
  EXPECT_EQ(back.chains, s.chains);
  EXPECT_EQ(back.seed, s.seed);
  ASSERT_EQ(back.draws.size(), s.draws.size());
  EXPECT_EQ(back.draws, s.draws);
  EXPECT_NEAR(back.diagnostics[1].r_hat, s.diagnostics[1].r_hat, 1e-12);
}

TEST(Diagnostics, RhatFlagsSeparatedChains) {
  PosteriorSamples s;
  s.chains = 2;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) s.draws.push_back({c * 10 + n(rng), 1, 1, 50, 70, 1 + 0.01 * n(rng)});
  auto d = compute_diagnostics(s);
  EXPECT_GT(d[0].r_hat, 1.5);
  EXPECT_LT(d[5].r_hat, 1.05);
}
