#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/sampling.hpp"
#include "oracles.hpp"

using namespace activedec;

namespace {

CodeSpec bch63() {
  return load_code(ACTIVEDEC_DATA_DIR "/codes/bch_63_36.alist", MatrixFormat::kAlist, "bch_63_36", 2);
}

// Reference values computed straight from the definitions with long double.
long double ref_abp(const BitWord& c, const LlrWord& z) {
  long double s = 0;
  for (std::size_t i = 0; i < c.size(); ++i) s += std::fabs(c[i] - 1.0L / (1.0L + std::exp((long double)z[i])));
  return s / c.size();
}

long double ref_mbce(const BitWord& c, const LlrWord& z) {
  long double s = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const long double x = 1.0L / (1.0L + std::exp((long double)z[i]));
    const long double arg = c[i] ? x : 1.0L / (1.0L + std::exp(-(long double)z[i]));
    s += std::fabs(std::log(std::max(arg, (long double)1e-12)));
  }
  return s / c.size();
}

}  // namespace

TEST(Reliability, ScalarExamples) {
  EXPECT_NEAR(abp(BitWord({1, 0}), LlrWord({-2.0, 2.0})), 0.1192029220, 1e-10);
  EXPECT_NEAR(mbce(BitWord({0}), LlrWord({2.0})), 0.1269280110, 1e-10);
  EXPECT_NEAR(abp(BitWord(5), LlrWord(5, 0.0)), 0.5, 1e-15);
  EXPECT_NEAR(abp(BitWord({1, 1, 0}), LlrWord(3, 0.0)), 0.5, 1e-15);
  EXPECT_NEAR(mbce(BitWord(4), LlrWord(4, 0.0)), std::log(2.0), 1e-15);
  EXPECT_LT(abp(BitWord(4), LlrWord(4, 20.0)), 3e-9);
  EXPECT_LT(mbce(BitWord(4), LlrWord(4, 60.0)), 1e-11);
  EXPECT_THROW(abp(BitWord(3), LlrWord(2)), std::invalid_argument);
  EXPECT_THROW(mbce(BitWord(3), LlrWord(2)), std::invalid_argument);
}

TEST(Reliability, MatchesHighPrecisionOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    BitWord c(n);
    LlrWord z(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = rng.uniform() < 0.5;
      z[i] = 30.0 * (2.0 * rng.uniform() - 1.0);
    }
    EXPECT_NEAR(abp(c, z), (double)ref_abp(c, z), 1e-12);
    EXPECT_NEAR(mbce(c, z), (double)ref_mbce(c, z), 1e-12);
    EXPECT_GE(abp(c, z), 0.0);
    EXPECT_LE(abp(c, z), 1.0);
  }
}

TEST(Prior, DensityAtMean) {
  const ReliabilityPrior p;
  const double expect = 1.0 / (2.0 * std::numbers::pi * std::sqrt(6.25e-4 * 5.625e-3));
  EXPECT_NEAR(gaussian_weight({p.mu[0], p.mu[1]}, p), expect, 1e-9);
  EXPECT_NEAR(expect, 84.8826363157, 1e-9);
}

TEST(Prior, MahalanobisSymmetryAndRatio) {
  const ReliabilityPrior p;
  const double sa = std::sqrt(p.sigma[0]), sm = std::sqrt(p.sigma[3]);
  const double w1 = gaussian_weight({p.mu[0] + sa, p.mu[1]}, p);
  const double w2 = gaussian_weight({p.mu[0], p.mu[1] - sm}, p);
  EXPECT_NEAR(w1, w2, 1e-12);
  const double w0 = gaussian_weight({p.mu[0], p.mu[1]}, p);
  EXPECT_NEAR(w1 / w0, std::exp(-0.5), 1e-12);
  const ReliabilityPoint q{0.3, 0.7};
  const double d2 = std::pow(q.abp - p.mu[0], 2) / p.sigma[0] + std::pow(q.mbce - p.mu[1], 2) / p.sigma[3];
  EXPECT_NEAR(log_gaussian_weight(q, p) - std::log(w0), -0.5 * d2, 1e-9);
}

TEST(Prior, SingularCovarianceRejected) {
  ReliabilityPrior p;
  p.sigma = {1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(gaussian_weight({0.0, 0.0}, p), std::invalid_argument);
  p.sigma = {1.0, 0.5, 0.2, 1.0};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_EQ(ReliabilityPrior::defaults_for_length(127).mu[0], 0.03);
  EXPECT_EQ(ReliabilityPrior::defaults_for_length(63).mu[0], 0.025);
}

TEST(Prior, NormalizedWeightsSumToOne) {
  const std::vector<double> lw{-1000.0, -1001.0, -999.5, -1200.0};
  const auto w = normalize_log_weights(lw);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_GT(w[2], w[0]);
}

TEST(WeightedSampling, UniformFiveChooseTwoChiSquare) {
  Rng rng(2718);
  const std::vector<double> w(5, 1.0);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    auto idx = weighted_sample_indices(w, 2, rng);
    ASSERT_NE(idx[0], idx[1]);
    counts[{std::min(idx[0], idx[1]), std::max(idx[0], idx[1])}]++;
  }
  ASSERT_EQ(counts.size(), 10u);
  const double e = draws / 10.0;
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - e) * (c - e) / e;
  EXPECT_GT(oracle::chi2_sf(chi2, 9), 0.01);
}

TEST(WeightedSampling, SequentialDrawProbabilities) {
  // Weights (3, 1, 1): item 0 is drawn first with probability 3/5, and the
  // ordered pair (0, 1) has probability 3/5 * 1/2.
  Rng rng(4);
  const std::vector<double> w{3.0, 1.0, 1.0};
  std::size_t first0 = 0, pair01 = 0;
  const std::size_t draws = 200000;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto idx = weighted_sample_indices(w, 2, rng);
    first0 += idx[0] == 0;
    pair01 += idx[0] == 0 && idx[1] == 1;
  }
  auto within = [&](std::size_t k, double p) {
    return std::abs(double(k) / draws - p) < 5.0 * std::sqrt(p * (1 - p) / draws);
  };
  EXPECT_TRUE(within(first0, 0.6));
  EXPECT_TRUE(within(pair01, 0.3));
}

TEST(WeightedSampling, DegenerateCases) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(weighted_sample_indices(std::vector<double>{0, 0, 1, 0}, 1, rng)[0], 2u);
  auto all = weighted_sample_indices(std::vector<double>{1, 2, 3}, 3, rng);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(weighted_sample_indices(std::vector<double>{1, 1}, 3, rng), std::invalid_argument);
  EXPECT_THROW(weighted_sample_indices(std::vector<double>{0, 0}, 1, rng), std::invalid_argument);
  EXPECT_THROW(weighted_sample_indices(std::vector<double>{1, -1}, 1, rng), std::invalid_argument);
  const std::vector<int> items{10, 20, 30};
  const std::vector<double> wts{0.0, 1.0, 0.0};
  EXPECT_EQ(weighted_sample_without_replacement<int>(items, wts, 1, rng), std::vector<int>{20});
}

TEST(DistanceSampling, AcceptedWordsRespectSet) {
  const auto code = bch63();
  Rng rng(3);
  const std::vector<double> snrs{4.0, 5.0, 6.0, 7.0};
  const std::vector<std::size_t> a{1, 2};
  const auto s = sample_distance_constrained(code, snrs, a, 500, rng);
  ASSERT_EQ(s.words.size(), 500u);
  for (const auto& w : s.words) {
    std::size_t neg = 0;
    for (double x : w.llr) neg += x < 0.0;
    EXPECT_EQ(neg, w.d_in);
    EXPECT_TRUE(w.d_in == 1 || w.d_in == 2);
  }
}

TEST(DistanceSampling, AcceptanceMatchesBinomial) {
  const auto code = bch63();
  Rng rng(8);
  const std::vector<double> snrs{4.0};
  const std::vector<std::size_t> a{1, 2};
  const auto s = sample_distance_constrained(code, snrs, a, 30000, rng);
  const double p = oracle::phi(-1.0 / snr_to_sigma(4.0, 36.0 / 63.0));
  const double q = oracle::binom_pmf(63, 1, p) + oracle::binom_pmf(63, 2, p);
  const double rate = double(s.words.size()) / s.trials;
  EXPECT_NEAR(rate, q, 3.0 * std::sqrt(q * (1 - q) / s.trials));
}

TEST(DistanceSampling, UnreachableSetAborts) {
  const auto code = codes::hamming74();
  Rng rng(1);
  const std::vector<double> snrs{60.0};
  const std::vector<std::size_t> a{1};
  EXPECT_THROW(sample_distance_constrained(code, snrs, a, 1, rng), DegenerateData);
}

TEST(DistanceFilter, Contract) {
  EXPECT_FALSE(keep_by_distance(2, 0));
  EXPECT_TRUE(keep_by_distance(3, 1));
  EXPECT_FALSE(keep_by_distance(2, 2));
  EXPECT_FALSE(keep_by_distance(1, 3));

  const auto code = bch63();
  DecoderConfig cfg;
  const auto w = init_weights(code, cfg.tau);
  Rng rng(21);
  const std::vector<double> snrs{4.0, 5.0};
  std::vector<std::size_t> a(8);
  std::iota(a.begin(), a.end(), 1);
  const auto batch = sample_distance_constrained(code, snrs, a, 300, rng).words;
  const auto kept = filter_by_distance(w, code, cfg, batch, BitWord(63), 2);
  // Exhaustive: recompute the survivors independently and compare in order.
  auto full = cfg;
  full.early_termination = false;
  std::vector<std::size_t> expect;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto d_out = weight(bp_decode(code, batch[i].llr, full).bits);
    if (d_out != 0 && d_out < batch[i].d_in) expect.push_back(i);
  }
  ASSERT_EQ(kept.size(), expect.size());
  for (std::size_t j = 0; j < kept.size(); ++j) EXPECT_EQ(kept[j].llr, batch[expect[j]].llr);
}

TEST(PriorFit, TargetSetAndMoments) {
  std::vector<ScatterRecord> recs{
      {0, 4.0, 0.1, 0.2, 5}, {1, 4.0, 0.3, 0.5, 7}, {2, 4.0, 0.5, 0.9, 10}, {3, 4.0, 0.9, 0.9, std::nullopt}};
  const auto p = fit_prior(recs, 5);
  EXPECT_NEAR(p.mu[0], 0.4, 1e-15);
  EXPECT_NEAR(p.mu[1], 0.7, 1e-15);
  EXPECT_NEAR(p.sigma[0], 0.02, 1e-15);
  EXPECT_NEAR(p.sigma[3], 0.08, 1e-15);
  EXPECT_EQ(p.sigma[1], 0.0);
}

TEST(PriorFit, DegenerateTargets) {
  std::vector<ScatterRecord> all_easy{{0, 4.0, 0.1, 0.2, 5}, {1, 4.0, 0.1, 0.3, 5}};
  EXPECT_THROW(fit_prior(all_easy, 5), DegenerateData);
  std::vector<ScatterRecord> single{{0, 4.0, 0.1, 0.2, 7}};
  EXPECT_THROW(fit_prior(single, 5), DegenerateData);
  std::vector<ScatterRecord> same{{0, 4.0, 0.1, 0.2, 7}, {1, 5.0, 0.1, 0.2, 10}};
  EXPECT_THROW(fit_prior(same, 5), DegenerateData);
  EXPECT_THROW(fit_prior(std::vector<ScatterRecord>{}, 5), DegenerateData);
}

TEST(PriorFit, LabelsAreSmallestDecodingTau) {
  const auto code = bch63();
  PriorConfig pc;
  pc.count = 200;
  Rng rng(17);
  const std::vector<double> snrs{3.0, 4.0};
  const auto recs = label_reliability(code, snrs, pc, DecoderConfig{}, rng, 2);
  ASSERT_EQ(recs.size(), 200u);
  Rng replay(17);
  const auto words = sample_channel(code, snrs, 200, replay);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::optional<std::size_t> expect;
    for (auto tau : pc.tau_set) {
      DecoderConfig cfg;
      cfg.tau = tau;
      if (weight(bp_decode(code, words[i].llr, cfg).bits) == 0) {
        expect = tau;
        break;
      }
    }
    EXPECT_EQ(recs[i].min_decode_tau, expect);
    EXPECT_EQ(recs[i].snr_db, words[i].snr_db);
  }
  std::ostringstream csv;
  write_scatter_csv(csv, recs);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "word_id,snr_db,abp,mbce,min_decode_tau");
}

TEST(PriorFit, OnlyFirstTauMeansEmptyTarget) {
  const auto code = bch63();
  PriorConfig pc;
  pc.tau_set = {5};
  pc.count = 100;
  Rng rng(2);
  const std::vector<double> snrs{4.0};
  EXPECT_THROW(choose_prior(code, snrs, pc, DecoderConfig{}, rng), DegenerateData);
  pc.tau_set = {7, 5};
  EXPECT_THROW(pc.validate(), std::invalid_argument);
}

TEST(ReliabilitySampling, PrefersPointsNearPrior) {
  // Prior far from the data with a tiny covariance: the word whose
  // reliability point is closest in Mahalanobis distance should be picked
  // first far more often than any other.
  const auto code = codes::hamming74();
  DecoderConfig cfg;
  const auto w = init_weights(code, cfg.tau);
  SamplerConfig sc;
  sc.snr_set = {1.0};
  sc.target_batch = 1;
  sc.oversample_factor = 4;
  ReliabilityPrior prior;
  prior.mu = {0.5, 1.0};
  prior.sigma = {1e-3, 0.0, 0.0, 1e-3};
  sc.prior = prior;

  std::size_t nearest_hits = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    Rng a(1000 + r), b(1000 + r);
    const auto q = sample_channel(code, sc.snr_set, 4, b);
    std::size_t best = 0;
    double best_lw = -INFINITY;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double lw = log_gaussian_weight(reliability(BitWord(7), q[i].llr), prior);
      if (lw > best_lw) best_lw = lw, best = i;
    }
    const auto out = sample_by_reliability(w, code, cfg, sc, a);
    ASSERT_EQ(out.words.size(), 1u);
    nearest_hits += out.words[0].llr == q[best].llr;
  }
  EXPECT_GT(nearest_hits, reps * 3 / 4);
}

TEST(ReliabilitySampling, OversampleOneReturnsAllOfQ) {
  const auto code = codes::hamming74();
  DecoderConfig cfg;
  const auto w = init_weights(code, cfg.tau);
  SamplerConfig sc;
  sc.target_batch = 12;
  sc.oversample_factor = 1;
  sc.prior = ReliabilityPrior{};
  Rng a(5), b(5);
  const auto out = sample_by_reliability(w, code, cfg, sc, a);
  auto q = sample_channel(code, sc.snr_set, 12, b);
  ASSERT_EQ(out.words.size(), 12u);
  std::vector<std::vector<double>> got, want;
  for (const auto& x : out.words) got.push_back(x.llr.values());
  for (const auto& x : q) want.push_back(x.llr.values());
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
}

TEST(ReliabilitySampling, CombinedStrategyRespectsDistance) {
  const auto code = bch63();
  DecoderConfig cfg;
  const auto w = init_weights(code, cfg.tau);
  SamplerConfig sc;
  sc.target_batch = 50;
  sc.d_max = 3;
  sc.prior = ReliabilityPrior{};
  Rng rng(9);
  const auto out = sample_by_reliability(w, code, cfg, sc, rng);
  EXPECT_LE(out.words.size(), 50u);
  EXPECT_EQ(out.drawn, 250u);
  for (const auto& x : out.words) {
    EXPECT_GE(x.d_in, 1u);
    EXPECT_LE(x.d_in, 3u);
  }
  EXPECT_THROW(sample_by_reliability(w, code, cfg, SamplerConfig{}, rng), std::invalid_argument);
}
