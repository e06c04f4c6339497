#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "activedec/bp.hpp"
#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/parallel.hpp"
#include "activedec/rng.hpp"
#include "activedec/wbp.hpp"

namespace activedec {

/// A channel word drawn for training, tagged with its SNR and its hard
/// decision distance d_in from the transmitted (all-zero) codeword.
struct TrainingWord {
  LlrWord llr;
  double snr_db = 0.0;
  std::size_t d_in = 0;
};

struct ReliabilityPoint {
  double abp = 0.0;
  double mbce = 0.0;
};

/// Bivariate normal prior over (abp, mbce). `sigma` is row-major 2x2.
struct ReliabilityPrior {
  std::array<double, 2> mu{0.025, 0.1};
  std::array<double, 4> sigma{6.25e-4, 0.0, 0.0, 5.625e-3};

  double determinant() const { return sigma[0] * sigma[3] - sigma[1] * sigma[2]; }

  void validate() const {
    if (sigma[1] != sigma[2]) throw std::invalid_argument("prior: covariance must be symmetric");
    if (!(sigma[0] > 0.0) || !(determinant() > 0.0))
      throw std::invalid_argument("prior: covariance must be positive definite");
  }

  /// Defaults for the two block lengths studied: N = 63 and N = 127.
  /// Codes shorter than 127 take the N = 63 values.
  static ReliabilityPrior defaults_for_length(std::size_t n) {
    ReliabilityPrior p;
    if (n >= 127) p.mu = {0.03, 0.1};
    return p;
  }
};

struct PriorConfig {
  /// Iteration counts to probe; the first is the production tau.
  std::vector<std::size_t> tau_set{5, 7, 10, 15};
  std::size_t count = 10000;

  void validate() const {
    if (tau_set.empty()) throw std::invalid_argument("prior: tau_set must not be empty");
    if (!std::is_sorted(tau_set.begin(), tau_set.end()) ||
        std::adjacent_find(tau_set.begin(), tau_set.end()) != tau_set.end())
      throw std::invalid_argument("prior: tau_set must be strictly ascending");
    if (tau_set.front() < 1) throw std::invalid_argument("prior: tau values must be >= 1");
  }
};

struct SamplerConfig {
  std::vector<double> snr_set{4.0, 5.0, 6.0, 7.0};
  /// Distance set A = {1..d_max}; 0 disables the distance constraint.
  std::size_t d_max = 0;
  std::optional<ReliabilityPrior> prior;
  std::size_t target_batch = 1;
  std::size_t oversample_factor = 5;
  /// Keep drawing until the filtered batch reaches target_batch.
  bool refill = false;
  double acceptance_floor = 1e-4;

  void validate() const {
    if (snr_set.empty()) throw std::invalid_argument("sampler: snr_set must not be empty");
    if (target_batch < 1) throw std::invalid_argument("sampler: target batch must be >= 1");
    if (oversample_factor < 1) throw std::invalid_argument("sampler: oversample_factor must be >= 1");
    if (prior) prior->validate();
  }

  std::vector<std::size_t> distance_set() const {
    std::vector<std::size_t> a(d_max);
    std::iota(a.begin(), a.end(), std::size_t{1});
    return a;
  }
};

// --------------------------------------------------------------------------
// Reliability statistics of a received LLR word against the sent codeword
// --------------------------------------------------------------------------

/// Mean |c_i - sigma(-z_i)|.
inline double abp(const BitWord& c, const LlrWord& z) {
  if (c.size() != z.size()) throw std::invalid_argument("abp: length mismatch");
  if (c.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) acc += std::abs(static_cast<double>(c[i]) - sigmoid_neg(z[i]));
  return acc / static_cast<double>(c.size());
}

/// Mean |c_i log q_i + (1 - c_i) log(1 - q_i)| with q_i = sigma(-z_i), logs
/// clamped at 1e-12.
inline double mbce(const BitWord& c, const LlrWord& z) {
  if (c.size() != z.size()) throw std::invalid_argument("mbce: length mismatch");
  if (c.empty()) return 0.0;
  constexpr double kDelta = 1e-12;
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    // Probability of the transmitted bit, without forming 1 - q.
    const double prob = c[i] ? sigmoid_neg(z[i]) : sigmoid_neg(-z[i]);
    acc += std::abs(std::log(std::max(prob, kDelta)));
  }
  return acc / static_cast<double>(c.size());
}

inline ReliabilityPoint reliability(const BitWord& c, const LlrWord& z) { return {abp(c, z), mbce(c, z)}; }

inline double log_gaussian_weight(const ReliabilityPoint& p, const ReliabilityPrior& prior) {
  prior.validate();
  const double det = prior.determinant();
  const double dx = p.abp - prior.mu[0], dy = p.mbce - prior.mu[1];
  // inverse of [[a b] [b d]] is [[d -b] [-b a]] / det
  const double maha = (prior.sigma[3] * dx * dx - 2.0 * prior.sigma[1] * dx * dy + prior.sigma[0] * dy * dy) / det;
  return -0.5 * maha - std::log(2.0 * std::numbers::pi * std::sqrt(det));
}

/// Bivariate normal density of `p` under `prior`.
inline double gaussian_weight(const ReliabilityPoint& p, const ReliabilityPrior& prior) {
  return std::exp(log_gaussian_weight(p, prior));
}

/// Weights divided by their l1 norm, computed from log weights so that
/// points far from the prior do not underflow to an all-zero vector.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : log_w) top = std::max(top, x);
  if (!std::isfinite(top)) throw std::invalid_argument("normalize: all weights are zero");
  std::vector<double> out(log_w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) total += out[i] = std::exp(log_w[i] - top);
  for (auto& x : out) x /= total;
  return out;
}

// --------------------------------------------------------------------------
// Weighted sampling without replacement
// --------------------------------------------------------------------------

/// Draws b distinct indices, each draw proportional to the weights of the
/// items not yet drawn. Uses exponential keys (item i gets
/// log(-log u_i) - log w_i; the b smallest keys win, in draw order), which is
/// distributionally identical to sequential draws. Zero-weight items are only
/// taken once every positive-weight item is exhausted, uniformly among
/// themselves.
inline std::vector<std::size_t> weighted_sample_indices_log(std::span<const double> log_w, std::size_t b, Rng& rng) {
  if (b > log_w.size())
    throw std::invalid_argument("weighted sample: b=" + std::to_string(b) + " exceeds batch size " +
                                std::to_string(log_w.size()));
  bool any = false;
  for (double x : log_w) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("weighted sample: invalid weight");
    any = any || std::isfinite(x);
  }
  if (!any) throw std::invalid_argument("weighted sample: all weights are zero");

  std::vector<std::pair<double, double>> keys(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double u = rng.uniform_open();
    const double tie = rng.uniform();
    const double key = std::isfinite(log_w[i]) ? std::log(-std::log(u)) - log_w[i]
                                               : std::numeric_limits<double>::infinity();
    keys[i] = {key, tie};
  }
  std::vector<std::size_t> idx(log_w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(b), idx.end(),
                    [&](std::size_t a, std::size_t c) { return keys[a] < keys[c]; });
  idx.resize(b);
  return idx;
}

inline std::vector<std::size_t> weighted_sample_indices(std::span<const double> weights, std::size_t b, Rng& rng) {
  std::vector<double> log_w(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || std::isinf(weights[i]))
      throw std::invalid_argument("weighted sample: weights must be finite and >= 0");
    log_w[i] = weights[i] > 0.0 ? std::log(weights[i]) : -std::numeric_limits<double>::infinity();
  }
  return weighted_sample_indices_log(log_w, b, rng);
}

template <class T>
std::vector<T> weighted_sample_without_replacement(std::span<const T> batch, std::span<const double> weights,
                                                   std::size_t b, Rng& rng) {
  if (batch.size() != weights.size()) throw std::invalid_argument("weighted sample: batch/weights size mismatch");
  std::vector<T> out;
  out.reserve(b);
  for (auto i : weighted_sample_indices(weights, b, rng)) out.push_back(batch[i]);
  return out;
}

// --------------------------------------------------------------------------
// Channel-word sources
// --------------------------------------------------------------------------

/// One all-zero-codeword transmission at an SNR drawn uniformly from `snr_set`.
inline TrainingWord draw_channel_word(const CodeSpec& code, std::span<const double> snr_set, Rng& rng) {
  TrainingWord w;
  w.snr_db = snr_set[rng.index(snr_set.size())];
  w.llr = zero_codeword_llr(code.n(), snr_to_sigma(w.snr_db, code.rate()), rng);
  w.d_in = 0;
  for (double x : w.llr) w.d_in += hard_bit(x);
  return w;
}

/// `count` words with SNRs uniform over `snr_set`.
inline std::vector<TrainingWord> sample_channel(const CodeSpec& code, std::span<const double> snr_set,
                                                std::size_t count, Rng& rng) {
  if (snr_set.empty()) throw std::invalid_argument("sample_channel: snr_set must not be empty");
  std::vector<TrainingWord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw_channel_word(code, snr_set, rng));
  return out;
}

/// Exactly `per_snr` words at each SNR of the set, in set order.
inline std::vector<TrainingWord> sample_per_snr(const CodeSpec& code, std::span<const double> snr_set,
                                                std::size_t per_snr, Rng& rng) {
  std::vector<TrainingWord> out;
  out.reserve(per_snr * snr_set.size());
  for (double snr : snr_set) {
    const double single[] = {snr};
    for (std::size_t i = 0; i < per_snr; ++i) out.push_back(draw_channel_word(code, single, rng));
  }
  return out;
}

struct DistanceSample {
  std::vector<TrainingWord> words;
  std::size_t trials = 0;
};

/// Rejection sampling from the channel restricted to hard-decision distances
/// in `allowed`. Aborts with DegenerateData once at least 10/floor trials have
/// been made and the acceptance rate is below `acceptance_floor`.
inline DistanceSample sample_distance_constrained(const CodeSpec& code, std::span<const double> snr_set,
                                                  std::span<const std::size_t> allowed, std::size_t count, Rng& rng,
                                                  double acceptance_floor = 1e-4) {
  if (allowed.empty()) throw std::invalid_argument("sample_distance_constrained: distance set must not be empty");
  if (snr_set.empty()) throw std::invalid_argument("sample_distance_constrained: snr_set must not be empty");
  std::vector<std::uint8_t> ok(code.n() + 1, 0);
  for (auto d : allowed)
    if (d <= code.n()) ok[d] = 1;
  const auto min_trials = static_cast<std::size_t>(std::ceil(10.0 / acceptance_floor));

  DistanceSample out;
  out.words.reserve(count);
  while (out.words.size() < count) {
    auto w = draw_channel_word(code, snr_set, rng);
    ++out.trials;
    if (ok[w.d_in]) out.words.push_back(std::move(w));
    if (out.trials >= min_trials &&
        static_cast<double>(out.words.size()) < acceptance_floor * static_cast<double>(out.trials))
      throw DegenerateData("distance-constrained sampling accepted " + std::to_string(out.words.size()) + " of " +
                           std::to_string(out.trials) +
                           " words; the distance set is unreachable at these SNRs");
  }
  return out;
}

// --------------------------------------------------------------------------
// Distance filter
// --------------------------------------------------------------------------

/// A word stays in the training batch unless the decoder already fixes it
/// (d_out = 0) or fails to reduce its errors (d_out >= d_in).
constexpr bool keep_by_distance(std::size_t d_in, std::size_t d_out) noexcept {
  return !(d_out == 0 || d_out >= d_in);
}

/// Runs the current weighted decoder (all tau iterations, no early
/// termination) on every word and keeps the survivors, in order.
inline std::vector<TrainingWord> filter_by_distance(const WbpWeights& w, const CodeSpec& code,
                                                    const DecoderConfig& cfg, std::span<const TrainingWord> batch,
                                                    const BitWord& sent, unsigned workers = 1) {
  auto full = cfg;
  full.early_termination = false;
  std::vector<std::uint8_t> keep(batch.size(), 0);
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    const auto decoded = wbp_decode(w, code, batch[i].llr, full);
    keep[i] = keep_by_distance(batch[i].d_in, hamming_distance(decoded.bits, sent));
  });
  std::vector<TrainingWord> out;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (keep[i]) out.push_back(batch[i]);
  return out;
}

// --------------------------------------------------------------------------
// Prior selection
// --------------------------------------------------------------------------

struct ScatterRecord {
  std::size_t word_id = 0;
  double snr_db = 0.0;
  double abp = 0.0;
  double mbce = 0.0;
  /// Smallest tau in the probe set at which plain BP decodes the word.
  std::optional<std::size_t> min_decode_tau;
};

/// Draws pcfg.count words and labels each with the smallest iteration count
/// in pcfg.tau_set at which plain BP (early termination on) recovers the
/// all-zero codeword.
inline std::vector<ScatterRecord> label_reliability(const CodeSpec& code, std::span<const double> snr_set,
                                                    const PriorConfig& pcfg, const DecoderConfig& base, Rng& rng,
                                                    unsigned workers = 1) {
  pcfg.validate();
  auto words = sample_channel(code, snr_set, pcfg.count, rng);
  const BitWord zero(code.n());
  std::vector<ScatterRecord> out(words.size());
  parallel_for(words.size(), workers, [&](std::size_t i) {
    auto& r = out[i];
    r.word_id = i;
    r.snr_db = words[i].snr_db;
    const auto point = reliability(zero, words[i].llr);
    r.abp = point.abp;
    r.mbce = point.mbce;
    auto cfg = base;
    cfg.early_termination = true;
    for (auto tau : pcfg.tau_set) {
      cfg.tau = tau;
      if (bp_decode(code, words[i].llr, cfg).success(zero)) {
        r.min_decode_tau = tau;
        break;
      }
    }
  });
  return out;
}

/// Empirical mean and diagonal covariance of the words that fail at the
/// production iteration count `tau1` but succeed with more iterations.
inline ReliabilityPrior fit_prior(std::span<const ScatterRecord> records, std::size_t tau1,
                                  double variance_floor = 1e-8) {
  std::vector<ReliabilityPoint> target;
  for (const auto& r : records)
    if (r.min_decode_tau && *r.min_decode_tau != tau1) target.push_back({r.abp, r.mbce});
  if (target.empty())
    throw DegenerateData(
        "no word failed at tau=" + std::to_string(tau1) +
        " and was recovered with more iterations; widen the SNR set, raise the word count or "
        "add larger iteration counts (or configure the prior explicitly)");
  ReliabilityPrior prior;
  const auto n = static_cast<double>(target.size());
  double ma = 0.0, mm = 0.0;
  for (const auto& p : target) {
    ma += p.abp;
    mm += p.mbce;
  }
  ma /= n;
  mm /= n;
  double va = 0.0, vm = 0.0;
  for (const auto& p : target) {
    va += (p.abp - ma) * (p.abp - ma);
    vm += (p.mbce - mm) * (p.mbce - mm);
  }
  if (target.size() > 1) {
    va /= n - 1.0;
    vm /= n - 1.0;
  }
  prior.mu = {ma, mm};
  prior.sigma = {va, 0.0, 0.0, vm};
  if (target.size() < 2 || va < variance_floor || vm < variance_floor)
    throw DegenerateData("prior target set of " + std::to_string(target.size()) +
                         " word(s) has degenerate variance (floor " + std::to_string(variance_floor) + ")");
  return prior;
}

struct PriorResult {
  ReliabilityPrior prior;
  std::vector<ScatterRecord> records;
};

inline PriorResult choose_prior(const CodeSpec& code, std::span<const double> snr_set, const PriorConfig& pcfg,
                                const DecoderConfig& base, Rng& rng, unsigned workers = 1) {
  PriorResult r;
  r.records = label_reliability(code, snr_set, pcfg, base, rng, workers);
  r.prior = fit_prior(r.records, pcfg.tau_set.front());
  return r;
}

inline void write_scatter_csv(std::ostream& out, std::span<const ScatterRecord> records) {
  out << "word_id,snr_db,abp,mbce,min_decode_tau\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g,%.6g,", r.word_id, r.snr_db, r.abp, r.mbce);
    out << buf;
    if (r.min_decode_tau)
      out << *r.min_decode_tau;
    else
      out << "none";
    out << '\n';
  }
}

// --------------------------------------------------------------------------
// Reliability-weighted batches (with optional distance filtering)
// --------------------------------------------------------------------------

struct ReliabilityBatch {
  std::vector<TrainingWord> words;
  /// |Q| as drawn, and after distance filtering (equal when unfiltered).
  std::size_t drawn = 0;
  std::size_t filtered = 0;
};

/// Draws Q = oversample_factor * target_batch words, weights each by the
/// prior density of its (abp, mbce) point and samples target_batch of them
/// without replacement. With d_max set, Q is drawn distance-constrained and
/// passed through filter_by_distance before weighting; if fewer than
/// target_batch words survive, all survivors are returned.
inline ReliabilityBatch sample_by_reliability(const WbpWeights& w, const CodeSpec& code, const DecoderConfig& cfg,
                                              const SamplerConfig& scfg, Rng& rng, unsigned workers = 1) {
  scfg.validate();
  if (!scfg.prior) throw std::invalid_argument("sample_by_reliability: prior is required");
  const auto q_size = scfg.oversample_factor * scfg.target_batch;
  const BitWord zero(code.n());

  ReliabilityBatch out;
  std::vector<TrainingWord> q;
  if (scfg.d_max > 0) {
    const auto a = scfg.distance_set();
    q = sample_distance_constrained(code, scfg.snr_set, a, q_size, rng, scfg.acceptance_floor).words;
    out.drawn = q.size();
    q = filter_by_distance(w, code, cfg, q, zero, workers);
  } else {
    q = sample_channel(code, scfg.snr_set, q_size, rng);
    out.drawn = q.size();
  }
  out.filtered = q.size();
  if (q.empty()) return out;

  std::vector<double> log_w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) log_w[i] = log_gaussian_weight(reliability(zero, q[i].llr), *scfg.prior);
  const auto b = std::min(scfg.target_batch, q.size());
  for (auto i : weighted_sample_indices_log(log_w, b, rng)) out.words.push_back(std::move(q[i]));
  return out;
}

}  // namespace activedec
