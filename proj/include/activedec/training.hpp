#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "activedec/bp.hpp"
#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/parallel.hpp"
#include "activedec/rng.hpp"
#include "activedec/sampling.hpp"
#include "activedec/wbp.hpp"

namespace activedec {

inline constexpr double kLogClamp = 1e-12;

/// How gradients pass through clip and clamp sites in the backward pass.
enum class ClampGradient {
  kCut,              ///< zero wherever the clamp is active
  kStraightThrough,  ///< the clamp is treated as identity
};

/// Multiloss: -(1/N) sum over taps t and bits v of the binary cross entropy
/// between c_v and tap probability x_{v,t}. Normalized by N only.
inline double bce_multiloss(const ForwardRecord& rec, const BitWord& c) {
  if (rec.tau == 0 || rec.tap_prob.size() != rec.tau * rec.n) throw std::invalid_argument("bce_multiloss: missing taps");
  if (c.size() != rec.n) throw std::invalid_argument("bce_multiloss: codeword length mismatch");
  double loss = 0.0;
  for (std::size_t t = 0; t < rec.tau; ++t) {
    for (std::size_t v = 0; v < rec.n; ++v) {
      const double x = std::clamp(rec.prob(t, v), kLogClamp, 1.0 - kLogClamp);
      loss -= c[v] ? std::log(x) : std::log(1.0 - x);
    }
  }
  return loss / static_cast<double>(rec.n);
}

/// Exact reverse-mode gradient of bce_multiloss with respect to every weight,
/// through the recorded forward. Shape matches `w.params()`.
inline std::vector<double> backward(const ForwardRecord& rec, const WbpWeights& w, const CodeSpec& code,
                                    const BitWord& c, ClampGradient mode = ClampGradient::kCut) {
  if (rec.tau != w.tau() || rec.edges != w.num_edges() || rec.n != code.n() || rec.edges != code.num_edges())
    throw std::invalid_argument("backward: record does not match weights/code");
  if (c.size() != rec.n) throw std::invalid_argument("backward: codeword length mismatch");

  const auto E = rec.edges;
  const bool cut = mode == ClampGradient::kCut;
  const double inv_n = 1.0 / static_cast<double>(rec.n);
  std::vector<double> grad(w.size(), 0.0);
  std::vector<double> g_c2v(E, 0.0), g_prev(E, 0.0), g_p(E, 0.0), g_s(E, 0.0);
  std::vector<double> pre, suf, gpre, gsuf;

  for (std::size_t t = rec.tau; t-- > 0;) {
    const double* c2v = rec.c2v.data() + t * E;
    const double* u = rec.u.data() + t * E;
    const double* p = rec.p.data() + t * E;

    // Tap t: L = z + sum_e w_out[e] c2v[e], x = sigma(-L); dLoss/dL = (c - x) / N.
    for (std::size_t v = 0; v < rec.n; ++v) {
      const double x = rec.prob(t, v);
      if (cut && (x < kLogClamp || x > 1.0 - kLogClamp)) continue;
      const double g_l = (static_cast<double>(c[v]) - x) * inv_n;
      for (auto e : code.var_edges(v)) {
        grad[w.output_index(e)] += g_l * c2v[e];
        g_c2v[e] += g_l * w.output(e);
      }
    }

    // c2v = clip(2 atanh(guard(p))).
    for (std::size_t e = 0; e < E; ++e) {
      double g = g_c2v[e];
      if (cut && (rec.c2v_clipped[t * E + e] || rec.p_guarded[t * E + e])) g = 0.0;
      g_p[e] = g * 2.0 / (1.0 - p[e] * p[e]);
    }

    // p[e] = prod_{e' != e} u[e'] within each check. For the gradient of
    // F = sum_e g_p[e] p[e] w.r.t. u[j], split e < j and e > j and carry
    // prefix/suffix sums of "products missing one factor" (O(degree)).
    for (std::size_t chk = 0; chk < code.checks(); ++chk) {
      const auto& es = code.check_edges(chk);
      const auto d = es.size();
      pre.assign(d + 1, 1.0);
      suf.assign(d + 1, 1.0);
      gpre.assign(d + 1, 0.0);
      gsuf.assign(d + 1, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        pre[i + 1] = pre[i] * u[es[i]];
        gpre[i + 1] = gpre[i] * u[es[i]] + g_p[es[i]] * pre[i];
      }
      for (std::size_t i = d; i-- > 0;) {
        suf[i] = suf[i + 1] * u[es[i]];
        gsuf[i] = gsuf[i + 1] * u[es[i]] + g_p[es[i]] * suf[i + 1];
      }
      for (std::size_t i = 0; i < d; ++i) {
        const auto e = es[i];
        const double g_u = gpre[i] * suf[i + 1] + pre[i] * gsuf[i + 1];
        // u = tanh(s / 2); s was clipped before the tanh.
        g_s[e] = (cut && rec.s_clipped[t * E + e]) ? 0.0 : g_u * 0.5 * (1.0 - u[e] * u[e]);
      }
    }

    // s[e_out] = z_v + sum_k w[t, e_out, k] c2v_{t-1}[e_in].
    std::fill(g_prev.begin(), g_prev.end(), 0.0);
    if (t > 0) {
      const double* c2v_prev = rec.c2v.data() + (t - 1) * E;
      for (std::size_t v = 0; v < rec.n; ++v) {
        const auto& es = code.var_edges(v);
        for (std::size_t i = 0; i < es.size(); ++i) {
          const auto e_out = es[i];
          const double g = g_s[e_out];
          if (g == 0.0) continue;
          std::size_t k = 0;
          for (std::size_t j = 0; j < es.size(); ++j) {
            if (j == i) continue;
            const auto e_in = es[j];
            const auto idx = w.pair_index(t, e_out, k, e_in);
            grad[idx] += g * c2v_prev[e_in];
            g_prev[e_in] += g * w.params()[idx];
            ++k;
          }
        }
      }
    }
    std::swap(g_c2v, g_prev);
  }
  return grad;
}

// --------------------------------------------------------------------------
// RMSProp
// --------------------------------------------------------------------------

struct RmsPropConfig {
  double decay = 0.99;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<double> mean_square;
  std::size_t steps = 0;
};

/// v <- decay v + (1 - decay) g^2;  w <- w - lr g / (sqrt(v) + eps).
inline void rmsprop_step(OptimizerState& state, std::vector<double>& w, std::span<const double> g, double lr,
                         const RmsPropConfig& cfg = {}) {
  if (g.size() != w.size()) throw std::invalid_argument("rmsprop: gradient/weight shape mismatch");
  if (state.mean_square.empty()) state.mean_square.assign(w.size(), 0.0);
  if (state.mean_square.size() != w.size()) throw std::invalid_argument("rmsprop: state shape mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& v = state.mean_square[i];
    v = cfg.decay * v + (1.0 - cfg.decay) * g[i] * g[i];
    w[i] -= lr * g[i] / (std::sqrt(v) + cfg.epsilon);
  }
  ++state.steps;
}

// --------------------------------------------------------------------------
// Training loop
// --------------------------------------------------------------------------

enum class Strategy { kRandom, kDistance, kReliability, kReliabilityDistance };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "random";
    case Strategy::kDistance:
      return "distance";
    case Strategy::kReliability:
      return "reliability";
    case Strategy::kReliabilityDistance:
      return "reliability+distance";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "random") return Strategy::kRandom;
  if (s == "distance") return Strategy::kDistance;
  if (s == "reliability") return Strategy::kReliability;
  if (s == "reliability+distance") return Strategy::kReliabilityDistance;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

struct TrainConfig {
  std::vector<double> snr_set{4.0, 5.0, 6.0, 7.0};
  std::size_t batch_per_snr = 1250;
  double learning_rate = 0.01;
  RmsPropConfig rmsprop;
  Strategy strategy = Strategy::kRandom;
  /// d_max for the distance strategies (0 = none).
  std::size_t d_max = 0;
  std::optional<ReliabilityPrior> prior;
  std::size_t oversample_factor = 5;
  bool refill = false;
  bool tied = false;
  ClampGradient clamp_gradient = ClampGradient::kCut;

  std::size_t max_steps = 100000;
  std::size_t validate_every = 100;
  std::size_t patience = 10;
  double validation_snr = 6.0;
  std::size_t validation_frames = 10000;
  /// Consecutive empty filtered batches tolerated before giving up.
  std::size_t max_resample = 100;
  unsigned workers = 1;

  std::size_t batch_size() const { return batch_per_snr * snr_set.size(); }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("train: learning_rate must be >= 0");
    if (batch_per_snr < 1) throw std::invalid_argument("train: batch_per_snr must be >= 1");
    if (snr_set.empty()) throw std::invalid_argument("train: snr_set must not be empty");
    if (validate_every < 1) throw std::invalid_argument("train: validate_every must be >= 1");
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (validation_frames < 1) throw std::invalid_argument("train: validation_frames must be >= 1");
    if (!(rmsprop.decay >= 0.0 && rmsprop.decay < 1.0)) throw std::invalid_argument("train: rms decay must be in [0,1)");
    if (!(rmsprop.epsilon > 0.0)) throw std::invalid_argument("train: rms epsilon must be > 0");
    const bool needs_d = strategy == Strategy::kDistance || strategy == Strategy::kReliabilityDistance;
    if (needs_d && d_max < 1) throw std::invalid_argument("train: distance strategies need d_max >= 1");
    const bool needs_prior = strategy == Strategy::kReliability || strategy == Strategy::kReliabilityDistance;
    if (needs_prior && !prior) throw std::invalid_argument("train: reliability strategies need a prior");
    if (prior) prior->validate();
    if (oversample_factor < 1) throw std::invalid_argument("train: oversample_factor must be >= 1");
  }
};

struct HistoryRow {
  std::size_t step = 0;
  std::optional<double> loss;
  std::optional<double> val_fer;
  double lr = 0.0;
  std::size_t batch_size = 0;
  /// Fraction of the drawn words removed by the distance filter.
  std::optional<double> filtered_fraction;
  std::size_t resamples = 0;
};

struct TrainResult {
  WbpWeights weights;
  std::vector<HistoryRow> history;
  double best_val_fer = 1.0;
  std::size_t best_step = 0;
};

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean multiloss and mean gradient over a batch. Words are processed in
/// fixed chunks reduced in chunk order, so the result does not depend on the
/// number of workers.
inline BatchGradient batch_gradient(const WbpWeights& w, const CodeSpec& code, const DecoderConfig& cfg,
                                    std::span<const TrainingWord> batch, ClampGradient mode, unsigned workers) {
  constexpr std::size_t kChunk = 32;
  const BitWord zero(code.n());
  auto fwd = cfg;
  fwd.early_termination = false;
  const auto chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<BatchGradient> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t ci) {
    auto& part = partial[ci];
    part.grad.assign(w.size(), 0.0);
    const auto end = std::min(batch.size(), (ci + 1) * kChunk);
    for (std::size_t i = ci * kChunk; i < end; ++i) {
      const auto rec = wbp_forward(w, code, batch[i].llr, fwd);
      part.loss += bce_multiloss(rec, zero);
      const auto g = backward(rec, w, code, zero, mode);
      for (std::size_t j = 0; j < g.size(); ++j) part.grad[j] += g[j];
    }
  });
  BatchGradient out;
  out.grad.assign(w.size(), 0.0);
  for (const auto& part : partial) {
    out.loss += part.loss;
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += part.grad[j];
  }
  if (!batch.empty()) {
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (auto& g : out.grad) g *= inv;
  }
  return out;
}

/// Frame error rate of the weighted decoder (early termination on) on a
/// fixed set of all-zero-codeword words.
inline double frame_error_rate(const WbpWeights& w, const CodeSpec& code, const DecoderConfig& cfg,
                               std::span<const LlrWord> words, unsigned workers) {
  auto dec = cfg;
  dec.early_termination = true;
  const BitWord zero(code.n());
  std::vector<std::uint8_t> err(words.size(), 0);
  parallel_for(words.size(), workers, [&](std::size_t i) { err[i] = !wbp_decode(w, code, words[i], dec).success(zero); });
  std::size_t total = 0;
  for (auto e : err) total += e;
  return words.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(words.size());
}

namespace detail {

inline constexpr std::uint64_t kValidationStream = 0x76616c;  // "val"
inline constexpr std::uint64_t kStepStream = 0x73746570;      // "step"

struct DrawnBatch {
  std::vector<TrainingWord> words;
  std::optional<double> filtered_fraction;
  std::size_t resamples = 0;
};

inline DrawnBatch draw_training_batch(const WbpWeights& w, const CodeSpec& code, const DecoderConfig& cfg,
                                      const TrainConfig& tc, Rng& rng) {
  const BitWord zero(code.n());
  const auto b = tc.batch_size();
  DrawnBatch out;

  if (tc.strategy == Strategy::kRandom) {
    out.words = sample_per_snr(code, tc.snr_set, tc.batch_per_snr, rng);
    return out;
  }

  SamplerConfig sc;
  sc.snr_set = tc.snr_set;
  sc.d_max = tc.d_max;
  sc.prior = tc.prior;
  sc.target_batch = b;
  sc.oversample_factor = tc.oversample_factor;
  sc.refill = tc.refill;

  std::size_t drawn = 0, kept = 0;
  for (std::size_t attempt = 0;; ++attempt) {
    if (tc.strategy == Strategy::kDistance) {
      const auto a = sc.distance_set();
      const auto need = tc.refill ? b - out.words.size() : b;
      auto q = sample_distance_constrained(code, sc.snr_set, a, need, rng, sc.acceptance_floor).words;
      drawn += q.size();
      auto survivors = filter_by_distance(w, code, cfg, q, zero, tc.workers);
      kept += survivors.size();
      for (auto& s : survivors) out.words.push_back(std::move(s));
      if (tc.refill && out.words.size() < b && attempt < tc.max_resample) continue;
    } else {
      if (tc.strategy == Strategy::kReliability) sc.d_max = 0;
      auto rb = sample_by_reliability(w, code, cfg, sc, rng, tc.workers);
      drawn += rb.drawn;
      kept += rb.filtered;
      out.words = std::move(rb.words);
    }
    if (!out.words.empty()) break;
    if (attempt + 1 >= tc.max_resample)
      throw DegenerateData("training batch was empty after filtering in " + std::to_string(tc.max_resample) +
                           " consecutive draws");
    ++out.resamples;
  }
  if (drawn) out.filtered_fraction = 1.0 - static_cast<double>(kept) / static_cast<double>(drawn);
  return out;
}

}  // namespace detail

/// Trains from all-ones weights until the validation FER has not improved
/// for `patience` consecutive checks (or max_steps), returning the best
/// weights seen. Row s of the history describes the model after s updates:
/// the loss of batch s before its update and, every validate_every steps,
/// the validation FER.
inline TrainResult train(const CodeSpec& code, const DecoderConfig& cfg, const TrainConfig& tc, const Rng& rng) {
  cfg.validate();
  tc.validate();

  TrainResult result;
  auto w = init_weights(code, cfg.tau, tc.tied);
  OptimizerState opt;

  auto val_rng = rng.split(detail::kValidationStream);
  const double val_sigma = snr_to_sigma(tc.validation_snr, code.rate());
  std::vector<LlrWord> val_words;
  val_words.reserve(tc.validation_frames);
  for (std::size_t i = 0; i < tc.validation_frames; ++i) val_words.push_back(zero_codeword_llr(code.n(), val_sigma, val_rng));

  const auto step_rng = rng.split(detail::kStepStream);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  result.weights = w;

  for (std::size_t step = 0;; ++step) {
    HistoryRow row;
    row.step = step;
    row.lr = tc.learning_rate;

    const bool last = step == tc.max_steps;
    if (step % tc.validate_every == 0 || last) {
      const double fer = frame_error_rate(w, code, cfg, val_words, tc.workers);
      row.val_fer = fer;
      if (fer < best) {
        best = fer;
        since_best = 0;
        result.weights = w;
        result.best_step = step;
      } else {
        ++since_best;
      }
      if (since_best >= tc.patience || last) {
        result.history.push_back(row);
        break;
      }
    }

    auto batch_rng = step_rng.split(step);
    auto drawn = detail::draw_training_batch(w, code, cfg, tc, batch_rng);
    row.batch_size = drawn.words.size();
    row.filtered_fraction = drawn.filtered_fraction;
    row.resamples = drawn.resamples;

    auto bg = batch_gradient(w, code, cfg, drawn.words, tc.clamp_gradient, tc.workers);
    if (!std::isfinite(bg.loss))
      throw NumericalError("training diverged: non-finite loss at step " + std::to_string(step));
    row.loss = bg.loss;
    rmsprop_step(opt, w.params(), bg.grad, tc.learning_rate, tc.rmsprop);
    for (double x : w.params())
      if (!std::isfinite(x)) throw NumericalError("training diverged: non-finite weight after step " + std::to_string(step));
    result.history.push_back(row);
  }
  result.best_val_fer = best;
  return result;
}

inline void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows) {
  out << "step,loss,val_fer,lr,batch_size,filtered_fraction,resamples\n";
  char buf[64];
  auto opt = [&](const std::optional<double>& x, const char* fmt) {
    if (!x) return;
    std::snprintf(buf, sizeof(buf), fmt, *x);
    out << buf;
  };
  for (const auto& r : rows) {
    out << r.step << ',';
    opt(r.loss, "%.9g");
    out << ',';
    opt(r.val_fer, "%.6g");
    std::snprintf(buf, sizeof(buf), ",%.6g,%zu,", r.lr, r.batch_size);
    out << buf;
    opt(r.filtered_fraction, "%.6g");
    out << ',' << r.resamples << '\n';
  }
}

}  // namespace activedec
