#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/word.hpp"

namespace activedec {

struct DecoderConfig {
  std::size_t tau = 5;
  /// Magnitude bound for LLR-domain messages (v->c sums and c->v outputs).
  double clip = 10.0;
  bool early_termination = true;
  /// arctanh arguments are clamped into [-1 + eps, 1 - eps].
  double arctanh_eps = 1e-7;

  void validate() const {
    if (tau < 1) throw std::invalid_argument("decoder: tau must be >= 1");
    if (!(clip > 0.0)) throw std::invalid_argument("decoder: clip must be > 0");
    if (!(arctanh_eps > 0.0 && arctanh_eps < 1e-3))
      throw std::invalid_argument("decoder: arctanh_eps must be in (0, 1e-3)");
  }
};

struct DecodeResult {
  BitWord bits;
  /// Posterior LLRs of the last marginalization that was executed.
  std::vector<double> soft;
  std::size_t iterations_used = 0;
  bool early_stopped = false;

  /// The success indicator T against a known transmitted word.
  bool success(const BitWord& truth) const { return bits == truth; }
};

namespace detail {

/// Scratch and per-iteration state of a flooding schedule.
///
/// After iteration t: `s` holds the clipped v->c LLR sums, `u = tanh(s/2)`,
/// `p` the guarded extrinsic check products, `c2v` the clipped check outputs
/// and `posterior` the marginalization tap. Masks flag where a clamp fired.
struct FloodState {
  std::vector<double> s, u, p, c2v, c2v_prev, posterior;
  std::vector<std::uint8_t> s_clipped, p_guarded, c2v_clipped;
  std::vector<double> prefix, suffix;

  void reset(const CodeSpec& code) {
    const auto e = code.num_edges();
    s.assign(e, 0.0);
    u.assign(e, 0.0);
    p.assign(e, 0.0);
    c2v.assign(e, 0.0);
    c2v_prev.assign(e, 0.0);
    posterior.assign(code.n(), 0.0);
    s_clipped.assign(e, 0);
    p_guarded.assign(e, 0);
    c2v_clipped.assign(e, 0);
  }
};

inline double clip_value(double x, double bound, std::uint8_t& mask) {
  if (x > bound) {
    mask = 1;
    return bound;
  }
  if (x < -bound) {
    mask = 1;
    return -bound;
  }
  mask = 0;
  return x;
}

/// Runs up to cfg.tau flooding iterations.
///
/// `pair_weight(t, e_out, k, e_in)` scales incoming message e_in (the k-th
/// other edge at the variable) when forming outgoing message e_out in
/// iteration t; `out_weight(e)` scales c->v message e in the marginalization.
/// Unit weights give plain BP with identical floating-point operations.
/// `on_tap(t, state)` is called after every marginalization and returns true
/// to stop. Returns the number of iterations executed.
template <class PairWeight, class OutWeight, class OnTap>
std::size_t flood(const CodeSpec& code, const LlrWord& z, const DecoderConfig& cfg, PairWeight&& pair_weight,
                  OutWeight&& out_weight, FloodState& st, OnTap&& on_tap) {
  if (z.size() != code.n())
    throw std::invalid_argument("decoder: LLR length " + std::to_string(z.size()) + " != N " +
                                std::to_string(code.n()));
  cfg.validate();
  st.reset(code);
  const double guard = 1.0 - cfg.arctanh_eps;

  for (std::size_t t = 0; t < cfg.tau; ++t) {
    std::swap(st.c2v_prev, st.c2v);

    for (std::size_t v = 0; v < code.n(); ++v) {
      const auto& es = code.var_edges(v);
      for (std::size_t i = 0; i < es.size(); ++i) {
        const auto e_out = es[i];
        double acc = z[v];
        std::size_t k = 0;
        for (std::size_t j = 0; j < es.size(); ++j) {
          if (j == i) continue;
          acc += pair_weight(t, e_out, k, es[j]) * st.c2v_prev[es[j]];
          ++k;
        }
        st.s[e_out] = clip_value(acc, cfg.clip, st.s_clipped[e_out]);
        st.u[e_out] = std::tanh(0.5 * st.s[e_out]);
      }
    }

    for (std::size_t c = 0; c < code.checks(); ++c) {
      const auto& es = code.check_edges(c);
      const auto d = es.size();
      st.prefix.resize(d + 1);
      st.suffix.resize(d + 1);
      st.prefix[0] = 1.0;
      st.suffix[d] = 1.0;
      for (std::size_t i = 0; i < d; ++i) st.prefix[i + 1] = st.prefix[i] * st.u[es[i]];
      for (std::size_t i = d; i-- > 0;) st.suffix[i] = st.suffix[i + 1] * st.u[es[i]];
      for (std::size_t i = 0; i < d; ++i) {
        const auto e = es[i];
        double prod = st.prefix[i] * st.suffix[i + 1];
        st.p_guarded[e] = 0;
        if (prod > guard) {
          prod = guard;
          st.p_guarded[e] = 1;
        } else if (prod < -guard) {
          prod = -guard;
          st.p_guarded[e] = 1;
        }
        st.p[e] = prod;
        st.c2v[e] = clip_value(2.0 * std::atanh(prod), cfg.clip, st.c2v_clipped[e]);
      }
    }

    for (std::size_t v = 0; v < code.n(); ++v) {
      double acc = z[v];
      for (auto e : code.var_edges(v)) acc += out_weight(e) * st.c2v[e];
      if (!std::isfinite(acc))
        throw NumericalError("decoder: non-finite posterior at iteration " + std::to_string(t + 1) + ", bit " +
                             std::to_string(v));
      st.posterior[v] = acc;
    }

    if (on_tap(t, st)) return t + 1;
  }
  return cfg.tau;
}

inline bool posterior_is_codeword(const CodeSpec& code, const std::vector<double>& posterior) {
  for (std::size_t c = 0; c < code.checks(); ++c) {
    std::uint8_t acc = 0;
    for (auto e : code.check_edges(c)) acc ^= hard_bit(posterior[code.edges()[e].var]);
    if (acc) return false;
  }
  return true;
}

inline DecodeResult finish(const FloodState& st, std::size_t iterations, bool stopped) {
  DecodeResult r;
  r.bits = BitWord(st.posterior.size());
  for (std::size_t v = 0; v < st.posterior.size(); ++v) r.bits[v] = hard_bit(st.posterior[v]);
  r.soft = st.posterior;
  r.iterations_used = iterations;
  r.early_stopped = stopped;
  return r;
}

}  // namespace detail

/// Plain sum-product decoding with a flooding schedule. With early
/// termination on, stops after the first iteration whose hard decision has a
/// zero syndrome.
inline DecodeResult bp_decode(const CodeSpec& code, const LlrWord& z, const DecoderConfig& cfg) {
  thread_local detail::FloodState st;
  bool stopped = false;
  auto unit_pair = [](std::size_t, std::size_t, std::size_t, std::size_t) { return 1.0; };
  auto unit_out = [](std::size_t) { return 1.0; };
  const auto iters = detail::flood(code, z, cfg, unit_pair, unit_out, st, [&](std::size_t, const detail::FloodState& s) {
    stopped = cfg.early_termination && detail::posterior_is_codeword(code, s.posterior);
    return stopped;
  });
  return detail::finish(st, iters, stopped);
}

}  // namespace activedec
