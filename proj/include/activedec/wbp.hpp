#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "activedec/bp.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/word.hpp"

namespace activedec {

/// Trainable parameters of the unrolled weighted decoder.
///
/// Parameters are stored flat: `tau` layers of v->c pair weights followed by
/// one output-edge set shared by every marginalization tap. In the full
/// (untied) layout, outgoing edge e_out at variable v owns one weight per
/// other incoming edge at v, in var_edges order; in the tied layout a layer
/// holds one weight per incoming edge, independent of the outgoing check.
/// Channel weights are fixed to 1 and are not parameters.
class WbpWeights {
 public:
  WbpWeights() = default;

  WbpWeights(const CodeSpec& code, std::size_t tau, bool tied, double fill = 1.0)
      : tau_(tau), tied_(tied), edges_(code.num_edges()), code_checksum_(code.checksum()), code_name_(code.name()) {
    if (tau < 1) throw std::invalid_argument("weights: tau must be >= 1");
    pair_offset_.assign(edges_ + 1, 0);
    for (std::size_t v = 0; v < code.n(); ++v) {
      const auto d = code.var_edges(v).size();
      for (auto e : code.var_edges(v)) pair_offset_[e + 1] = d - 1;
    }
    for (std::size_t e = 0; e < edges_; ++e) pair_offset_[e + 1] += pair_offset_[e];
    layer_size_ = tied_ ? edges_ : pair_offset_[edges_];
    params_.assign(tau_ * layer_size_ + edges_, fill);
  }

  std::size_t tau() const noexcept { return tau_; }
  bool tied() const noexcept { return tied_; }
  std::size_t num_edges() const noexcept { return edges_; }
  std::size_t layer_size() const noexcept { return layer_size_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::uint64_t code_checksum() const noexcept { return code_checksum_; }
  const std::string& code_name() const noexcept { return code_name_; }

  /// Flat index of the weight on incoming edge e_in (k-th other edge at the
  /// variable) when forming e_out in layer t.
  std::size_t pair_index(std::size_t t, std::size_t e_out, std::size_t k, std::size_t e_in) const noexcept {
    return t * layer_size_ + (tied_ ? e_in : pair_offset_[e_out] + k);
  }
  std::size_t output_index(std::size_t e) const noexcept { return tau_ * layer_size_ + e; }

  double pair(std::size_t t, std::size_t e_out, std::size_t k, std::size_t e_in) const noexcept {
    return params_[pair_index(t, e_out, k, e_in)];
  }
  double output(std::size_t e) const noexcept { return params_[output_index(e)]; }
  double& output(std::size_t e) noexcept { return params_[output_index(e)]; }

  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  bool same_shape(const WbpWeights& o) const noexcept {
    return tau_ == o.tau_ && tied_ == o.tied_ && edges_ == o.edges_ && code_checksum_ == o.code_checksum_ &&
           params_.size() == o.params_.size();
  }

  /// Throws ArtifactMismatch unless these weights were built for `code` and `tau`.
  void check_compatible(const CodeSpec& code, std::size_t tau) const {
    if (code_checksum_ != code.checksum() || edges_ != code.num_edges())
      throw ArtifactMismatch("weights were trained for code '" + code_name_ + "', not '" + code.name() +
                             "' (parity-check checksum differs)");
    if (tau_ != tau)
      throw ArtifactMismatch("weights have tau=" + std::to_string(tau_) + " but decoder uses tau=" +
                             std::to_string(tau));
  }

  friend bool operator==(const WbpWeights& a, const WbpWeights& b) {
    return a.same_shape(b) && a.params_ == b.params_;
  }

 private:
  std::size_t tau_ = 0;
  bool tied_ = false;
  std::size_t edges_ = 0;
  std::size_t layer_size_ = 0;
  std::uint64_t code_checksum_ = 0;
  std::string code_name_;
  std::vector<std::size_t> pair_offset_;
  std::vector<double> params_;
};

/// All-ones initialization; reproduces plain BP exactly.
inline WbpWeights init_weights(const CodeSpec& code, std::size_t tau, bool tied = false) {
  return WbpWeights(code, tau, tied, 1.0);
}

/// Everything the backward pass needs from one forward through all tau
/// iterations. Per-edge arrays are laid out [layer][edge], per-bit arrays
/// [tap][bit].
struct ForwardRecord {
  std::size_t tau = 0;
  std::size_t edges = 0;
  std::size_t n = 0;
  LlrWord z;
  std::vector<double> s, u, p, c2v;
  std::vector<std::uint8_t> s_clipped, p_guarded, c2v_clipped;
  /// Marginalization bracket z_v + sum w_out c2v (an LLR) and its sigmoid
  /// probability of bit '1'.
  std::vector<double> tap_llr, tap_prob;

  double edge(const std::vector<double>& a, std::size_t t, std::size_t e) const { return a[t * edges + e]; }
  double prob(std::size_t t, std::size_t v) const { return tap_prob[t * n + v]; }
  double llr(std::size_t t, std::size_t v) const { return tap_llr[t * n + v]; }

  /// Hard decision of tap t (1-based), by the sign of the bracket.
  BitWord decision(std::size_t t) const {
    BitWord b(n);
    for (std::size_t v = 0; v < n; ++v) b[v] = hard_bit(llr(t - 1, v));
    return b;
  }

  bool any_clamp() const {
    for (auto m : s_clipped)
      if (m) return true;
    for (auto m : p_guarded)
      if (m) return true;
    for (auto m : c2v_clipped)
      if (m) return true;
    return false;
  }
};

/// sigma(-x) = 1 / (1 + e^x), without overflow for large |x|.
inline double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

namespace detail {

inline auto weighted_pair(const WbpWeights& w) {
  return [&w](std::size_t t, std::size_t e_out, std::size_t k, std::size_t e_in) { return w.pair(t, e_out, k, e_in); };
}
inline auto weighted_out(const WbpWeights& w) {
  return [&w](std::size_t e) { return w.output(e); };
}

inline void check_dims(const WbpWeights& w, const CodeSpec& code, const DecoderConfig& cfg) {
  if (w.num_edges() != code.num_edges() || w.code_checksum() != code.checksum())
    throw std::invalid_argument("wbp: weights do not match code '" + code.name() + "'");
  if (w.tau() != cfg.tau)
    throw std::invalid_argument("wbp: weights have tau=" + std::to_string(w.tau()) + ", config has tau=" +
                                std::to_string(cfg.tau));
}

}  // namespace detail

/// Full forward through all tau iterations, recording every layer and tap.
/// Early termination is never applied here.
inline ForwardRecord wbp_forward(const WbpWeights& w, const CodeSpec& code, const LlrWord& z,
                                 const DecoderConfig& cfg) {
  detail::check_dims(w, code, cfg);
  thread_local detail::FloodState st;
  ForwardRecord rec;
  rec.tau = cfg.tau;
  rec.edges = code.num_edges();
  rec.n = code.n();
  rec.z = z;
  const auto le = rec.tau * rec.edges, ln = rec.tau * rec.n;
  rec.s.resize(le);
  rec.u.resize(le);
  rec.p.resize(le);
  rec.c2v.resize(le);
  rec.s_clipped.resize(le);
  rec.p_guarded.resize(le);
  rec.c2v_clipped.resize(le);
  rec.tap_llr.resize(ln);
  rec.tap_prob.resize(ln);

  detail::flood(code, z, cfg, detail::weighted_pair(w), detail::weighted_out(w), st,
                [&](std::size_t t, const detail::FloodState& s) {
                  const auto eo = t * rec.edges, no = t * rec.n;
                  std::copy(s.s.begin(), s.s.end(), rec.s.begin() + eo);
                  std::copy(s.u.begin(), s.u.end(), rec.u.begin() + eo);
                  std::copy(s.p.begin(), s.p.end(), rec.p.begin() + eo);
                  std::copy(s.c2v.begin(), s.c2v.end(), rec.c2v.begin() + eo);
                  std::copy(s.s_clipped.begin(), s.s_clipped.end(), rec.s_clipped.begin() + eo);
                  std::copy(s.p_guarded.begin(), s.p_guarded.end(), rec.p_guarded.begin() + eo);
                  std::copy(s.c2v_clipped.begin(), s.c2v_clipped.end(), rec.c2v_clipped.begin() + eo);
                  for (std::size_t v = 0; v < rec.n; ++v) {
                    rec.tap_llr[no + v] = s.posterior[v];
                    rec.tap_prob[no + v] = sigmoid_neg(s.posterior[v]);
                  }
                  return false;
                });
  return rec;
}

/// Decoding with trained weights; honors cfg.early_termination like bp_decode.
inline DecodeResult wbp_decode(const WbpWeights& w, const CodeSpec& code, const LlrWord& z, const DecoderConfig& cfg) {
  detail::check_dims(w, code, cfg);
  thread_local detail::FloodState st;
  bool stopped = false;
  const auto iters = detail::flood(code, z, cfg, detail::weighted_pair(w), detail::weighted_out(w), st,
                                   [&](std::size_t, const detail::FloodState& s) {
                                     stopped = cfg.early_termination && detail::posterior_is_codeword(code, s.posterior);
                                     return stopped;
                                   });
  return detail::finish(st, iters, stopped);
}

// ---------------------------------------------------------------------------
// Serialization
//
//   activedec-wbp-weights 1
//   code <name>
//   code_checksum <16 hex digits>
//   n <N>
//   edges <E>
//   tau <tau>
//   tied <0|1>
//   pair_weights <count>
//   <layer> <v> <h_in> <h_out> <value>     (h_out is '*' when tied)
//   ...
//   output_weights <E>
//   <v> <h_in> <value>
//   ...
//   end
//
// Indices are 0-based. Values use the shortest decimal form that round-trips
// exactly, so save followed by load is bit-exact.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, std::size_t line) {
  double x = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(line, "invalid number '" + tok + "'");
  return x;
}

}  // namespace detail

inline std::string serialize_weights(const WbpWeights& w, const CodeSpec& code) {
  if (w.code_checksum() != code.checksum()) throw std::invalid_argument("serialize_weights: code mismatch");
  std::ostringstream out;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(w.code_checksum()));
  out << "activedec-wbp-weights 1\n"
      << "code " << code.name() << '\n'
      << "code_checksum " << hex << '\n'
      << "n " << code.n() << '\n'
      << "edges " << code.num_edges() << '\n'
      << "tau " << w.tau() << '\n'
      << "tied " << (w.tied() ? 1 : 0) << '\n'
      << "pair_weights " << w.tau() * w.layer_size() << '\n';
  const auto& E = code.edges();
  for (std::size_t t = 0; t < w.tau(); ++t) {
    if (w.tied()) {
      for (std::size_t e = 0; e < code.num_edges(); ++e)
        out << t << ' ' << E[e].var << ' ' << E[e].check << " * " << detail::format_double(w.params()[t * w.layer_size() + e])
            << '\n';
      continue;
    }
    for (std::size_t e_out = 0; e_out < code.num_edges(); ++e_out) {
      const auto v = E[e_out].var;
      std::size_t k = 0;
      for (auto e_in : code.var_edges(v)) {
        if (e_in == e_out) continue;
        out << t << ' ' << v << ' ' << E[e_in].check << ' ' << E[e_out].check << ' '
            << detail::format_double(w.pair(t, e_out, k, e_in)) << '\n';
        ++k;
      }
    }
  }
  out << "output_weights " << code.num_edges() << '\n';
  for (std::size_t e = 0; e < code.num_edges(); ++e)
    out << E[e].var << ' ' << E[e].check << ' ' << detail::format_double(w.output(e)) << '\n';
  out << "end\n";
  return out.str();
}

/// Parses a weights file and validates it against `code`. Index columns must
/// follow the canonical order written by serialize_weights.
inline WbpWeights deserialize_weights(std::string_view text, const CodeSpec& code) {
  auto lines = detail::split_lines(text);
  std::size_t pos = 0;
  auto next = [&](const char* what) -> std::vector<std::string> {
    while (pos < lines.size() && lines[pos].find_first_not_of(" \t") == std::string::npos) ++pos;
    if (pos >= lines.size()) throw ParseError(lines.size(), std::string("unexpected end of file, expected ") + what);
    std::istringstream in(lines[pos++]);
    std::vector<std::string> toks;
    std::string t;
    while (in >> t) toks.push_back(t);
    return toks;
  };
  auto keyed = [&](const char* key) {
    auto toks = next(key);
    if (toks.size() != 2 || toks[0] != key) throw ParseError(pos, std::string("expected '") + key + " <value>'");
    return toks[1];
  };
  auto to_size = [&](const std::string& s) -> std::size_t {
    std::size_t x = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(pos, "invalid integer '" + s + "'");
    return x;
  };

  auto magic = next("header");
  if (magic.size() != 2 || magic[0] != "activedec-wbp-weights") throw ParseError(pos, "not a weights file");
  if (magic[1] != "1") throw ParseError(pos, "unsupported weights format version " + magic[1]);
  const auto name = keyed("code");
  const auto checksum = std::stoull(keyed("code_checksum"), nullptr, 16);
  const auto n = to_size(keyed("n"));
  const auto edges = to_size(keyed("edges"));
  const auto tau = to_size(keyed("tau"));
  const auto tied_s = keyed("tied");
  if (tied_s != "0" && tied_s != "1") throw ParseError(pos, "tied must be 0 or 1");

  if (checksum != code.checksum() || n != code.n() || edges != code.num_edges())
    throw ArtifactMismatch("weights file belongs to code '" + name + "', not '" + code.name() + "'");

  WbpWeights w(code, tau, tied_s == "1", 0.0);
  const auto pair_count = to_size(keyed("pair_weights"));
  if (pair_count != tau * w.layer_size())
    throw ParseError(pos, "pair_weights count " + std::to_string(pair_count) + ", expected " +
                              std::to_string(tau * w.layer_size()));

  const auto& E = code.edges();
  auto expect = [&](const std::vector<std::string>& toks, std::size_t i, std::size_t value) {
    if (to_size(toks[i]) != value) throw ParseError(pos, "index column " + std::to_string(i + 1) + " is out of order");
  };
  for (std::size_t t = 0; t < tau; ++t) {
    if (w.tied()) {
      for (std::size_t e = 0; e < edges; ++e) {
        auto toks = next("pair weight");
        if (toks.size() != 5 || toks[3] != "*") throw ParseError(pos, "expected 'layer v h_in * value'");
        expect(toks, 0, t);
        expect(toks, 1, E[e].var);
        expect(toks, 2, E[e].check);
        w.params()[t * w.layer_size() + e] = detail::parse_double(toks[4], pos);
      }
      continue;
    }
    for (std::size_t e_out = 0; e_out < edges; ++e_out) {
      const auto v = E[e_out].var;
      std::size_t k = 0;
      for (auto e_in : code.var_edges(v)) {
        if (e_in == e_out) continue;
        auto toks = next("pair weight");
        if (toks.size() != 5) throw ParseError(pos, "expected 'layer v h_in h_out value'");
        expect(toks, 0, t);
        expect(toks, 1, v);
        expect(toks, 2, E[e_in].check);
        expect(toks, 3, E[e_out].check);
        w.params()[w.pair_index(t, e_out, k, e_in)] = detail::parse_double(toks[4], pos);
        ++k;
      }
    }
  }
  if (to_size(keyed("output_weights")) != edges) throw ParseError(pos, "output_weights count must equal edges");
  for (std::size_t e = 0; e < edges; ++e) {
    auto toks = next("output weight");
    if (toks.size() != 3) throw ParseError(pos, "expected 'v h_in value'");
    expect(toks, 0, E[e].var);
    expect(toks, 1, E[e].check);
    w.output(e) = detail::parse_double(toks[2], pos);
  }
  auto end = next("end");
  if (end.size() != 1 || end[0] != "end") throw ParseError(pos, "expected 'end'");
  for (double x : w.params())
    if (!std::isfinite(x)) throw ParseError(0, "weights file contains non-finite values");
  return w;
}

inline void save_weights(const std::string& path, const WbpWeights& w, const CodeSpec& code) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weights file '" + path + "'");
  out << serialize_weights(w, code);
  if (!out) throw std::runtime_error("error writing weights file '" + path + "'");
}

inline WbpWeights load_weights(const std::string& path, const CodeSpec& code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_weights(buf.str(), code);
}

}  // namespace activedec
