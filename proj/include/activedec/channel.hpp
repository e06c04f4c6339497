#pragma once

#include <cmath>
#include <stdexcept>

#include "activedec/rng.hpp"
#include "activedec/word.hpp"

namespace activedec {

/// Noise standard deviation for Eb/N0 `snr_db` at code rate `rate`:
/// sigma = 1 / sqrt(2 * rate * 10^(snr_db / 10)).
inline double snr_to_sigma(double snr_db, double rate) {
  if (!(rate > 0.0) || rate > 1.0) throw std::invalid_argument("snr_to_sigma: rate must be in (0, 1]");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_to_sigma: snr must be finite");
  return 1.0 / std::sqrt(2.0 * rate * std::pow(10.0, snr_db / 10.0));
}

/// AWGN operating point. sigma is derived, never set directly.
struct ChannelSpec {
  double snr_db;
  double rate;
  double sigma;

  ChannelSpec(double snr, double r) : snr_db(snr), rate(r), sigma(snr_to_sigma(snr, r)) {}
};

/// Bit 0 -> +1, bit 1 -> -1.
inline ReceivedWord modulate_bpsk(const BitWord& c) {
  ReceivedWord x(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) x[i] = c[i] ? -1.0 : 1.0;
  return x;
}

inline ReceivedWord awgn(const ReceivedWord& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("awgn: sigma must be >= 0");
  ReceivedWord y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + sigma * rng.normal();
  return y;
}

/// z_v = 2 y_v / sigma^2.
inline LlrWord llr(const ReceivedWord& y, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("llr: sigma must be > 0");
  const double scale = 2.0 / (sigma * sigma);
  LlrWord z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = scale * y[i];
  return z;
}

/// Bit is 1 iff z < 0 (probability of '1' strictly above one half); z = 0 -> 0.
inline std::uint8_t hard_bit(double z) noexcept { return z < 0.0 ? 1 : 0; }

inline BitWord hard_decision(const LlrWord& z) {
  BitWord c(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) c[i] = hard_bit(z[i]);
  return c;
}

/// Channel LLRs for the all-zero codeword at `sigma`.
inline LlrWord zero_codeword_llr(std::size_t n, double sigma, Rng& rng) {
  const double scale = 2.0 / (sigma * sigma);
  LlrWord z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = scale * (1.0 + sigma * rng.normal());
  return z;
}

}  // namespace activedec
