#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "activedec/bp.hpp"
#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/parallel.hpp"
#include "activedec/rng.hpp"

namespace activedec {

enum class ErrorUnit { kFrame, kBit };

struct StopRule {
  std::uint64_t min_errors = 1000;
  std::uint64_t max_frames = 100000000;
  ErrorUnit unit = ErrorUnit::kFrame;

  void validate() const {
    if (max_frames < 1) throw std::invalid_argument("stop rule: max_frames must be >= 1");
  }
};

struct EvalPoint {
  double snr_db = 0.0;
  std::uint64_t frames = 0;
  std::uint64_t frame_errors = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t iterations = 0;
  double ber = 0.0;
  double fer = 0.0;
  double avg_iterations = 0.0;
  /// Stopped at max_frames before reaching the error target.
  bool censored = false;
  double seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalPoint> points;
};

/// Integer dB grid 1..10.
inline std::vector<double> default_snr_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(i);
  return g;
}

namespace detail {

inline constexpr std::uint64_t kEvalBlock = 64;

struct BlockTally {
  std::uint64_t frames = 0;
  std::vector<std::uint32_t> frame_bit_errors;
  std::vector<std::uint32_t> frame_iterations;
};

}  // namespace detail

/// Streams all-zero-codeword frames through the channel and `decoder` at each
/// SNR until the error target of `stop` is met or max_frames is reached.
///
/// Frames are generated in fixed blocks of 64, block b of point i drawing from
/// rng.split(i).split(b). Blocks run in parallel rounds but are merged in
/// block order frame by frame, and the point stops at the exact frame that
/// meets the target, so the report depends only on the seed, never on the
/// worker count.
///
/// `decoder(const LlrWord&) -> DecodeResult` must be safe to call
/// concurrently.
template <class Decoder>
EvalReport monte_carlo(Decoder&& decoder, const CodeSpec& code, std::span<const double> snrs, const StopRule& stop,
                       const Rng& rng, unsigned workers = 1) {
  stop.validate();
  if (snrs.empty()) throw std::invalid_argument("monte_carlo: snr list must not be empty");
  workers = resolve_workers(workers);
  const auto n = code.n();
  const BitWord zero(n);

  EvalReport report;
  for (std::size_t pi = 0; pi < snrs.size(); ++pi) {
    const auto start = std::chrono::steady_clock::now();
    EvalPoint pt;
    pt.snr_db = snrs[pi];
    const double sigma = snr_to_sigma(pt.snr_db, code.rate());
    const auto point_rng = rng.split(pi);

    auto reached = [&] {
      const auto errs = stop.unit == ErrorUnit::kFrame ? pt.frame_errors : pt.bit_errors;
      return stop.min_errors > 0 && errs >= stop.min_errors;
    };

    std::uint64_t next_block = 0;
    bool done = false;
    std::vector<detail::BlockTally> round;
    while (!done) {
      round.clear();
      for (unsigned k = 0; k < workers; ++k) {
        const auto first = (next_block + k) * detail::kEvalBlock;
        if (first >= stop.max_frames) break;
        round.push_back({std::min(detail::kEvalBlock, stop.max_frames - first), {}, {}});
      }
      parallel_for(round.size(), workers, [&](std::size_t k) {
        auto& b = round[k];
        auto brng = point_rng.split(next_block + k);
        b.frame_bit_errors.resize(b.frames);
        b.frame_iterations.resize(b.frames);
        for (std::uint64_t f = 0; f < b.frames; ++f) {
          const auto z = zero_codeword_llr(n, sigma, brng);
          const auto r = decoder(z);
          b.frame_bit_errors[f] = static_cast<std::uint32_t>(hamming_distance(r.bits, zero));
          b.frame_iterations[f] = static_cast<std::uint32_t>(r.iterations_used);
        }
      });
      next_block += round.size();

      for (const auto& b : round) {
        for (std::uint64_t f = 0; f < b.frames; ++f) {
          ++pt.frames;
          pt.bit_errors += b.frame_bit_errors[f];
          pt.frame_errors += b.frame_bit_errors[f] > 0;
          pt.iterations += b.frame_iterations[f];
          if (reached() || pt.frames >= stop.max_frames) {
            done = true;
            break;
          }
        }
        if (done) break;
      }
      if (round.empty()) done = true;
    }

    pt.censored = !reached();
    pt.fer = pt.frames ? static_cast<double>(pt.frame_errors) / static_cast<double>(pt.frames) : 0.0;
    pt.ber = pt.frames ? static_cast<double>(pt.bit_errors) / (static_cast<double>(pt.frames) * static_cast<double>(n))
                       : 0.0;
    pt.avg_iterations = pt.frames ? static_cast<double>(pt.iterations) / static_cast<double>(pt.frames) : 0.0;
    pt.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.points.push_back(pt);
  }
  return report;
}

inline constexpr const char* kReportHeader = "snr_db,frames,frame_errors,bit_errors,ber,fer,avg_iterations,censored";

inline void write_report(std::ostream& out, const EvalReport& report) {
  out << kReportHeader << '\n';
  char buf[256];
  for (const auto& p : report.points) {
    std::snprintf(buf, sizeof(buf), "%.6g,%llu,%llu,%llu,%.6g,%.6g,%.6g,%d\n", p.snr_db,
                  static_cast<unsigned long long>(p.frames), static_cast<unsigned long long>(p.frame_errors),
                  static_cast<unsigned long long>(p.bit_errors), p.ber, p.fer, p.avg_iterations, p.censored ? 1 : 0);
    out << buf;
  }
}

/// Parses a CSV produced by write_report. Counts are exact; rates carry the
/// six significant digits that were written.
inline EvalReport read_report(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kReportHeader) throw ParseError(1, "expected report header");
  EvalReport r;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError(lineno, "expected 8 fields, got " + std::to_string(f.size()));
    try {
      EvalPoint p;
      p.snr_db = std::stod(f[0]);
      p.frames = std::stoull(f[1]);
      p.frame_errors = std::stoull(f[2]);
      p.bit_errors = std::stoull(f[3]);
      p.ber = std::stod(f[4]);
      p.fer = std::stod(f[5]);
      p.avg_iterations = std::stod(f[6]);
      p.censored = f[7] == "1";
      r.points.push_back(p);
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "malformed number");
    }
  }
  return r;
}

struct EvalMetadata {
  std::string code_name;
  std::string decoder_kind;
  /// FNV-1a of the weights file contents; empty for plain BP.
  std::string weights_checksum;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// key=value lines. Wall-clock seconds are the only nondeterministic fields.
inline void write_metadata(std::ostream& out, const EvalMetadata& m, const EvalReport& r) {
  out << "code=" << m.code_name << '\n'
      << "decoder=" << m.decoder_kind << '\n'
      << "weights_checksum=" << (m.weights_checksum.empty() ? "none" : m.weights_checksum) << '\n'
      << "seed=" << m.seed << '\n'
      << "workers=" << m.workers << '\n';
  char buf[64];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof(buf), "wall_seconds[%.6g]=%.3f\n", p.snr_db, p.seconds);
    out << buf;
  }
}

}  // namespace activedec
