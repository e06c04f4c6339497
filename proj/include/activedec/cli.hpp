#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "activedec/bp.hpp"
#include "activedec/code.hpp"
#include "activedec/config.hpp"
#include "activedec/errors.hpp"
#include "activedec/eval.hpp"
#include "activedec/rng.hpp"
#include "activedec/sampling.hpp"
#include "activedec/training.hpp"
#include "activedec/wbp.hpp"

namespace activedec {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMismatch = 3,
  kExitDegenerate = 4,
};

namespace cli {

inline constexpr std::uint64_t kEvalStream = 0x6576616c;    // "eval"
inline constexpr std::uint64_t kPriorStream = 0x7072696f72;  // "prior"

/// Maps the library's error types to exit codes and prints the message.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArtifactMismatch& e) {
    err << "artifact mismatch: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const ParseError& e) {
    err << "malformed artifact: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const DegenerateData& e) {
    err << "degenerate data: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline CodeSpec load_configured_code(const RunConfig& rc) {
  return load_code(rc.code_path, rc.code_format, rc.code_name, rc.t_h);
}

inline std::filesystem::path prepare_out_dir(const RunConfig& rc) {
  std::filesystem::path dir(rc.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + rc.out_dir + "': " + ec.message());
  return dir;
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  writer(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactMismatch("cannot open weights file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cli

/// Trains weights and writes weights.txt, history.csv and
/// config.resolved.ini into the output directory.
inline int cmd_train(const std::string& config_path, const ConfigOverrides& ov, std::ostream& out,
                     std::ostream& err) {
  return cli::guarded(err, [&] {
    const auto rc = load_run_config(config_path, ov);
    const auto code = cli::load_configured_code(rc);
    const auto dir = cli::prepare_out_dir(rc);
    cli::write_file(dir / "config.resolved.ini", [&](std::ostream& o) { write_resolved_config(o, rc); });

    out << "training " << to_string(rc.train.strategy) << " on " << code.name() << " (N=" << code.n()
        << ", K=" << code.k() << ", edges=" << code.num_edges() << "), tau=" << rc.decoder.tau
        << ", batch=" << rc.train.batch_size() << '\n';
    const auto result = train(code, rc.decoder, rc.train, Rng(rc.seed));
    save_weights((dir / "weights.txt").string(), result.weights, code);
    cli::write_file(dir / "history.csv", [&](std::ostream& o) { write_history_csv(o, result.history); });
    const auto steps = result.history.empty() ? 0 : result.history.back().step;
    out << "steps=" << steps << " best_step=" << result.best_step << " best_val_fer=" << result.best_val_fer
        << "\nwrote " << (dir / "weights.txt").string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

/// Monte-Carlo BER/FER of plain BP (no weights) or of the given weights;
/// writes eval.csv and eval.meta.
inline int cmd_evaluate(const std::string& config_path, const std::optional<std::string>& weights_path,
                        const ConfigOverrides& ov, std::ostream& out, std::ostream& err) {
  return cli::guarded(err, [&] {
    const auto rc = load_run_config(config_path, ov);
    const auto code = cli::load_configured_code(rc);

    std::optional<WbpWeights> weights;
    EvalMetadata meta;
    meta.code_name = code.name();
    meta.seed = rc.seed;
    meta.workers = resolve_workers(rc.workers);
    meta.decoder_kind = "bp";
    if (weights_path) {
      const auto text = cli::read_file(*weights_path);
      weights = deserialize_weights(text, code);
      weights->check_compatible(code, rc.decoder.tau);
      meta.decoder_kind = weights->tied() ? "wbp-tied" : "wbp";
      meta.weights_checksum = cli::fnv1a_hex(text);
    }
    const auto dir = cli::prepare_out_dir(rc);

    const auto rng = Rng(rc.seed).split(cli::kEvalStream);
    EvalReport report;
    if (weights) {
      const auto& w = *weights;
      report = monte_carlo([&](const LlrWord& z) { return wbp_decode(w, code, z, rc.decoder); }, code, rc.eval_snrs,
                           rc.stop, rng, rc.workers);
    } else {
      report = monte_carlo([&](const LlrWord& z) { return bp_decode(code, z, rc.decoder); }, code, rc.eval_snrs,
                           rc.stop, rng, rc.workers);
    }
    cli::write_file(dir / "eval.csv", [&](std::ostream& o) { write_report(o, report); });
    cli::write_file(dir / "eval.meta", [&](std::ostream& o) { write_metadata(o, meta, report); });
    write_report(out, report);
    return static_cast<int>(kExitOk);
  });
}

/// Labels channel words by the iteration count plain BP needs, writes
/// prior_scatter.csv and prints the fitted prior as a [prior] section.
inline int cmd_prior(const std::string& config_path, const ConfigOverrides& ov, std::ostream& out,
                     std::ostream& err) {
  return cli::guarded(err, [&] {
    const auto rc = load_run_config(config_path, ov);
    const auto code = cli::load_configured_code(rc);
    const auto dir = cli::prepare_out_dir(rc);

    auto rng = Rng(rc.seed).split(cli::kPriorStream);
    const auto records = label_reliability(code, rc.prior_snr_set, rc.prior, rc.decoder, rng, rc.workers);
    cli::write_file(dir / "prior_scatter.csv", [&](std::ostream& o) { write_scatter_csv(o, records); });
    const auto prior = fit_prior(records, rc.prior.tau_set.front());
    out << "[prior]\nmu = " << detail::format_double(prior.mu[0]) << ',' << detail::format_double(prior.mu[1])
        << "\nsigma = " << detail::format_double(prior.sigma[0]) << ",0,0," << detail::format_double(prior.sigma[3])
        << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace activedec
