#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "activedec/bp.hpp"
#include "activedec/code.hpp"
#include "activedec/errors.hpp"
#include "activedec/eval.hpp"
#include "activedec/sampling.hpp"
#include "activedec/training.hpp"
#include "activedec/wbp.hpp"

namespace activedec {

/// Environment variable naming the output directory when neither --out nor
/// run.out is given.
inline constexpr const char* kOutputDirEnv = "ACTIVEDEC_OUT";

/// Everything a CLI run needs, with every default resolved.
///
/// Length-dependent defaults (N >= 127 vs shorter codes): batch_per_snr
/// 300 / 1250, prior mean (0.03, 0.1) / (0.025, 0.1), d_max 4 / 2 for the
/// distance strategy and 5 / 3 for reliability+distance.
struct RunConfig {
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string out_dir;

  std::string code_path;
  MatrixFormat code_format = MatrixFormat::kAlist;
  std::string code_name;
  std::size_t t_h = 0;

  DecoderConfig decoder;
  TrainConfig train;
  PriorConfig prior;
  std::vector<double> prior_snr_set;
  /// Prior for the reliability strategies; copied into train.prior when the
  /// strategy uses it.
  ReliabilityPrior reliability_prior;
  std::vector<double> eval_snrs = default_snr_grid();
  StopRule stop;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Typed access to one INI section with "section.key" diagnostics.
class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::optional<std::string> raw(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return trim(tree_->get<std::string>(key));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(name_ + "." + key + ": " + what);
  }

  template <class T>
  std::optional<T> get(const std::string& key) const {
    auto s = raw(key);
    if (!s) return std::nullopt;
    return convert<T>(key, *s);
  }

  template <class T>
  std::optional<std::vector<T>> list(const std::string& key) const {
    auto s = raw(key);
    if (!s) return std::nullopt;
    std::vector<T> out;
    std::stringstream ss(*s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(convert<T>(key, trim(item)));
    return out;
  }

  void reject_unknown(const std::set<std::string>& known) const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_)
      if (!known.count(k)) fail(k, "unknown key");
  }

 private:
  template <class T>
  T convert(const std::string& key, const std::string& s) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
      if (s == "false" || s == "0" || s == "no" || s == "off") return false;
      fail(key, "expected a boolean, got '" + s + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t pos = 0;
      double x = 0.0;
      try {
        x = std::stod(s, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (s.empty() || pos != s.size() || !std::isfinite(x)) fail(key, "expected a number, got '" + s + "'");
      return static_cast<T>(x);
    } else {
      std::size_t pos = 0;
      unsigned long long x = 0;
      const bool negative = !s.empty() && s[0] == '-';
      try {
        if (!negative) x = std::stoull(s, &pos, 0);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (s.empty() || negative || pos != s.size()) {
        // Allow exact integers written in float notation, e.g. 1e8.
        std::size_t fpos = 0;
        double d = -1.0;
        try {
          d = std::stod(s, &fpos);
        } catch (const std::exception&) {
          fpos = 0;
        }
        if (s.empty() || fpos != s.size() || !(d >= 0.0) || d != std::floor(d) || d > 1.8e19)
          fail(key, "expected a non-negative integer, got '" + s + "'");
        x = static_cast<unsigned long long>(d);
      }
      if (x > std::numeric_limits<T>::max()) fail(key, "value out of range");
      return static_cast<T>(x);
    }
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
};

inline std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

inline std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace detail

inline std::size_t default_d_max(Strategy s, std::size_t n) {
  switch (s) {
    case Strategy::kDistance:
      return n >= 127 ? 4 : 2;
    case Strategy::kReliabilityDistance:
      return n >= 127 ? 5 : 3;
    default:
      return 0;
  }
}

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out_dir;
};

/// Parses the INI text. Relative code paths resolve against `base_dir`.
/// Loads the code to resolve length-dependent defaults; a missing or
/// malformed code file is a ConfigError naming the path.
inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                                  const ConfigOverrides& ov = {}) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  {
    std::istringstream in(text);
    try {
      pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
  }
  static const std::set<std::string> sections{"run", "code", "decoder", "train", "sampler", "prior", "eval"};
  for (const auto& [k, v] : root) {
    if (v.empty() && !v.data().empty()) throw ConfigError(k + ": keys must live inside a [section]");
    if (!sections.count(k)) throw ConfigError(k + ": unknown section");
  }
  auto section = [&](const char* name) {
    auto it = root.find(name);
    return detail::Section(it == root.not_found() ? nullptr : &it->second, name);
  };

  RunConfig rc;
  const auto run = section("run");
  run.reject_unknown({"seed", "workers", "out"});
  rc.seed = run.get<std::uint64_t>("seed").value_or(1);
  rc.workers = run.get<unsigned>("workers").value_or(0);
  rc.out_dir = run.get<std::string>("out").value_or("");
  if (ov.seed) rc.seed = *ov.seed;
  if (ov.workers) rc.workers = *ov.workers;
  if (ov.out_dir) rc.out_dir = *ov.out_dir;
  if (rc.out_dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    rc.out_dir = env && *env ? env : "activedec-out";
  }

  const auto code = section("code");
  code.reject_unknown({"path", "format", "name", "t_h"});
  auto path = code.get<std::string>("path");
  if (!path || path->empty()) code.fail("path", "required");
  std::filesystem::path p(*path);
  if (p.is_relative()) p = base_dir / p;
  rc.code_path = p.lexically_normal().string();
  const auto fmt = code.get<std::string>("format").value_or("alist");
  if (fmt == "alist")
    rc.code_format = MatrixFormat::kAlist;
  else if (fmt == "dense")
    rc.code_format = MatrixFormat::kDense;
  else
    code.fail("format", "expected 'alist' or 'dense', got '" + fmt + "'");
  rc.code_name = code.get<std::string>("name").value_or(std::filesystem::path(rc.code_path).stem().string());
  rc.t_h = code.get<std::size_t>("t_h").value_or(0);
  if (!std::filesystem::is_regular_file(rc.code_path)) code.fail("path", "file not found: " + rc.code_path);
  std::size_t n = 0;
  try {
    n = load_code(rc.code_path, rc.code_format, rc.code_name, rc.t_h).n();
  } catch (const std::exception& e) {
    code.fail("path", rc.code_path + ": " + e.what());
  }

  const auto dec = section("decoder");
  dec.reject_unknown({"tau", "clip", "arctanh_eps", "early_termination"});
  rc.decoder.tau = dec.get<std::size_t>("tau").value_or(5);
  rc.decoder.clip = dec.get<double>("clip").value_or(10.0);
  rc.decoder.arctanh_eps = dec.get<double>("arctanh_eps").value_or(1e-7);
  rc.decoder.early_termination = dec.get<bool>("early_termination").value_or(true);
  try {
    rc.decoder.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("decoder: ") + e.what());
  }

  const auto tr = section("train");
  tr.reject_unknown({"snr_set", "batch_per_snr", "learning_rate", "rms_decay", "rms_epsilon", "strategy", "max_steps",
                     "validate_every", "patience", "validation_snr", "validation_frames", "max_resample", "tied",
                     "clamp_gradient"});
  auto& t = rc.train;
  t.snr_set = tr.list<double>("snr_set").value_or(std::vector<double>{4, 5, 6, 7});
  t.batch_per_snr = tr.get<std::size_t>("batch_per_snr").value_or(n >= 127 ? 300 : 1250);
  t.learning_rate = tr.get<double>("learning_rate").value_or(0.01);
  t.rmsprop.decay = tr.get<double>("rms_decay").value_or(0.99);
  t.rmsprop.epsilon = tr.get<double>("rms_epsilon").value_or(1e-8);
  try {
    t.strategy = parse_strategy(tr.get<std::string>("strategy").value_or("random"));
  } catch (const std::invalid_argument& e) {
    tr.fail("strategy", e.what());
  }
  t.max_steps = tr.get<std::size_t>("max_steps").value_or(100000);
  t.validate_every = tr.get<std::size_t>("validate_every").value_or(100);
  t.patience = tr.get<std::size_t>("patience").value_or(10);
  t.validation_snr = tr.get<double>("validation_snr").value_or(6.0);
  t.validation_frames = tr.get<std::size_t>("validation_frames").value_or(10000);
  t.max_resample = tr.get<std::size_t>("max_resample").value_or(100);
  t.tied = tr.get<bool>("tied").value_or(false);
  const auto cg = tr.get<std::string>("clamp_gradient").value_or("cut");
  if (cg == "cut")
    t.clamp_gradient = ClampGradient::kCut;
  else if (cg == "straight_through")
    t.clamp_gradient = ClampGradient::kStraightThrough;
  else
    tr.fail("clamp_gradient", "expected 'cut' or 'straight_through', got '" + cg + "'");
  if (!(t.learning_rate > 0.0)) tr.fail("learning_rate", "must be > 0");
  if (t.batch_per_snr < 1) tr.fail("batch_per_snr", "must be >= 1");
  if (t.snr_set.empty()) tr.fail("snr_set", "must not be empty");
  if (t.validate_every < 1) tr.fail("validate_every", "must be >= 1");
  if (t.patience < 1) tr.fail("patience", "must be >= 1");
  if (t.validation_frames < 1) tr.fail("validation_frames", "must be >= 1");
  if (t.max_resample < 1) tr.fail("max_resample", "must be >= 1");
  if (!(t.rmsprop.decay >= 0.0 && t.rmsprop.decay < 1.0)) tr.fail("rms_decay", "must be in [0, 1)");
  if (!(t.rmsprop.epsilon > 0.0)) tr.fail("rms_epsilon", "must be > 0");

  const auto sm = section("sampler");
  sm.reject_unknown({"d_max", "oversample_factor", "refill"});
  t.d_max = sm.get<std::size_t>("d_max").value_or(default_d_max(t.strategy, n));
  t.oversample_factor = sm.get<std::size_t>("oversample_factor").value_or(5);
  t.refill = sm.get<bool>("refill").value_or(false);
  if (t.oversample_factor < 1) sm.fail("oversample_factor", "must be >= 1");
  const bool needs_d = t.strategy == Strategy::kDistance || t.strategy == Strategy::kReliabilityDistance;
  if (needs_d && t.d_max < 1) sm.fail("d_max", "must be >= 1 for strategy " + std::string(to_string(t.strategy)));
  if (t.d_max > n) sm.fail("d_max", "exceeds code length " + std::to_string(n));

  const auto pr = section("prior");
  pr.reject_unknown({"mu", "sigma", "tau_set", "count", "snr_set"});
  auto prior = ReliabilityPrior::defaults_for_length(n);
  if (auto mu = pr.list<double>("mu")) {
    if (mu->size() != 2) pr.fail("mu", "expected 2 values (abp, mbce)");
    prior.mu = {(*mu)[0], (*mu)[1]};
  }
  if (auto sg = pr.list<double>("sigma")) {
    if (sg->size() != 4) pr.fail("sigma", "expected 4 values (row-major 2x2)");
    prior.sigma = {(*sg)[0], (*sg)[1], (*sg)[2], (*sg)[3]};
  }
  try {
    prior.validate();
  } catch (const std::invalid_argument& e) {
    pr.fail("sigma", e.what());
  }
  if (t.strategy == Strategy::kReliability || t.strategy == Strategy::kReliabilityDistance) t.prior = prior;
  rc.prior.tau_set = pr.list<std::size_t>("tau_set").value_or(std::vector<std::size_t>{5, 7, 10, 15});
  rc.prior.count = pr.get<std::size_t>("count").value_or(10000);
  rc.prior_snr_set = pr.list<double>("snr_set").value_or(t.snr_set);
  try {
    rc.prior.validate();
  } catch (const std::invalid_argument& e) {
    pr.fail("tau_set", e.what());
  }
  if (rc.prior_snr_set.empty()) pr.fail("snr_set", "must not be empty");
  rc.reliability_prior = prior;
  rc.train.workers = rc.workers;

  const auto ev = section("eval");
  ev.reject_unknown({"snr_list", "min_errors", "max_frames", "error_unit"});
  rc.eval_snrs = ev.list<double>("snr_list").value_or(default_snr_grid());
  rc.stop.min_errors = ev.get<std::uint64_t>("min_errors").value_or(1000);
  rc.stop.max_frames = ev.get<std::uint64_t>("max_frames").value_or(100000000);
  const auto unit = ev.get<std::string>("error_unit").value_or("frame");
  if (unit == "frame")
    rc.stop.unit = ErrorUnit::kFrame;
  else if (unit == "bit")
    rc.stop.unit = ErrorUnit::kBit;
  else
    ev.fail("error_unit", "expected 'frame' or 'bit', got '" + unit + "'");
  if (rc.eval_snrs.empty()) ev.fail("snr_list", "must not be empty");
  if (rc.stop.max_frames < 1) ev.fail("max_frames", "must be >= 1");
  return rc;
}

/// Writes every field of `rc` as INI. Parsing the output yields the same
/// RunConfig.
inline void write_resolved_config(std::ostream& out, const RunConfig& rc) {
  using detail::format_double;
  using detail::join;
  const auto& t = rc.train;
  const auto& p = rc.reliability_prior;
  out << "[run]\n"
      << "seed = " << rc.seed << "\n"
      << "workers = " << rc.workers << "\n"
      << "out = " << rc.out_dir << "\n\n"
      << "[code]\n"
      << "path = " << rc.code_path << "\n"
      << "format = " << (rc.code_format == MatrixFormat::kAlist ? "alist" : "dense") << "\n"
      << "name = " << rc.code_name << "\n"
      << "t_h = " << rc.t_h << "\n\n"
      << "[decoder]\n"
      << "tau = " << rc.decoder.tau << "\n"
      << "clip = " << format_double(rc.decoder.clip) << "\n"
      << "arctanh_eps = " << format_double(rc.decoder.arctanh_eps) << "\n"
      << "early_termination = " << (rc.decoder.early_termination ? "true" : "false") << "\n\n"
      << "[train]\n"
      << "snr_set = " << join(t.snr_set) << "\n"
      << "batch_per_snr = " << t.batch_per_snr << "\n"
      << "learning_rate = " << format_double(t.learning_rate) << "\n"
      << "rms_decay = " << format_double(t.rmsprop.decay) << "\n"
      << "rms_epsilon = " << format_double(t.rmsprop.epsilon) << "\n"
      << "strategy = " << to_string(t.strategy) << "\n"
      << "max_steps = " << t.max_steps << "\n"
      << "validate_every = " << t.validate_every << "\n"
      << "patience = " << t.patience << "\n"
      << "validation_snr = " << format_double(t.validation_snr) << "\n"
      << "validation_frames = " << t.validation_frames << "\n"
      << "max_resample = " << t.max_resample << "\n"
      << "tied = " << (t.tied ? "true" : "false") << "\n"
      << "clamp_gradient = " << (t.clamp_gradient == ClampGradient::kCut ? "cut" : "straight_through") << "\n\n"
      << "[sampler]\n"
      << "d_max = " << t.d_max << "\n"
      << "oversample_factor = " << t.oversample_factor << "\n"
      << "refill = " << (t.refill ? "true" : "false") << "\n\n"
      << "[prior]\n"
      << "mu = " << join(std::vector<double>(p.mu.begin(), p.mu.end())) << "\n"
      << "sigma = " << join(std::vector<double>(p.sigma.begin(), p.sigma.end())) << "\n"
      << "tau_set = " << join(rc.prior.tau_set) << "\n"
      << "count = " << rc.prior.count << "\n"
      << "snr_set = " << join(rc.prior_snr_set) << "\n\n"
      << "[eval]\n"
      << "snr_list = " << join(rc.eval_snrs) << "\n"
      << "min_errors = " << rc.stop.min_errors << "\n"
      << "max_frames = " << rc.stop.max_frames << "\n"
      << "error_unit = " << (rc.stop.unit == ErrorUnit::kFrame ? "frame" : "bit") << "\n";
}

inline RunConfig load_run_config(const std::string& path, const ConfigOverrides& ov = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::filesystem::absolute(path).parent_path(), ov);
}

}  // namespace activedec
