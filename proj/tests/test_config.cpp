#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "activedec/config.hpp"

using namespace activedec;

namespace {

const std::filesystem::path kData = ACTIVEDEC_DATA_DIR;

std::string with_code(const std::string& file, const std::string& rest = "") {
  return "[code]\npath = " + (kData / "codes" / file).string() + "\n" + rest;
}

RunConfig parse(const std::string& text, const ConfigOverrides& ov = {}) {
  return parse_run_config(text, kData, ov);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsForShortCode) {
  const auto rc = parse(with_code("bch_63_36.alist"));
  EXPECT_EQ(rc.code_name, "bch_63_36");
  EXPECT_EQ(rc.train.batch_per_snr, 1250u);
  EXPECT_EQ(rc.train.snr_set, (std::vector<double>{4, 5, 6, 7}));
  EXPECT_EQ(rc.train.learning_rate, 0.01);
  EXPECT_EQ(rc.train.strategy, Strategy::kRandom);
  EXPECT_EQ(rc.train.d_max, 0u);
  EXPECT_EQ(rc.train.validate_every, 100u);
  EXPECT_EQ(rc.train.patience, 10u);
  EXPECT_EQ(rc.train.validation_snr, 6.0);
  EXPECT_EQ(rc.decoder.tau, 5u);
  EXPECT_EQ(rc.reliability_prior.mu[0], 0.025);
  EXPECT_EQ(rc.prior.tau_set, (std::vector<std::size_t>{5, 7, 10, 15}));
  EXPECT_EQ(rc.eval_snrs, default_snr_grid());
  EXPECT_EQ(rc.stop.min_errors, 1000u);
  EXPECT_EQ(rc.stop.max_frames, 100000000u);
  EXPECT_FALSE(rc.train.prior.has_value());
}

TEST(RunConfig, LengthDependentDefaults) {
  auto rc = parse(with_code("bch_127_64.alist", "[train]\nstrategy = distance\n"));
  EXPECT_EQ(rc.train.batch_per_snr, 300u);
  EXPECT_EQ(rc.train.d_max, 4u);
  EXPECT_EQ(rc.reliability_prior.mu[0], 0.03);
  rc = parse(with_code("bch_127_64.alist", "[train]\nstrategy = reliability+distance\n"));
  EXPECT_EQ(rc.train.d_max, 5u);
  ASSERT_TRUE(rc.train.prior.has_value());
  rc = parse(with_code("bch_63_36.alist", "[train]\nstrategy = distance\n"));
  EXPECT_EQ(rc.train.d_max, 2u);
  rc = parse(with_code("bch_63_36.alist", "[train]\nstrategy = reliability+distance\n"));
  EXPECT_EQ(rc.train.d_max, 3u);
}

TEST(RunConfig, ExplicitValues) {
  const auto rc = parse(with_code("bch_63_36.alist",
                                  "[train]\nsnr_set = 3, 4.5\nlearning_rate = 0.02\nmax_steps = 1e3\n"
                                  "[eval]\nsnr_list = 1,2\nmax_frames = 1e8\nerror_unit = bit\n"
                                  "[prior]\nmu = 0.1, 0.2\nsigma = 1e-3, 0, 0, 2e-3\n"));
  EXPECT_EQ(rc.train.snr_set, (std::vector<double>{3.0, 4.5}));
  EXPECT_EQ(rc.train.learning_rate, 0.02);
  EXPECT_EQ(rc.train.max_steps, 1000u);
  EXPECT_EQ(rc.stop.unit, ErrorUnit::kBit);
  EXPECT_EQ(rc.reliability_prior.sigma[3], 2e-3);
}

TEST(RunConfig, FieldPathDiagnostics) {
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nlern_rate = 1\n")).find("train.lern_rate"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nlearning_rate = -1\n")).find("train.learning_rate"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nlearning_rate = fast\n")).find("train.learning_rate"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nbatch_per_snr = 0\n")).find("train.batch_per_snr"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nsnr_set = \n")).find("train.snr_set"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[train]\nstrategy = greedy\n")).find("train.strategy"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[sampler]\nd_max = 64\n")).find("sampler.d_max"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[prior]\nsigma = 1, 1, 1, 1\n")).find("prior.sigma"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[prior]\ntau_set = 7, 5\n")).find("prior.tau_set"),
            std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[decoder]\ntau = 0\n")).find("decoder"), std::string::npos);
  EXPECT_NE(config_error(with_code("bch_63_36.alist", "[bogus]\nx = 1\n")).find("bogus"), std::string::npos);
  EXPECT_NE(config_error("[code]\npath = missing.alist\n").find("missing.alist"), std::string::npos);
  EXPECT_NE(config_error("[run]\nseed = 1\n").find("code.path"), std::string::npos);
  EXPECT_NE(config_error("[code]\npath = " + (kData / "codes" / "bch_63_36.alist").string() + "\nformat = dense\n")
                .find("code.path"),
            std::string::npos);
  EXPECT_NE(config_error("[run\n").find("config"), std::string::npos);
}

TEST(RunConfig, RelativePathResolvesAgainstBaseDir) {
  const auto rc = parse("[code]\npath = codes/bch_63_45.alist\n");
  EXPECT_EQ(rc.code_path, (kData / "codes" / "bch_63_45.alist").lexically_normal().string());
}

TEST(RunConfig, OverridesAndEnvironment) {
  ConfigOverrides ov;
  ov.seed = 77;
  ov.workers = 3;
  auto rc = parse(with_code("bch_63_36.alist", "[run]\nseed = 5\nout = from_file\n"), ov);
  EXPECT_EQ(rc.seed, 77u);
  EXPECT_EQ(rc.workers, 3u);
  EXPECT_EQ(rc.train.workers, 3u);
  EXPECT_EQ(rc.out_dir, "from_file");

  ::setenv(kOutputDirEnv, "/tmp/from_env", 1);
  rc = parse(with_code("bch_63_36.alist"));
  EXPECT_EQ(rc.out_dir, "/tmp/from_env");
  ov.out_dir = "from_flag";
  rc = parse(with_code("bch_63_36.alist"), ov);
  EXPECT_EQ(rc.out_dir, "from_flag");
  ::unsetenv(kOutputDirEnv);
}

TEST(RunConfig, ResolvedEchoRoundTrips) {
  const auto rc = parse(with_code("bch_63_36.alist",
                                  "[train]\nstrategy = reliability+distance\nsnr_set = 4,5.5\n"
                                  "learning_rate = 0.1\n[eval]\nsnr_list = 2,3\n"));
  std::ostringstream a;
  write_resolved_config(a, rc);
  const auto again = parse(a.str());
  std::ostringstream b;
  write_resolved_config(b, again);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(again.train.learning_rate, 0.1);
  EXPECT_EQ(again.train.d_max, 3u);
}

TEST(RunConfig, ShippedConfigsParse) {
  const auto dir = kData.parent_path() / "configs";
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(load_run_config(entry.path().string())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 4u);
}
