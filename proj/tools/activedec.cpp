// Command-line driver: train | evaluate | prior.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "activedec/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Belief-propagation decoder training and evaluation"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> weights;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "INI run configuration")->required();
    cmd->add_option("--seed", seed, "master seed (overrides run.seed)");
    cmd->add_option("--workers", workers, "worker threads, 0 = all cores (overrides run.workers)");
    cmd->add_option("--out", out, "output directory (overrides run.out and $ACTIVEDEC_OUT)");
  };
  auto* train = app.add_subcommand("train", "train decoder weights");
  common(train);
  auto* evaluate = app.add_subcommand("evaluate", "Monte-Carlo BER/FER of BP or trained weights");
  common(evaluate);
  evaluate->add_option("--weights", weights, "weights file; omit for plain BP");
  auto* prior = app.add_subcommand("prior", "fit the reliability prior");
  common(prior);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : activedec::kExitConfig;
  }

  const activedec::ConfigOverrides ov{seed, workers, out};
  if (*train) return activedec::cmd_train(config, ov, std::cout, std::cerr);
  if (*evaluate) return activedec::cmd_evaluate(config, weights, ov, std::cout, std::cerr);
  return activedec::cmd_prior(config, ov, std::cout, std::cerr);
}
