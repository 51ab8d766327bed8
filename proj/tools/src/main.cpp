#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "saenad/cli/commands.hpp"
#include "saenad/error.hpp"

int main(int argc, char** argv) {
  using namespace saenad::cli;

  CLI::App app{"SAE-NAD point-of-interest recommender"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--threads", threads, "Overrides the config thread count")->check(CLI::Range(1u, 1024u));

  auto* preprocess = app.add_subcommand("preprocess", "Parse, filter, split and cache the data and kernel");
  auto* train = app.add_subcommand("train", "Train a model from the cached dataset");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out POIs");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  auto* synth = app.add_subcommand("synth", "Generate geo-clustered synthetic check-in data");
  bool corrupt = false;
  gradcheck->add_flag("--corrupt-gradient", corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    config.propagate();

    if (preprocess->parsed()) cmd_preprocess(config, std::cout);
    if (train->parsed()) cmd_train(config, std::cout);
    if (eval->parsed()) cmd_eval(config, std::cout);
    if (synth->parsed()) cmd_synth(config, std::cout);
    if (gradcheck->parsed() && !cmd_gradcheck(config, std::cout, corrupt).passed) return kExitGradcheck;
  } catch (const saenad::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
