// magicnet: run, dump and replay streaming continual-learning experiments.

#include <iostream>

#include <CLI11.hpp>

#include "magicnet/experiment.hpp"

namespace ex = magicnet::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Streaming continual learning experiments (cGRU, MAGIC Net, cPNN)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  bool trace = false;

  auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed-override", seed_override, "Run this seed instead of the config's list");
  run->add_flag("--trace", trace, "Write per-point prediction traces");

  std::uint64_t dump_seed = 0;
  std::string dump_path;
  auto* dump = app.add_subcommand("dump", "Write the stream of one seed to CSV plus metadata");
  dump->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  dump->add_option("--seed", dump_seed, "Seed")->required();
  dump->add_option("--out", dump_path, "Dump file (CSV)")->required();

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Run the config's learners on a dumped stream");
  replay->add_option("--dump", replay_path, "Dump file written by 'dump'")->required()->check(CLI::ExistingFile);
  replay->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out_dir, "Output directory")->required();
  replay->add_flag("--trace", trace, "Write per-point prediction traces");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = ex::load_config(config_path);
    if (*run) {
      const auto status = ex::run(config, {out_dir, seed_override, trace});
      std::cout << "completed " << status.completed.size() << " seed(s), resumed "
                << status.resumed.size() << ", results in " << out_dir << '\n';
    } else if (*dump) {
      magicnet::streams::dump_stream(ex::build_stream(config, dump_seed), dump_path);
      std::cout << "wrote " << dump_path << '\n';
    } else if (*replay) {
      ex::replay(replay_path, config, {out_dir, std::nullopt, trace});
      std::cout << "replay results in " << out_dir << '\n';
    }
  } catch (const ex::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const magicnet::streams::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
