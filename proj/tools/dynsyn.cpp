// dynsyn: synergy extraction, training and evaluation from the command line.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "dynsyn/cli.hpp"

namespace {

using namespace dynsyn;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string actor;
  std::optional<std::size_t> jobs;
  std::string grouping;
  std::string checkpoint;
  std::optional<std::size_t> episodes;
  bool resume = false;
  std::string model;
};

// Config file over defaults, flags over the config file.
cli::RunConfig resolve(const Flags& f) {
  cli::RunConfig c = f.config.empty() ? cli::RunConfig{} : cli::load_config(f.config);
  if (f.seed) c.seeds = {*f.seed};
  if (!f.out.empty()) c.out = f.out;
  if (!f.actor.empty()) c.actor = sac::actor_kind_from_string(f.actor);
  if (f.jobs) c.jobs = *f.jobs;
  if (!f.grouping.empty()) c.grouping = f.grouping;
  if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
  if (f.episodes) c.eval_episodes = *f.episodes;
  if (f.resume) c.resume = true;
  if (!f.model.empty()) c.model = f.model;
  return c;
}

void common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Single seed, replaces the configured seed list");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--jobs", f.jobs, "Worker threads for per-seed work")->check(CLI::PositiveNumber);
  cmd->add_option("--model", f.model, "Built-in model name or model file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Muscle synergy extraction and synergy-structured SAC"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(1);
  Flags f;

  auto* extract = app.add_subcommand("extract", "Extract muscle groups from perturbation trajectories");
  common(extract, f);
  auto* train = app.add_subcommand("train", "Train a flat or dynsyn SAC actor");
  common(train, f);
  train->add_option("--actor", f.actor, "flat or dynsyn")->check(CLI::IsMember({"flat", "dynsyn"}));
  train->add_option("--grouping", f.grouping, "Grouping file for the dynsyn actor");
  train->add_flag("--resume", f.resume, "Continue from existing per-seed checkpoints");
  auto* convergence = app.add_subcommand("convergence", "Grouping distance against trajectory length");
  common(convergence, f);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the mean action");
  common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file");
  eval->add_option("--episodes", f.episodes, "Episode count");
  auto* inspect = app.add_subcommand("inspect", "Print a model summary as JSON");
  common(inspect, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    const cli::RunConfig c = resolve(f);
    if (extract->parsed()) cli::cmd_extract(c);
    if (train->parsed()) cli::cmd_train(c);
    if (convergence->parsed()) cli::cmd_convergence(c);
    if (eval->parsed()) cli::cmd_eval(c);
    if (inspect->parsed()) std::cout << cli::inspect_model(cli::load_model_source(c.model).model).dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "dynsyn: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
  return cli::kOk;
}
