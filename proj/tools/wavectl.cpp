#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "wavectl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Acoustic scattering control with a latent wave surrogate"};
  app.require_subcommand(1);

  wavectl::CommandOptions opt;
  std::string config, out, checkpoint, dataset;
  std::uint64_t seed = 0;
  int episodes = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run configuration");
    sub->add_option("--seed", seed, "override every seed in the configuration");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--quiet", opt.quiet, "suppress progress messages");
  };

  auto* collect = app.add_subcommand("collect", "record random-policy episodes into a dataset directory");
  common(collect);
  collect->add_option("--episodes", episodes, "number of episodes (default 12)");

  auto* train = app.add_subcommand("train", "train the surrogate on a dataset");
  common(train);
  train->add_option("--dataset", dataset, "dataset directory")->required();
  train->add_flag("--no-pml", opt.no_pml, "disable the latent absorbing layer");

  auto* eval = app.add_subcommand("eval-horizon", "sigma_sc MSE for horizons 20..200 on held-out episodes");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--dataset", dataset, "dataset directory")->required();
  eval->add_flag("--no-pml", opt.no_pml, "disable the latent absorbing layer");

  auto* predict = app.add_subcommand("predict", "measured vs predicted sigma over a whole episode");
  common(predict);
  predict->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  predict->add_option("--dataset", dataset, "dataset directory")->required();
  predict->add_option("--episode", opt.episode, "episode index");
  predict->add_flag("--no-pml", opt.no_pml, "disable the latent absorbing layer");

  auto* control = app.add_subcommand("control", "MPC vs random policy on paired seeds");
  common(control);
  control->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  control->add_option("--episodes", episodes, "number of episode pairs (default 6)");
  control->add_flag("--no-pml", opt.no_pml, "disable the latent absorbing layer");

  auto* field = app.add_subcommand("latent-field", "latent scattered-field space-time array over 100 actions");
  common(field);
  field->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  field->add_option("--dataset", dataset, "dataset directory")->required();
  field->add_option("--episode", opt.episode, "episode index");
  field->add_flag("--no-pml", opt.no_pml, "disable the latent absorbing layer");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (!config.empty()) opt.config_path = config;
  if (given("--seed")) opt.seed = seed;
  if (!out.empty()) opt.out = out;
  if (given("--episodes")) opt.episodes = episodes;
  if (!checkpoint.empty()) opt.checkpoint = checkpoint;
  if (!dataset.empty()) opt.dataset = dataset;
  return wavectl::run_command(sub->get_name(), opt);
}
