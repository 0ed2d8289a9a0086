#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ssf/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string ckpt;
  std::string data;
  std::uint64_t seed = 1;
  std::string image;
  std::string target;
  int n = 0;
  std::int64_t size = 64;
};

std::optional<std::filesystem::path> maybe(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  ssf::cli::configure_logging();
  CLI::App app{"SSFormer segmentation: train, evaluate, predict, inspect"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model and write model.ckpt, log.csv and config.txt");
  train->add_option("--config", o.config, "Run config (key=value)")->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--data", o.data, "Dataset directory (overrides data.dir)");
  auto* train_seed = train->add_option("--seed", o.seed, "Overrides train.seed");

  auto* eval = app.add_subcommand("eval", "Print mDice and mIoU of a checkpoint on a dataset");
  eval->add_option("--config", o.config, "Run config the checkpoint was trained with")->check(CLI::ExistingFile);
  eval->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  eval->add_option("--data", o.data, "Dataset directory")->required();

  auto* predict = app.add_subcommand("predict", "Write a binary mask PGM for one image");
  predict->add_option("--config", o.config, "Run config the checkpoint was trained with")->check(CLI::ExistingFile);
  predict->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  predict->add_option("image", o.image, "Input PPM/PGM")->required();
  predict->add_option("out", o.target, "Output PGM")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Run the f64 finite-difference gradient suite");

  auto* heatmap = app.add_subcommand("heatmap", "Write per-stage feature and attention heatmaps");
  heatmap->add_option("--config", o.config, "Run config the checkpoint was trained with")->check(CLI::ExistingFile);
  heatmap->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  heatmap->add_option("image", o.image, "Input PPM/PGM")->required();
  heatmap->add_option("--out", o.out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("n", o.n, "Number of samples")->required()->check(CLI::NonNegativeNumber);
  synth->add_option("size", o.size, "Image side, a multiple of 32")->required();
  synth->add_option("--seed", o.seed, "Dataset seed")->capture_default_str();
  synth->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ssf::cli::kExitError;
  }

  using namespace ssf::cli;
  const ModelArgs model{maybe(o.config), o.ckpt};
  if (*train) {
    TrainArgs args{maybe(o.config), o.out, maybe(o.data), std::nullopt};
    if (train_seed->count() > 0) args.seed = o.seed;
    return cmd_train(args);
  }
  if (*eval) return cmd_eval(model, o.data, std::cout);
  if (*predict) return cmd_predict(model, o.image, o.target);
  if (*gradcheck) return cmd_gradcheck(std::cout);
  if (*heatmap) return cmd_heatmap(model, o.image, o.out);
  if (*synth) return cmd_synth(o.n, o.size, o.seed, o.out);
  return kExitError;
}
