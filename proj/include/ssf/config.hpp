#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ssf/model.hpp"
#include "ssf/trainer.hpp"

namespace ssf {

/// Flat key=value run configuration. `#` starts a comment; blank lines are
/// ignored. Every key has a default.
struct RunConfig {
  std::string model_scale = "tiny";  // tiny | small
  FusionMode fusion = FusionMode::cat;
  bool le = true;
  bool sfa = true;
  int pld_dim = 64;

  int epochs = 30;
  int batch = 4;
  double lr = 1e-4;
  double weight_decay = 0.01;
  bool augment = true;
  std::uint64_t seed = 1;

  int size = 64;
  std::string data_dir;
  std::string val_dir;
  bool synthetic = true;
  int train_n = 200;
  int val_n = 50;
  std::uint64_t data_seed = 1;

  /// Text the config was parsed from, kept for echoing into the run log.
  std::string source_text;

  ModelConfig model() const;
  FitOptions fit_options() const;
};

/// InvalidConfig carrying "line N" for unknown keys, malformed lines, and
/// out-of-range values.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical key=value rendering of every field.
std::string render_run_config(const RunConfig& cfg);

}  // namespace ssf

namespace ssf {

struct RunData {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

/// data.dir (and data.val_dir) when set, otherwise the synthetic set:
/// train from data.seed, validation from a disjoint seed stream.
RunData load_run_data(const RunConfig& cfg);

std::uint64_t validation_seed(std::uint64_t data_seed);

}  // namespace ssf
