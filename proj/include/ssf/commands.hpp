#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ssf/grad_suite.hpp"

namespace ssf::cli {

using std::filesystem::path;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDiverged = 2;

/// SSF_LOG={quiet,info,debug}; defaults to info.
void configure_logging();

struct TrainArgs {
  std::optional<path> config;
  path out;
  std::optional<path> data;
  std::optional<std::uint64_t> seed;
};
/// Writes out/model.ckpt, out/log.csv and out/config.txt.
int cmd_train(const TrainArgs& args);

struct ModelArgs {
  std::optional<path> config;
  path ckpt;
};
/// Prints "mDice=<v> mIoU=<v>" to `out`.
int cmd_eval(const ModelArgs& model, const path& data, std::ostream& out);
int cmd_predict(const ModelArgs& model, const path& image, const path& out_path);
/// Writes stage<i>_{raw,le,fused}.pgm and attn<i>.pgm, i = 1..4.
int cmd_heatmap(const ModelArgs& model, const path& image, const path& out_dir);
int cmd_synth(int n, std::int64_t size, std::uint64_t seed, const path& out_dir);
/// One line per case; exit 0 iff every case is under its threshold.
int cmd_gradcheck(std::ostream& out, const std::vector<GradCase>& cases = gradcheck_cases());

}  // namespace ssf::cli
