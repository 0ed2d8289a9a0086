#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssf/checkpoint.hpp"
#include "ssf/commands.hpp"
#include "ssf/config.hpp"
#include "ssf/dataset.hpp"
#include "ssf/grad_check.hpp"
#include "ssf/netpbm.hpp"
#include "ssf/ops.hpp"

using namespace ssf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / (std::string("ssf_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string config_error(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_config);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return {};
}

const char* kTinyRun =
    "pld.dim=16\n"
    "train.epochs=2\n"
    "train.batch=2\n"
    "data.size=32\n"
    "data.train_n=4\n"
    "data.val_n=2\n";

// conv2d whose backward reads the input one pixel off.
Tensor<double> shifted_conv(const Tensor<double>& x, const Tensor<double>& w, int pad) {
  const auto n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const auto co = w.shape()[0], k = w.shape()[2];
  const auto oh = h + 2 * pad - k + 1, ow = wd + 2 * pad - k + 1;
  auto at = [&](const std::span<const double> v, std::int64_t b, std::int64_t c, std::int64_t i, std::int64_t j) {
    return (i < 0 || j < 0 || i >= h || j >= wd) ? 0.0 : v[((b * ci + c) * h + i) * wd + j];
  };
  std::vector<double> out(static_cast<std::size_t>(n * co * oh * ow));
  const auto xv = x.values(), wv = w.values();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          double acc = 0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t u = 0; u < k; ++u)
              for (std::int64_t v = 0; v < k; ++v) acc += wv[((o * ci + c) * k + u) * k + v] * at(xv, b, c, i + u - pad, j + v - pad);
          out[static_cast<std::size_t>(((b * co + o) * oh + i) * ow + j)] = acc;
        }
  const auto xs = x.clone(), ws = w.clone();
  return record<double>("conv2d", Tensor<double>({n, co, oh, ow}, std::move(out)), {&x, &w},
                        [=](std::span<const double> g, std::span<const std::span<double>> gin) {
                          const auto xv = xs.values(), wv = ws.values();
                          for (std::int64_t b = 0; b < n; ++b)
                            for (std::int64_t o = 0; o < co; ++o)
                              for (std::int64_t i = 0; i < oh; ++i)
                                for (std::int64_t j = 0; j < ow; ++j) {
                                  const double go = g[static_cast<std::size_t>(((b * co + o) * oh + i) * ow + j)];
                                  for (std::int64_t c = 0; c < ci; ++c)
                                    for (std::int64_t u = 0; u < k; ++u)
                                      for (std::int64_t v = 0; v < k; ++v) {
                                        const auto wi = ((o * ci + c) * k + u) * k + v;
                                        const std::int64_t ii = i + u - pad - 1, jj = j + v - pad;
                                        if (!gin[1].empty()) gin[1][wi] += go * at(xv, b, c, ii, jj);
                                        if (!gin[0].empty() && ii >= 0 && jj >= 0 && ii < h && jj < wd)
                                          gin[0][((b * ci + c) * h + ii) * wd + jj] += go * wv[wi];
                                      }
                                }
                        });
}

}  // namespace

TEST(Config, DefaultsAndRender) {
  const auto cfg = parse_run_config("");
  EXPECT_EQ(cfg.epochs, 30);
  EXPECT_EQ(cfg.batch, 4);
  EXPECT_DOUBLE_EQ(cfg.lr, 1e-4);
  EXPECT_EQ(cfg.model().pld.unified_dim, 64);
  const auto again = parse_run_config(render_run_config(cfg));
  EXPECT_EQ(render_run_config(again), render_run_config(cfg));
}

TEST(Config, ParsesKeysAndComments) {
  const auto cfg = parse_run_config("# header\n\npld.fusion = add  # trailing\npld.le=false\ntrain.lr=3e-4\ndata.size=96\n");
  EXPECT_EQ(cfg.fusion, FusionMode::add);
  EXPECT_FALSE(cfg.le);
  EXPECT_DOUBLE_EQ(cfg.lr, 3e-4);
  EXPECT_EQ(cfg.size, 96);
  EXPECT_FALSE(cfg.model().pld.le_enabled);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(config_error("train.epochs=3\nbogus.key=1\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("train.epochs=3\nbogus.key=1\n").find("bogus.key"), std::string::npos);
  EXPECT_NE(config_error("data.size=50\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("\n\npld.fusion=mul\n").find("line 3"), std::string::npos);
  config_error("train.epochs=-1\n");
  config_error("train.lr=abc\n");
  config_error("no_equals_sign\n");
}

TEST(Config, SyntheticSplitsAreDisjointStreams) {
  auto cfg = parse_run_config(kTinyRun);
  const auto data = load_run_data(cfg);
  EXPECT_EQ(data.train.size(), 4u);
  EXPECT_EQ(data.val.size(), 2u);
  EXPECT_NE(validation_seed(cfg.data_seed), cfg.data_seed);
  EXPECT_NE(std::vector<float>(data.train[0].image.values().begin(), data.train[0].image.values().end()),
            std::vector<float>(data.val[0].image.values().begin(), data.val[0].image.values().end()));
}

TEST(Cli, TrainZeroEpochs) {
  TempDir dir;
  spit(dir.path / "run.cfg", std::string(kTinyRun) + "train.epochs=0\n");
  ASSERT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "out", std::nullopt, std::nullopt}), cli::kExitOk);
  EXPECT_TRUE(fs::exists(dir.path / "out" / "model.ckpt"));
  EXPECT_EQ(slurp(dir.path / "out" / "log.csv"), std::string(kLogHeader) + "\n");
  EXPECT_NE(slurp(dir.path / "out" / "config.txt").find("train.epochs=0"), std::string::npos);
}

TEST(Cli, TrainIsDeterministicAndEvalRepeats) {
  TempDir dir;
  spit(dir.path / "run.cfg", kTinyRun);
  ASSERT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "a", std::nullopt, std::nullopt}), 0);
  ASSERT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "b", std::nullopt, std::nullopt}), 0);
  const auto log = slurp(dir.path / "a" / "log.csv");
  EXPECT_EQ(log, slurp(dir.path / "b" / "log.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
  EXPECT_EQ(slurp(dir.path / "a" / "model.ckpt"), slurp(dir.path / "b" / "model.ckpt"));

  ASSERT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "c", std::nullopt, std::uint64_t{7}}), 0);
  EXPECT_NE(slurp(dir.path / "c" / "log.csv"), log);
  EXPECT_NE(slurp(dir.path / "c" / "config.txt").find("train.seed=7"), std::string::npos);

  ASSERT_EQ(cli::cmd_synth(3, 32, 11, dir.path / "val"), 0);
  const cli::ModelArgs model{dir.path / "run.cfg", dir.path / "a" / "model.ckpt"};
  std::ostringstream first, second;
  ASSERT_EQ(cli::cmd_eval(model, dir.path / "val", first), 0);
  ASSERT_EQ(cli::cmd_eval(model, dir.path / "val", second), 0);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(first.str().rfind("mDice=", 0), 0u) << first.str();
  EXPECT_NE(first.str().find(" mIoU="), std::string::npos);

  fs::create_directories(dir.path / "empty");
  std::ostringstream none;
  EXPECT_EQ(cli::cmd_eval(model, dir.path / "empty", none), cli::kExitError);
  EXPECT_EQ(cli::cmd_eval({dir.path / "run.cfg", dir.path / "missing.ckpt"}, dir.path / "val", none), cli::kExitError);
}

TEST(Cli, PredictHeatmapSynth) {
  TempDir dir;
  spit(dir.path / "run.cfg", std::string(kTinyRun) + "train.epochs=0\n");
  ASSERT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "out", std::nullopt, std::nullopt}), 0);
  ASSERT_EQ(cli::cmd_synth(10, 32, 3, dir.path / "set"), 0);
  int pairs = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "set" / "images")) {
    pairs += fs::exists(dir.path / "set" / "masks" / (e.path().stem().string() + ".pgm"));
  }
  EXPECT_EQ(pairs, 10);

  // Non-square input exercises the resize back to the original size.
  const auto img = resize_image(load_netpbm(dir.path / "set" / "images" / "synth_0000.ppm"), 40, 24);
  save_netpbm(img, dir.path / "img.ppm");
  const cli::ModelArgs model{dir.path / "run.cfg", dir.path / "out" / "model.ckpt"};
  ASSERT_EQ(cli::cmd_predict(model, dir.path / "img.ppm", dir.path / "pred.pgm"), 0);
  const auto bytes = read_file(dir.path / "pred.pgm");
  EXPECT_EQ(bytes[0], 'P');
  EXPECT_EQ(bytes[1], '5');
  const auto pred = decode_netpbm(bytes);
  EXPECT_EQ(pred.shape(), (Shape{1, 40, 24}));
  const std::string header = "P5\n24 40\n255\n";
  for (std::size_t i = bytes.size() - 40 * 24; i < bytes.size(); ++i) ASSERT_TRUE(bytes[i] == 0 || bytes[i] == 255);

  ASSERT_EQ(cli::cmd_heatmap(model, dir.path / "img.ppm", dir.path / "heat"), 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "heat")) files += e.path().extension() == ".pgm";
  EXPECT_EQ(files, 16);
  for (int s = 1; s <= 4; ++s)
    for (const char* kind : {"raw", "le", "fused"})
      EXPECT_TRUE(fs::exists(dir.path / "heat" / ("stage" + std::to_string(s) + "_" + kind + ".pgm")));

  EXPECT_EQ(cli::cmd_predict(model, dir.path / "nope.ppm", dir.path / "x.pgm"), cli::kExitError);
  EXPECT_EQ(cli::cmd_synth(2, 33, 1, dir.path / "bad"), cli::kExitError);
}

TEST(Cli, DivergenceExitCode) {
  TempDir dir;
  spit(dir.path / "run.cfg", std::string(kTinyRun) + "train.lr=1e30\ntrain.epochs=3\n");
  EXPECT_EQ(cli::cmd_train({dir.path / "run.cfg", dir.path / "out", std::nullopt, std::nullopt}), cli::kExitDiverged);
}

TEST(Cli, GradcheckPassesAndCatchesBrokenBackward) {
  std::vector<GradCase> cases = gradcheck_cases();
  std::vector<GradCase> fast;
  for (auto& c : cases)
    if (c.name == "conv2d" || c.name == "linear") fast.push_back(c);
  std::ostringstream ok;
  EXPECT_EQ(cli::cmd_gradcheck(ok, fast), 0) << ok.str();
  EXPECT_NE(ok.str().find("conv2d"), std::string::npos);

  replace_case(fast, GradCase{"conv2d", kLayerGradTolerance, [] {
                                auto x = Tensor<double>::normal({1, 2, 5, 5}, 1, 1.0);
                                auto w = Tensor<double>::normal({3, 2, 3, 3}, 2, 0.3);
                                x.set_requires_grad(true);
                                w.set_requires_grad(true);
                                const auto r = Tensor<double>::normal({1, 3, 5, 5}, 3, 1.0);
                                return grad_check_params([=] { return sum(mul(shifted_conv(x, w, 1), r)); }, {x, w});
                              }});
  std::ostringstream bad;
  EXPECT_EQ(cli::cmd_gradcheck(bad, fast), cli::kExitError);
  std::istringstream lines(bad.str());
  std::string line;
  bool conv_flagged = false, linear_ok = false;
  while (std::getline(lines, line)) {
    if (line.rfind("conv2d", 0) == 0) conv_flagged = line.find("FAIL") != std::string::npos;
    if (line.rfind("linear", 0) == 0) linear_ok = line.find(" ok") != std::string::npos;
  }
  EXPECT_TRUE(conv_flagged) << bad.str();
  EXPECT_TRUE(linear_ok) << bad.str();
}
