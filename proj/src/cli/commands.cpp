#include "ssf/commands.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <string>

#include "ssf/checkpoint.hpp"
#include "ssf/config.hpp"
#include "ssf/dataset.hpp"
#include "ssf/netpbm.hpp"
#include "ssf/ops.hpp"
#include "ssf/trainer.hpp"

namespace ssf::cli {

namespace {

int report(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e); err && err->code() == Errc::divergence_detected) {
    spdlog::error("{}", e.what());
    return kExitDiverged;
  }
  spdlog::error("{}", e.what());
  return kExitError;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return report(e);
  }
}

RunConfig read_config(const std::optional<path>& p) { return p ? load_run_config(*p) : parse_run_config(""); }

SSFormer<float> load_checkpointed(const ModelArgs& args, const RunConfig& cfg) {
  SSFormer<float> model(cfg.model(), cfg.seed);
  load_model(model, checkpoint_load(args.ckpt));
  return model;
}

/// [3,H,W] image from a P6, or a P5 repeated over three channels.
Tensor<float> read_rgb(const path& p) {
  auto img = load_netpbm(p);
  if (img.dim(0) == 3) return img;
  std::vector<float> v;
  v.reserve(static_cast<std::size_t>(img.numel() * 3));
  for (int c = 0; c < 3; ++c) v.insert(v.end(), img.values().begin(), img.values().end());
  return Tensor<float>({3, img.dim(1), img.dim(2)}, std::move(v));
}

Tensor<float> as_batch(const Tensor<float>& image, std::int64_t size) {
  const auto resized = resize_image(image, size, size);
  return reshape(resized, {1, 3, size, size});
}

void save_heat(const Tensor<double>& h, const path& p) { save_netpbm(h.cast<float>(), p); }

}  // namespace

void configure_logging() {
  auto logger = spdlog::stderr_color_st("ssf");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("SSF_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

int cmd_train(const TrainArgs& args) {
  return guarded([&] {
    auto cfg = read_config(args.config);
    std::string echoed = cfg.source_text;
    if (args.seed) {
      cfg.seed = *args.seed;
      if (!echoed.empty() && echoed.back() != '\n') echoed += '\n';
      echoed += "train.seed=" + std::to_string(*args.seed) + "  # --seed\n";
    }
    if (args.data) cfg.data_dir = args.data->string();
    spdlog::info("config:\n{}", echoed);
    spdlog::debug("effective config:\n{}", render_run_config(cfg));

    const auto data = load_run_data(cfg);
    spdlog::info("{} training samples, {} validation samples at {}x{}", data.train.size(), data.val.size(), cfg.size, cfg.size);

    std::filesystem::create_directories(args.out);
    {
      std::ofstream f(args.out / "config.txt", std::ios::binary);
      f << echoed;
    }
    std::ofstream log(args.out / "log.csv", std::ios::binary);
    log << kLogHeader << "\n";
    log.flush();

    SSFormer<float> model(cfg.model(), cfg.seed);
    spdlog::info("model has {} parameters", model.parameter_count());
    const auto started = std::chrono::steady_clock::now();
    fit(model, data.train, data.val, cfg.fit_options(), [&](const EpochLog& row) {
      log << format_log_row(row) << "\n";
      log.flush();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      spdlog::info("epoch {} lr {:.3g} loss {:.4f} train mDice {:.4f} val mDice {:.4f} val mIoU {:.4f} ({:.0f}s)", row.epoch, row.lr,
                   row.train_loss, row.train_mdice, row.val_mdice, row.val_miou, secs);
    });
    save_model(model, args.out / "model.ckpt");
    spdlog::info("wrote {}", (args.out / "model.ckpt").string());
    return kExitOk;
  });
}

int cmd_eval(const ModelArgs& model_args, const path& data, std::ostream& out) {
  return guarded([&] {
    const auto cfg = read_config(model_args.config);
    const auto samples = load_dataset(data, cfg.size);
    if (samples.empty()) {
      spdlog::error("no samples in {}", data.string());
      return kExitError;
    }
    const auto model = load_checkpointed(model_args, cfg);
    const auto r = evaluate(model, samples);
    char line[96];
    std::snprintf(line, sizeof line, "mDice=%.6f mIoU=%.6f\n", r.mdice, r.miou);
    out << line;
    return kExitOk;
  });
}

int cmd_predict(const ModelArgs& model_args, const path& image, const path& out_path) {
  return guarded([&] {
    const auto cfg = read_config(model_args.config);
    const auto rgb = read_rgb(image);
    const auto model = load_checkpointed(model_args, cfg);
    const auto mask = predict_masks(model, as_batch(rgb, cfg.size));
    const auto full = resize_mask(reshape(mask, {1, cfg.size, cfg.size}), rgb.dim(1), rgb.dim(2));
    save_netpbm(full, out_path);
    return kExitOk;
  });
}

int cmd_heatmap(const ModelArgs& model_args, const path& image, const path& out_dir) {
  return guarded([&] {
    const auto cfg = read_config(model_args.config);
    const auto rgb = read_rgb(image);
    const auto model = load_checkpointed(model_args, cfg);
    ForwardTrace<float> trace;
    model.forward(as_batch(rgb, cfg.size), &trace);
    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < kStages; ++i) {
      const auto stem = "stage" + std::to_string(i + 1);
      save_heat(feature_heatmap(trace.pyramid.levels[i]), out_dir / (stem + "_raw.pgm"));
      save_heat(feature_heatmap(trace.decoder.le[i]), out_dir / (stem + "_le.pgm"));
      save_heat(feature_heatmap(trace.decoder.fused[i]), out_dir / (stem + "_fused.pgm"));
      const auto& att = *trace.attention.stages[i];
      const std::int64_t center = (att.q_h / 2) * att.q_w + att.q_w / 2;
      save_heat(attention_heatmap(trace.attention, i, center), out_dir / ("attn" + std::to_string(i + 1) + ".pgm"));
    }
    return kExitOk;
  });
}

int cmd_synth(int n, std::int64_t size, std::uint64_t seed, const path& out_dir) {
  return guarded([&] {
    if (n < 0) fail(Errc::invalid_config, "N must be non-negative");
    save_dataset(out_dir, synth_dataset(n, size, seed));
    spdlog::info("wrote {} samples to {}", n, out_dir.string());
    return kExitOk;
  });
}

int cmd_gradcheck(std::ostream& out, const std::vector<GradCase>& cases) {
  bool ok = true;
  run_grad_suite(cases, [&](const GradCaseResult& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s max_rel_err=%.3e threshold=%.0e %s", r.name.c_str(), r.max_error, r.threshold,
                  r.passed ? "ok" : "FAIL");
    out << line;
    if (!r.error.empty()) out << " (" << r.error << ")";
    out << "\n";
    ok = ok && r.passed;
  });
  return ok ? kExitOk : kExitError;
}

}  // namespace ssf::cli
