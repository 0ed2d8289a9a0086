#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssf/dataset.hpp"
#include "ssf/metrics.hpp"
#include "ssf/model.hpp"
#include "ssf/optim.hpp"

namespace ssf {

/// Optimizer bound to a model's parameter list.
class AdamW {
 public:
  AdamW(SSFormer<float>& model, const AdamWOptions& options);

  void set_lr(double lr) { state_.options.lr = lr; }
  double lr() const { return state_.options.lr; }
  const OptimState<float>& state() const { return state_; }
  void step(const Gradients<float>& grads);

 private:
  std::vector<Tensor<float>> params_;
  OptimState<float> state_;
};

struct StepResult {
  double loss = 0.0;
  Tensor<float> logits;
};

/// forward -> combined loss -> backward -> AdamW on one batch.
/// DivergenceDetected when the loss is not finite.
StepResult train_step(SSFormer<float>& model, const Tensor<float>& images, const Tensor<float>& masks, AdamW& optim);

struct TrainOptions {
  int batch_size = 4;
  bool augment = true;
};

struct EpochStats {
  double mean_loss = 0.0;
  double train_mdice = 0.0;
};

/// Shuffles with `rng`, then runs train_step per batch (augmenting first).
/// DivergenceDetected names the offending batch.
EpochStats train_epoch(SSFormer<float>& model, std::span<const Sample> data, AdamW& optim, Rng& rng, const TrainOptions& options);

struct EvalResult {
  double mdice = 0.0;
  double miou = 0.0;
  std::vector<MaskScore> per_image;
};

/// No augmentation, threshold 0.5; never touches parameters.
EvalResult evaluate(const SSFormer<float>& model, std::span<const Sample> data, int batch_size = 8);

/// Thresholded predictions for a batch of images [N,3,H,W] -> masks [N,1,H,W].
Tensor<float> predict_masks(const SSFormer<float>& model, const Tensor<float>& images);

struct FitOptions {
  int epochs = 30;
  TrainOptions train;
  Schedule schedule;
  AdamWOptions adamw;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_mdice = 0.0;
  double val_mdice = 0.0;
  double val_miou = 0.0;
};

/// Trains for options.epochs with the step-decay schedule, evaluating on
/// `val` after each epoch.
std::vector<EpochLog> fit(SSFormer<float>& model, std::span<const Sample> train, std::span<const Sample> val,
                          const FitOptions& options, const std::function<void(const EpochLog&)>& on_epoch = {});

inline constexpr const char* kLogHeader = "epoch,lr,train_loss,train_mdice,val_mdice,val_miou";
std::string format_log_row(const EpochLog& row);

}  // namespace ssf
