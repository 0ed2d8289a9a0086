#include "ssf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ssf/loss.hpp"

namespace ssf {

AdamW::AdamW(SSFormer<float>& model, const AdamWOptions& options) {
  for (auto& [name, t] : model.named_parameters()) params_.push_back(t);
  state_.options = options;
}

void AdamW::step(const Gradients<float>& grads) {
  std::vector<Tensor<float>> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(grads.of(p));
  adamw_step(std::span<Tensor<float>>(params_), std::span<const Tensor<float>>(g), state_);
}

StepResult train_step(SSFormer<float>& model, const Tensor<float>& images, const Tensor<float>& masks, AdamW& optim) {
  Tape<float> tape;
  auto logits = model.forward(images);
  const auto loss = combined_loss(logits, masks);
  const double value = loss.item();
  if (!std::isfinite(value)) fail(Errc::divergence_detected, "loss is not finite");
  const auto grads = tape.backward(loss);
  optim.step(grads);
  return {value, logits.detach()};
}

EpochStats train_epoch(SSFormer<float>& model, std::span<const Sample> data, AdamW& optim, Rng& rng, const TrainOptions& options) {
  if (data.empty()) fail(Errc::invalid_shape, "training set is empty");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  double loss_sum = 0.0, dice_sum = 0.0;
  std::size_t batches = 0, images = 0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    std::vector<Sample> augmented;
    std::vector<const Sample*> items;
    const std::size_t end = std::min(order.size(), start + batch);
    augmented.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& s = data[order[i]];
      augmented.push_back(options.augment ? augment(s, rng) : s);
    }
    for (const auto& s : augmented) items.push_back(&s);
    const auto x = stack_images(items);
    const auto y = stack_masks(items);
    StepResult step;
    try {
      step = train_step(model, x, y, optim);
    } catch (const Error& e) {
      if (e.code() != Errc::divergence_detected) throw;
      fail(Errc::divergence_detected, "non-finite loss in batch " + std::to_string(batches) + " (first sample " + items.front()->id + ")");
    }
    loss_sum += step.loss;
    ++batches;
    const auto pred = binarize_logits(step.logits);
    const std::int64_t per = pred.numel() / static_cast<std::int64_t>(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto p = Tensor<float>(items[i]->mask.shape(), std::vector<float>(pred.data() + i * per, pred.data() + (i + 1) * per));
      dice_sum += score_mask(p, items[i]->mask).dice;
      ++images;
    }
  }
  return {loss_sum / static_cast<double>(batches), dice_sum / static_cast<double>(images)};
}

Tensor<float> predict_masks(const SSFormer<float>& model, const Tensor<float>& images) {
  return binarize_logits(model.forward(images));
}

EvalResult evaluate(const SSFormer<float>& model, std::span<const Sample> data, int batch_size) {
  EvalResult result;
  if (data.empty()) return result;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < data.size(); start += batch) {
    std::vector<const Sample*> items;
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) items.push_back(&data[i]);
    const auto pred = predict_masks(model, stack_images(items));
    const std::int64_t per = pred.numel() / static_cast<std::int64_t>(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto p = Tensor<float>(items[i]->mask.shape(), std::vector<float>(pred.data() + i * per, pred.data() + (i + 1) * per));
      result.per_image.push_back(score_mask(p, items[i]->mask));
    }
  }
  for (const auto& s : result.per_image) {
    result.mdice += s.dice;
    result.miou += s.iou;
  }
  result.mdice /= static_cast<double>(result.per_image.size());
  result.miou /= static_cast<double>(result.per_image.size());
  return result;
}

std::vector<EpochLog> fit(SSFormer<float>& model, std::span<const Sample> train, std::span<const Sample> val,
                          const FitOptions& options, const std::function<void(const EpochLog&)>& on_epoch) {
  AdamW optim(model, options.adamw);
  Schedule schedule = options.schedule;
  schedule.total_epochs = std::max(schedule.total_epochs, options.epochs);
  Rng rng(options.seed);
  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    optim.set_lr(lr_at(epoch, schedule));
    const auto stats = train_epoch(model, train, optim, rng, options.train);
    EpochLog row{epoch, optim.lr(), stats.mean_loss, stats.train_mdice, 0.0, 0.0};
    if (!val.empty()) {
      const auto ev = evaluate(model, val);
      row.val_mdice = ev.mdice;
      row.val_miou = ev.miou;
    }
    logs.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return logs;
}

std::string format_log_row(const EpochLog& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6g,%.6f,%.6f,%.6f,%.6f", row.epoch, row.lr, row.train_loss, row.train_mdice, row.val_mdice,
                row.val_miou);
  return buf;
}

}  // namespace ssf
