#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssf/rng.hpp"
#include "ssf/tensor.hpp"

namespace ssf {

/// image [3,H,W] in [0,1]; mask [1,H,W] with values exactly 0 or 1.
struct Sample {
  Tensor<float> image;
  Tensor<float> mask;
  std::string id;
};

/// Bilinear resize of a [C,H,W] image (same convention as bilinear_upsample).
Tensor<float> resize_image(const Tensor<float>& image, std::int64_t h, std::int64_t w);
/// Nearest-neighbour resize of a [C,H,W] mask; output stays binary.
Tensor<float> resize_mask(const Tensor<float>& mask, std::int64_t h, std::int64_t w);
Sample resize_sample(const Sample& s, std::int64_t size);

enum class Element { cross3, square3 };

/// Binary max-filter over the last two axes with zero padding outside.
/// InvalidTarget on non-binary input.
Tensor<float> dilate(const Tensor<float>& mask, Element element, int iterations);
/// Binary min-filter over the last two axes with zero padding outside.
Tensor<float> erode(const Tensor<float>& mask, Element element, int iterations);

enum class Morph { none, dilate, erode };

/// One draw of the augmentation pipeline. Steps run in field order.
struct AugmentPlan {
  bool hflip = false;
  bool vflip = false;
  /// Resize by this factor, then center crop or zero pad back.
  double scale = 1.0;
  /// Counter-clockwise quarter turns; odd turns on non-square inputs become
  /// a half turn so the shape is kept.
  int quarter_turns = 0;
  /// Applied to the mask only, with a 3x3 cross.
  Morph morph = Morph::none;
  int morph_iterations = 0;
};

/// Each step is enabled with probability 0.5: scale factor uniform in
/// [0.75, 1.25], quarter turns in {1,2,3}, dilate or erode for 1-2 passes.
AugmentPlan draw_augment_plan(Rng& rng);
/// The geometric part of `plan` on one [C,H,W] tensor (nearest-neighbour
/// scaling when `is_mask`).
Tensor<float> apply_geometric(const Tensor<float>& t, const AugmentPlan& plan, bool is_mask);
Sample apply_augment(const Sample& s, const AugmentPlan& plan);
Sample augment(const Sample& s, Rng& rng);

/// Smooth-noise backgrounds with 1-3 blurred ellipses; the mask is the
/// union of ellipse interiors with 1%..60% coverage. Deterministic per
/// (n, size, seed). InvalidShape unless size is a positive multiple of 32.
std::vector<Sample> synth_dataset(int n, std::int64_t size, std::uint64_t seed);

/// Writes images/<id>.ppm and masks/<id>.pgm under `dir`.
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
/// Pairs images/<stem>.ppm with masks/<stem>.pgm in stem order, resizing to
/// size x size when size > 0.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, std::int64_t size = 0);

/// Stacks images into [N,3,H,W] and masks into [N,1,H,W].
Tensor<float> stack_images(const std::vector<const Sample*>& batch);
Tensor<float> stack_masks(const std::vector<const Sample*>& batch);

}  // namespace ssf
