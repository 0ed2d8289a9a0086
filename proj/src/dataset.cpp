#include "ssf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ssf/netpbm.hpp"
#include "ssf/nn.hpp"

namespace ssf {

Tensor<float> resize_image(const Tensor<float>& image, std::int64_t h, std::int64_t w) {
  if (image.rank() != 3) fail(Errc::shape_mismatch, "resize_image expects [C,H,W]");
  if (image.dim(1) == h && image.dim(2) == w) return image.clone();
  const auto batched = with_shape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
  const auto out = bilinear_upsample(batched, h, w);
  return with_shape(out, {image.dim(0), h, w});
}

Tensor<float> resize_mask(const Tensor<float>& mask, std::int64_t h, std::int64_t w) {
  if (mask.rank() != 3) fail(Errc::shape_mismatch, "resize_mask expects [C,H,W]");
  if (h < 1 || w < 1) fail(Errc::invalid_shape, "resize target must be >= 1");
  const std::int64_t c = mask.dim(0), in_h = mask.dim(1), in_w = mask.dim(2);
  auto src_index = [](std::int64_t d, std::int64_t in, std::int64_t out) {
    const auto s = static_cast<std::int64_t>(std::floor((static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out)));
    return std::min(s, in - 1);
  };
  std::vector<float> out(static_cast<std::size_t>(c * h * w));
  const float* p = mask.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      const auto sy = src_index(y, in_h, h);
      for (std::int64_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = p[(ch * in_h + sy) * in_w + src_index(x, in_w, w)];
    }
  }
  return Tensor<float>({c, h, w}, std::move(out));
}

Sample resize_sample(const Sample& s, std::int64_t size) {
  return {resize_image(s.image, size, size), resize_mask(s.mask, size, size), s.id};
}

namespace {

void require_binary(const Tensor<float>& mask) {
  for (float v : mask.values()) {
    if (v != 0.0f && v != 1.0f) fail(Errc::invalid_target, "morphology needs a binary mask");
  }
}

// One pass of a 3x3 max (dilate) or min (erode) filter over each plane.
Tensor<float> morph_pass(const Tensor<float>& mask, Element element, bool dilation) {
  const int r = mask.rank();
  if (r < 2) fail(Errc::shape_mismatch, "morphology needs at least 2 axes");
  const std::int64_t h = mask.dim(r - 2), w = mask.dim(r - 1);
  const std::int64_t planes = mask.numel() / (h * w);
  std::vector<float> out(static_cast<std::size_t>(mask.numel()));
  const float* p = mask.data();
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const float* src = p + pl * h * w;
    float* dst = out.data() + pl * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        float acc = dilation ? 0.0f : 1.0f;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (element == Element::cross3 && dy != 0 && dx != 0) continue;
            const std::int64_t yy = y + dy, xx = x + dx;
            const bool inside = yy >= 0 && yy < h && xx >= 0 && xx < w;
            const float v = inside ? src[yy * w + xx] : 0.0f;
            acc = dilation ? std::max(acc, v) : std::min(acc, v);
          }
        }
        dst[y * w + x] = acc;
      }
    }
  }
  return Tensor<float>(mask.shape(), std::move(out));
}

Tensor<float> morph(const Tensor<float>& mask, Element element, int iterations, bool dilation) {
  require_binary(mask);
  auto out = mask.clone();
  for (int i = 0; i < iterations; ++i) out = morph_pass(out, element, dilation);
  return out;
}

Tensor<float> flip(const Tensor<float>& t, bool horizontal) {
  const std::int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  std::vector<float> out(static_cast<std::size_t>(t.numel()));
  const float* p = t.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        const std::int64_t sy = horizontal ? y : h - 1 - y;
        const std::int64_t sx = horizontal ? w - 1 - x : x;
        out[(ch * h + y) * w + x] = p[(ch * h + sy) * w + sx];
      }
    }
  }
  return Tensor<float>(t.shape(), std::move(out));
}

Tensor<float> rotate_quarter(const Tensor<float>& t, int turns) {
  const std::int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  turns = ((turns % 4) + 4) % 4;
  if (turns % 2 == 1 && h != w) turns = 2;
  if (turns == 0) return t;
  std::vector<float> out(static_cast<std::size_t>(t.numel()));
  const float* p = t.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        std::int64_t sy = y, sx = x;
        if (turns == 1) {
          sy = x;
          sx = w - 1 - y;
        } else if (turns == 2) {
          sy = h - 1 - y;
          sx = w - 1 - x;
        } else {
          sy = h - 1 - x;
          sx = y;
        }
        out[(ch * h + y) * w + x] = p[(ch * h + sy) * w + sx];
      }
    }
  }
  return Tensor<float>(t.shape(), std::move(out));
}

Tensor<float> scale_and_recenter(const Tensor<float>& t, double factor, bool is_mask) {
  const std::int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const auto sh = std::max<std::int64_t>(1, std::lround(static_cast<double>(h) * factor));
  const auto sw = std::max<std::int64_t>(1, std::lround(static_cast<double>(w) * factor));
  if (sh == h && sw == w) return t;
  const auto scaled = is_mask ? resize_mask(t, sh, sw) : resize_image(t, sh, sw);
  // Offsets of the scaled image inside the output frame (negative = crop).
  const std::int64_t oy = (h - sh) / 2;
  const std::int64_t ox = (w - sw) / 2;
  std::vector<float> out(static_cast<std::size_t>(t.numel()), 0.0f);
  const float* p = scaled.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      const std::int64_t sy = y - oy;
      if (sy < 0 || sy >= sh) continue;
      for (std::int64_t x = 0; x < w; ++x) {
        const std::int64_t sx = x - ox;
        if (sx < 0 || sx >= sw) continue;
        out[(ch * h + y) * w + x] = std::clamp(p[(ch * sh + sy) * sw + sx], 0.0f, 1.0f);
      }
    }
  }
  return Tensor<float>(t.shape(), std::move(out));
}

}  // namespace

Tensor<float> dilate(const Tensor<float>& mask, Element element, int iterations) { return morph(mask, element, iterations, true); }

Tensor<float> erode(const Tensor<float>& mask, Element element, int iterations) { return morph(mask, element, iterations, false); }

AugmentPlan draw_augment_plan(Rng& rng) {
  AugmentPlan plan;
  plan.hflip = rng.bernoulli(0.5);
  plan.vflip = rng.bernoulli(0.5);
  if (rng.bernoulli(0.5)) plan.scale = rng.uniform(0.75, 1.25);
  if (rng.bernoulli(0.5)) plan.quarter_turns = 1 + static_cast<int>(rng.below(3));
  if (rng.bernoulli(0.5)) {
    plan.morph = rng.bernoulli(0.5) ? Morph::dilate : Morph::erode;
    plan.morph_iterations = 1 + static_cast<int>(rng.below(2));
  }
  return plan;
}

Tensor<float> apply_geometric(const Tensor<float>& t, const AugmentPlan& plan, bool is_mask) {
  if (t.rank() != 3) fail(Errc::shape_mismatch, "augmentation expects [C,H,W]");
  Tensor<float> out = t;
  if (plan.hflip) out = flip(out, true);
  if (plan.vflip) out = flip(out, false);
  if (plan.scale != 1.0) out = scale_and_recenter(out, plan.scale, is_mask);
  if (plan.quarter_turns != 0) out = rotate_quarter(out, plan.quarter_turns);
  return out;
}

Sample apply_augment(const Sample& s, const AugmentPlan& plan) {
  Sample out{apply_geometric(s.image, plan, false), apply_geometric(s.mask, plan, true), s.id};
  if (plan.morph == Morph::dilate) out.mask = dilate(out.mask, Element::cross3, plan.morph_iterations);
  if (plan.morph == Morph::erode) out.mask = erode(out.mask, Element::cross3, plan.morph_iterations);
  return out;
}

Sample augment(const Sample& s, Rng& rng) { return apply_augment(s, draw_augment_plan(rng)); }

namespace {

struct Ellipse {
  double cx, cy, rx, ry, angle;
};

double ellipse_radius(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx, dy = y - e.cy;
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double u = (dx * c + dy * s) / e.rx;
  const double v = (-dx * s + dy * c) / e.ry;
  return std::sqrt(u * u + v * v);
}

Sample synth_sample(std::int64_t size, Rng& rng, std::string id) {
  const auto n = static_cast<std::size_t>(size * size);
  const double sz = static_cast<double>(size);

  std::vector<Ellipse> ellipses;
  std::vector<float> mask(n);
  for (;;) {
    ellipses.clear();
    const int count = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < count; ++i) {
      ellipses.push_back({rng.uniform(0.2, 0.8) * sz, rng.uniform(0.2, 0.8) * sz, rng.uniform(0.1, 0.25) * sz,
                          rng.uniform(0.1, 0.25) * sz, rng.uniform(0.0, std::numbers::pi)});
    }
    std::size_t covered = 0;
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) {
        bool inside = false;
        for (const auto& e : ellipses) inside = inside || ellipse_radius(e, x + 0.5, y + 0.5) <= 1.0;
        mask[y * size + x] = inside ? 1.0f : 0.0f;
        covered += inside;
      }
    }
    const double coverage = static_cast<double>(covered) / static_cast<double>(n);
    if (coverage >= 0.01 && coverage <= 0.60) break;
  }

  // Background: a coarse random colour field, bilinearly smoothed, plus grain.
  constexpr std::int64_t kCoarse = 5;
  const double base[3] = {0.55, 0.33, 0.28};
  std::vector<float> coarse(static_cast<std::size_t>(3 * kCoarse * kCoarse));
  for (int c = 0; c < 3; ++c) {
    for (std::int64_t i = 0; i < kCoarse * kCoarse; ++i) coarse[c * kCoarse * kCoarse + i] = static_cast<float>(base[c] + rng.uniform(-0.15, 0.15));
  }
  const auto smooth = bilinear_upsample(Tensor<float>({1, 3, kCoarse, kCoarse}, std::move(coarse)), size, size);

  const double tint[3] = {rng.uniform(0.3, 0.4), rng.uniform(0.16, 0.26), rng.uniform(0.0, 0.08)};
  std::vector<float> image(3 * n);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      double soft = 0.0;
      for (const auto& e : ellipses) {
        const double r = ellipse_radius(e, x + 0.5, y + 0.5);
        // Blurred rim, 0.5 exactly on the mask boundary.
        soft = std::max(soft, 1.0 / (1.0 + std::exp((r - 1.0) * 12.0)));
      }
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = static_cast<std::size_t>(c) * n + static_cast<std::size_t>(y * size + x);
        const double v = smooth.data()[i] + tint[c] * soft + 0.03 * rng.normal();
        image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return {Tensor<float>({3, size, size}, std::move(image)), Tensor<float>({1, size, size}, std::move(mask)), std::move(id)};
}

}  // namespace

std::vector<Sample> synth_dataset(int n, std::int64_t size, std::uint64_t seed) {
  if (n < 1) fail(Errc::invalid_shape, "synth_dataset needs n >= 1");
  if (size < 32 || size % 32 != 0) fail(Errc::invalid_shape, "synthetic size " + std::to_string(size) + " is not a multiple of 32");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", i);
    out.push_back(synth_sample(size, rng, id));
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  for (const auto& s : samples) {
    save_netpbm(s.image, dir / "images" / (s.id + ".ppm"));
    save_netpbm(s.mask, dir / "masks" / (s.id + ".pgm"));
  }
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, std::int64_t size) {
  const auto image_dir = dir / "images";
  std::vector<std::string> stems;
  if (std::filesystem::is_directory(image_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(image_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ppm") stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  std::vector<Sample> out;
  for (const auto& stem : stems) {
    const auto mask_path = dir / "masks" / (stem + ".pgm");
    if (!std::filesystem::exists(mask_path)) fail(Errc::format_error, "missing mask " + mask_path.string());
    Sample s{load_netpbm(image_dir / (stem + ".ppm")), load_mask(mask_path), stem};
    if (s.image.dim(0) != 3) fail(Errc::format_error, "image " + stem + " must be P6");
    if (size > 0) s = resize_sample(s, size);
    if (s.image.dim(1) != s.mask.dim(1) || s.image.dim(2) != s.mask.dim(2)) {
      fail(Errc::format_error, "image and mask sizes differ for " + stem);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

Tensor<float> stack(const std::vector<const Sample*>& batch, bool masks) {
  if (batch.empty()) fail(Errc::invalid_shape, "empty batch");
  const auto& first = masks ? batch.front()->mask : batch.front()->image;
  Shape shape = first.shape();
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(first.numel()) * batch.size());
  for (const auto* s : batch) {
    const auto& t = masks ? s->mask : s->image;
    if (t.shape() != shape) fail(Errc::shape_mismatch, "batch items differ in shape: " + s->id);
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  shape.insert(shape.begin(), static_cast<std::int64_t>(batch.size()));
  return Tensor<float>(std::move(shape), std::move(out));
}

}  // namespace

Tensor<float> stack_images(const std::vector<const Sample*>& batch) { return stack(batch, false); }
Tensor<float> stack_masks(const std::vector<const Sample*>& batch) { return stack(batch, true); }

}  // namespace ssf
