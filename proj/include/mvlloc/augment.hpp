#pragma once

#include <array>
#include <cstddef>

#include "mvlloc/rng.hpp"
#include "mvlloc/tensor.hpp"

namespace mvl {

/// Jitter strengths; defaults are the training recipe's values.
struct ColorJitterFactors {
  double brightness = 0.6;
  double contrast = 0.7;
  double saturation = 0.7;
  double hue = 0.5;
};

/// One concrete draw of the jitter: multiplicative scales and a hue shift
/// expressed as a fraction of the hue wheel.
struct JitterSample {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_shift = 0.0;
};

/// Scales from [max(0, 1 - f), 1 + f], hue shift from [-h, h], in that order.
JitterSample sample_jitter(const ColorJitterFactors& factors, Rng& rng);

/// Applies brightness, contrast, saturation then hue, clamping to [0, 1]
/// after each step. Steps with a neutral value are skipped, so the neutral
/// sample is an exact identity. Image is [3 x H x W].
Tensor apply_jitter(const Tensor& image, const JitterSample& sample);

Tensor color_jitter(const Tensor& image, const ColorJitterFactors& factors, Rng& rng);

enum class CropMode { kRandom, kCenter };

struct CropOffset {
  std::size_t top = 0;
  std::size_t left = 0;
};

/// Offsets of an out x out window: centre uses floor((H - out) / 2), random
/// draws each offset uniformly. Throws when the image is smaller than out.
CropOffset crop_offset(std::size_t height, std::size_t width, std::size_t out, CropMode mode, Rng& rng);
Tensor crop(const Tensor& image, std::size_t out, CropMode mode, Rng& rng);

std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace mvl
