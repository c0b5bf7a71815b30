#include "mvlloc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvl {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.shape()[0] != 3) {
    throw std::invalid_argument("color jitter needs a [3 x H x W] image, got " + shape_string(image.shape()));
  }
}

}  // namespace

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = (g - b) / delta;
    } else if (mx == g) {
      h = 2.0 + (b - r) / delta;
    } else {
      h = 4.0 + (r - g) / delta;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double scaled = h * 6.0;
  const int sector = static_cast<int>(std::floor(scaled)) % 6;
  const double f = scaled - std::floor(scaled);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

JitterSample sample_jitter(const ColorJitterFactors& factors, Rng& rng) {
  auto scale = [&rng](double f) { return f > 0.0 ? rng.uniform(std::max(0.0, 1.0 - f), 1.0 + f) : 1.0; };
  JitterSample s;
  s.brightness = scale(factors.brightness);
  s.contrast = scale(factors.contrast);
  s.saturation = scale(factors.saturation);
  s.hue_shift = factors.hue > 0.0 ? rng.uniform(-factors.hue, factors.hue) : 0.0;
  return s;
}

Tensor apply_jitter(const Tensor& image, const JitterSample& sample) {
  require_rgb(image);
  const std::size_t plane = image.shape()[1] * image.shape()[2];
  Tensor out = image;
  double* r = out.data().data();
  double* g = r + plane;
  double* b = g + plane;

  if (sample.brightness != 1.0) {
    for (auto& v : out.storage()) v = clamp01(v * sample.brightness);
  }
  if (sample.contrast != 1.0) {
    double mean_gray = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean_gray += kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    mean_gray /= static_cast<double>(plane);
    for (auto& v : out.storage()) v = clamp01(sample.contrast * v + (1.0 - sample.contrast) * mean_gray);
  }
  if (sample.saturation != 1.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double gray = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
      r[i] = clamp01(sample.saturation * r[i] + (1.0 - sample.saturation) * gray);
      g[i] = clamp01(sample.saturation * g[i] + (1.0 - sample.saturation) * gray);
      b[i] = clamp01(sample.saturation * b[i] + (1.0 - sample.saturation) * gray);
    }
  }
  if (sample.hue_shift != 0.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      const auto [h, s, v] = rgb_to_hsv(r[i], g[i], b[i]);
      const auto rgb = hsv_to_rgb(h + sample.hue_shift, s, v);
      r[i] = clamp01(rgb[0]);
      g[i] = clamp01(rgb[1]);
      b[i] = clamp01(rgb[2]);
    }
  }
  return out;
}

Tensor color_jitter(const Tensor& image, const ColorJitterFactors& factors, Rng& rng) {
  require_rgb(image);
  return apply_jitter(image, sample_jitter(factors, rng));
}

CropOffset crop_offset(std::size_t height, std::size_t width, std::size_t out, CropMode mode, Rng& rng) {
  if (height < out || width < out) {
    throw std::invalid_argument("image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is smaller than crop size " + std::to_string(out));
  }
  if (mode == CropMode::kCenter) return {(height - out) / 2, (width - out) / 2};
  const auto top = static_cast<std::size_t>(rng.below(height - out + 1));
  const auto left = static_cast<std::size_t>(rng.below(width - out + 1));
  return {top, left};
}

Tensor crop(const Tensor& image, std::size_t out, CropMode mode, Rng& rng) {
  if (image.rank() != 3) throw std::invalid_argument("crop needs a [C x H x W] image");
  const std::size_t c = image.shape()[0];
  const std::size_t h = image.shape()[1];
  const std::size_t w = image.shape()[2];
  const CropOffset off = crop_offset(h, w, out, mode, rng);
  if (h == out && w == out) return image;
  Tensor result({c, out, out});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < out; ++y)
      for (std::size_t x = 0; x < out; ++x)
        result[(ch * out + y) * out + x] = image[(ch * h + off.top + y) * w + off.left + x];
  return result;
}

}  // namespace mvl
