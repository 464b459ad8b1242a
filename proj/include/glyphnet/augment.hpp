#pragma once

#include <algorithm>
#include <cmath>

#include "glyphnet/errors.hpp"
#include "glyphnet/image.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

// Training-time augmentation: color jitter, random grayscale, random rotation.
struct AugmentationConfig {
  bool enabled = true;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;                   // fraction of the color wheel, <= 0.5
  double grayscale_probability = 0.2;
  double rotation_degrees = 15.0;

  void validate() const {
    require(brightness >= 0.0 && contrast >= 0.0 && saturation >= 0.0,
            "AugmentationConfig: jitter strengths must be nonnegative");
    require(hue >= 0.0 && hue <= 0.5, "AugmentationConfig: hue must lie in [0, 0.5]");
    require(grayscale_probability >= 0.0 && grayscale_probability <= 1.0,
            "AugmentationConfig: grayscale_probability must lie in [0, 1]");
    require(rotation_degrees >= 0.0,
            "AugmentationConfig: rotation_degrees must be nonnegative");
  }
};

namespace detail {

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  v = mx;
  const double d = mx - mn;
  s = mx <= 0.0 ? 0.0 : d / mx;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace detail

// Label and spatial dimensions are always preserved. With enabled=false the
// input is returned bit-exactly.
inline Image augment(const Image& img, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!cfg.enabled) return img;

  // Draws happen in a fixed order so a (seed-derived) stream fully determines
  // the transform.
  const double brightness_f = rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  const double contrast_f = rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  const double saturation_f = rng.uniform(std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
  const double hue_shift = rng.uniform(-cfg.hue, cfg.hue);
  const bool to_gray = rng.uniform() < cfg.grayscale_probability;
  const double angle = rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees);

  Image out = img;
  if (brightness_f != 1.0)
    for (double& v : out.data) v *= brightness_f;
  if (contrast_f != 1.0) {
    double mean = 0.0;
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) mean += luma(out, y, x);
    mean /= static_cast<double>(out.h) * out.w;
    for (double& v : out.data) v = (v - mean) * contrast_f + mean;
  }
  if (out.c == 3 && saturation_f != 1.0) {
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double gray = luma(out, y, x);
        for (int ch = 0; ch < 3; ++ch)
          out.at(y, x, ch) = gray + (out.at(y, x, ch) - gray) * saturation_f;
      }
  }
  if (out.c == 3 && hue_shift != 0.0) {
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        double h, s, v;
        detail::rgb_to_hsv(std::clamp(out.at(y, x, 0), 0.0, 1.0),
                           std::clamp(out.at(y, x, 1), 0.0, 1.0),
                           std::clamp(out.at(y, x, 2), 0.0, 1.0), h, s, v);
        double r, g, b;
        detail::hsv_to_rgb(h + hue_shift + 1.0, s, v, r, g, b);
        out.at(y, x, 0) = r;
        out.at(y, x, 1) = g;
        out.at(y, x, 2) = b;
      }
  }
  if (to_gray && out.c == 3) {
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double gray = luma(out, y, x);
        for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = gray;
      }
  }
  if (angle != 0.0) out = rotate_translate(out, angle);
  out.clamp01();
  return out;
}

}  // namespace glyphnet
