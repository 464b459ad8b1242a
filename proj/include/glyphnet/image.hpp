#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "glyphnet/errors.hpp"

namespace glyphnet {

// Dense H x W x C image, channel-last, double intensities in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : h(height), w(width), c(channels),
        data(static_cast<std::size_t>(height) * width * channels, fill) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }

  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

  void clamp01() {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
  }
};

// Rec.601 luma; identity for single-channel input.
inline double luma(const Image& img, int y, int x) {
  if (img.c == 1) return img.at(y, x, 0);
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

inline Image to_grayscale(const Image& img) {
  if (img.c == 1) return img;
  Image out(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) out.at(y, x, 0) = luma(img, y, x);
  return out;
}

inline Image to_channels(const Image& img, int channels) {
  require(channels == 1 || channels == 3, "to_channels: channels must be 1 or 3");
  if (img.c == channels) return img;
  if (channels == 1) return to_grayscale(img);
  Image out(img.h, img.w, 3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = img.at(y, x, 0);
  return out;
}

// Bilinear sample with zero-padding outside the image.
inline double sample_bilinear(const Image& img, double y, double x, int ch) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int yy = y0 + dy;
      const int xx = x0 + dx;
      if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) continue;
      const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += wgt * img.at(yy, xx, ch);
    }
  }
  return acc;
}

inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, "resize: output dims must be positive");
  if (out_h == img.h && out_w == img.w) return img;
  Image out(out_h, out_w, img.c);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double src_y = (y + 0.5) * sy - 0.5;
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int ch = 0; ch < img.c; ++ch)
        out.at(y, x, ch) = sample_bilinear(img, src_y, src_x, ch);
    }
  }
  return out;
}

// Aspect-preserving resize followed by centered zero-padding to (h, w).
inline Image resize_pad(const Image& img, int out_h, int out_w) {
  require(img.h > 0 && img.w > 0, "resize_pad: empty image");
  const double scale = std::min(static_cast<double>(out_h) / img.h,
                                static_cast<double>(out_w) / img.w);
  const int rh = std::max(1, static_cast<int>(std::lround(img.h * scale)));
  const int rw = std::max(1, static_cast<int>(std::lround(img.w * scale)));
  Image resized = resize_bilinear(img, rh, rw);
  if (rh == out_h && rw == out_w) return resized;
  Image out(out_h, out_w, img.c, 0.0);
  const int oy = (out_h - rh) / 2;
  const int ox = (out_w - rw) / 2;
  for (int y = 0; y < rh; ++y)
    for (int x = 0; x < rw; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(oy + y, ox + x, ch) = resized.at(y, x, ch);
  return out;
}

// Rotate about the image center by `degrees` (counter-clockwise), bilinear,
// zero fill. Subpixel translation (ty, tx) applied in the same warp.
inline Image rotate_translate(const Image& img, double degrees, double ty = 0.0,
                              double tx = 0.0) {
  if (degrees == 0.0 && ty == 0.0 && tx == 0.0) return img;
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = (img.h - 1) / 2.0;
  const double cx = (img.w - 1) / 2.0;
  Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      // Inverse map of output pixel into the source frame.
      const double dy = y - cy - ty;
      const double dx = x - cx - tx;
      const double src_y = cy + (cs * dy + sn * dx);
      const double src_x = cx + (-sn * dy + cs * dx);
      for (int ch = 0; ch < img.c; ++ch)
        out.at(y, x, ch) = sample_bilinear(img, src_y, src_x, ch);
    }
  }
  return out;
}

// Separable Gaussian blur; sigma <= 0 is the identity.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 1e-12) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  Image tmp(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, img.w - 1);
          acc += kernel[i + radius] * img.at(y, xx, ch);
        }
        tmp.at(y, x, ch) = acc;
      }
  Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, img.h - 1);
          acc += kernel[i + radius] * tmp.at(yy, x, ch);
        }
        out.at(y, x, ch) = acc;
      }
  return out;
}

}  // namespace glyphnet
