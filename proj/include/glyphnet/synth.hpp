#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glyphnet/dataset.hpp"
#include "glyphnet/errors.hpp"
#include "glyphnet/image.hpp"
#include "glyphnet/image_io.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

// Per-sample nuisance variation applied to each rendered glyph. `scaled`
// produces the elevated-noise settings used by the robustness experiments.
struct SynthNuisance {
  double rotation_degrees = 6.0;
  double max_shift = 1.0;          // pixels, each axis
  double max_blur_sigma = 0.5;
  double texture_amplitude = 0.08;
  double contrast_low = 0.75;      // foreground contrast factor U[low, 1]
  double brightness_jitter = 0.05;
  double pixel_noise = 0.02;

  static SynthNuisance scaled(double level) {
    SynthNuisance n;
    n.rotation_degrees = 6.0 * level;
    n.max_shift = 1.0 * level;
    n.max_blur_sigma = 0.5 * level;
    n.texture_amplitude = 0.08 * level;
    n.contrast_low = std::max(0.3, 1.0 - 0.25 * level);
    n.brightness_jitter = 0.05 * level;
    n.pixel_noise = 0.02 * level;
    return n;
  }
};

namespace detail {

// Bundled 8x8 bitmap glyphs (one byte per row, MSB = leftmost pixel). Groups
// beyond the set reuse a base glyph with extra deterministic cell flips.
inline constexpr std::array<std::array<std::uint8_t, 8>, 16> kGlyphBitmaps = {{
    {0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00},  // 0
    {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
    {0x3C, 0x66, 0x06, 0x1C, 0x30, 0x66, 0x7E, 0x00},  // 2
    {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},  // 3
    {0x0C, 0x1C, 0x3C, 0x6C, 0x7E, 0x0C, 0x0C, 0x00},  // 4
    {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 5
    {0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},  // 6
    {0x7E, 0x66, 0x06, 0x0C, 0x18, 0x18, 0x18, 0x00},  // 7
    {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},  // 8
    {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},  // 9
    {0x18, 0x3C, 0x66, 0x66, 0x7E, 0x66, 0x66, 0x00},  // A
    {0x7C, 0x66, 0x66, 0x7C, 0x66, 0x66, 0x7C, 0x00},  // B
    {0x3C, 0x66, 0x60, 0x60, 0x60, 0x66, 0x3C, 0x00},  // C
    {0x78, 0x6C, 0x66, 0x66, 0x66, 0x6C, 0x78, 0x00},  // D
    {0x7E, 0x60, 0x60, 0x78, 0x60, 0x60, 0x7E, 0x00},  // E
    {0x7E, 0x60, 0x60, 0x78, 0x60, 0x60, 0x60, 0x00},  // F
}};

using GlyphGrid = std::array<std::array<int, 8>, 8>;

inline GlyphGrid glyph_grid(int glyph_index) {
  GlyphGrid g{};
  const auto& rows = kGlyphBitmaps[glyph_index % kGlyphBitmaps.size()];
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) g[y][x] = (rows[y] >> (7 - x)) & 1;
  return g;
}

// Cells on a stroke boundary: toggling one reads as a small stroke tweak.
inline std::vector<std::pair<int, int>> boundary_cells(const GlyphGrid& g) {
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const int v = g[y][x];
      const bool boundary =
          (y > 0 && g[y - 1][x] != v) || (y < 7 && g[y + 1][x] != v) ||
          (x > 0 && g[y][x - 1] != v) || (x < 7 && g[y][x + 1] != v);
      if (boundary) cells.emplace_back(y, x);
    }
  return cells;
}

// 8x8 grid rendered at scale 3 into a 32x32 canvas, ink 1.0 on background 0.
inline Image render_grid(const GlyphGrid& g) {
  constexpr int kScale = 3;
  constexpr int kOffset = 4;
  Image img(32, 32, 1, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (g[y][x])
        for (int dy = 0; dy < kScale; ++dy)
          for (int dx = 0; dx < kScale; ++dx)
            img.at(kOffset + y * kScale + dy, kOffset + x * kScale + dx, 0) = 1.0;
  return img;
}

inline int pixel_diff_count(const Image& a, const Image& b) {
  int diff = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) ++diff;
  return diff;
}

// Smooth low-frequency field in [-1, 1]: random 4x4 grid, bilinear upsample.
inline Image texture_field(Rng& rng, int h, int w) {
  Image grid(4, 4, 1);
  for (double& v : grid.data) v = rng.uniform(-1.0, 1.0);
  return resize_bilinear(grid, h, w);
}

inline std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace detail

// Renders `num_groups` groups of near-identical glyph classes. Every class in
// a group shares a base glyph; variants differ by one or two toggled boundary
// cells (>= 1 and <= 5% of pixels before nuisance variation, enforced here).
// Each class gets `samples_per_class` nuisance-varied samples, 32x32
// grayscale, fully determined by (seed).
inline GlyphDataset synth_resembling_glyphs(int num_groups, int glyphs_per_group,
                                            int samples_per_class, std::uint64_t seed,
                                            const SynthNuisance& nuisance = {}) {
  require(num_groups >= 1, "synth: num_groups must be positive");
  require(glyphs_per_group >= 2, "synth: glyphs_per_group must be at least 2");
  require(samples_per_class >= 1, "synth: samples_per_class must be positive");

  GlyphDataset ds;
  for (int g = 0; g < num_groups; ++g) {
    detail::GlyphGrid base = detail::glyph_grid(g);
    if (g >= static_cast<int>(detail::kGlyphBitmaps.size())) {
      // Derived base glyph: flip three boundary cells of the reused bitmap.
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g), 0xBA5EULL));
      auto cells = detail::boundary_cells(base);
      rng.shuffle(cells);
      for (int k = 0; k < 3 && k < static_cast<int>(cells.size()); ++k)
        base[cells[k].first][cells[k].second] ^= 1;
    }

    Rng cell_rng(mix_seed(seed, static_cast<std::uint64_t>(g), 0x70661ULL));
    auto candidates = detail::boundary_cells(base);
    cell_rng.shuffle(candidates);
    const int toggles_per_variant =
        2 * (glyphs_per_group - 1) <= static_cast<int>(candidates.size()) ? 2 : 1;
    require((glyphs_per_group - 1) * toggles_per_variant <=
                static_cast<int>(candidates.size()),
            "synth: glyphs_per_group too large for the base glyph complexity");

    std::vector<Image> bases;
    for (int v = 0; v < glyphs_per_group; ++v) {
      detail::GlyphGrid grid = base;
      if (v > 0) {
        for (int k = 0; k < toggles_per_variant; ++k) {
          const auto [cy, cx] = candidates[(v - 1) * toggles_per_variant + k];
          grid[cy][cx] ^= 1;
        }
      }
      bases.push_back(detail::render_grid(grid));
    }

    // Micro-perturbation contract: intra-group bases differ pairwise in at
    // least one pixel and at most 5% of the canvas.
    const int max_diff = static_cast<int>(0.05 * 32 * 32);
    for (std::size_t a = 0; a < bases.size(); ++a)
      for (std::size_t b = a + 1; b < bases.size(); ++b) {
        const int diff = detail::pixel_diff_count(bases[a], bases[b]);
        require(diff >= 1 && diff <= max_diff,
                "synth: intra-group pixel difference " + std::to_string(diff) +
                    " outside [1, " + std::to_string(max_diff) + "]");
      }

    for (int v = 0; v < glyphs_per_group; ++v) {
      const std::string class_name =
          "g" + detail::zero_pad(g, 3) + "v" + detail::zero_pad(v, 2);
      const int class_id = ds.num_classes();
      ds.class_names.push_back(class_name);
      for (int sidx = 0; sidx < samples_per_class; ++sidx) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g),
                         static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(sidx),
                         0x5A3D1EULL));
        Image img = bases[v];
        const double angle = rng.uniform(-nuisance.rotation_degrees, nuisance.rotation_degrees);
        const double ty = rng.uniform(-nuisance.max_shift, nuisance.max_shift);
        const double tx = rng.uniform(-nuisance.max_shift, nuisance.max_shift);
        img = rotate_translate(img, angle, ty, tx);
        img = gaussian_blur(img, rng.uniform(0.0, nuisance.max_blur_sigma));

        const double bg = rng.uniform(0.05, 0.20);
        const double contrast = rng.uniform(nuisance.contrast_low, 1.0);
        const double ink_range = contrast * (0.95 - bg);
        const Image texture = detail::texture_field(rng, img.h, img.w);
        const double offset = rng.uniform(-nuisance.brightness_jitter, nuisance.brightness_jitter);
        for (int y = 0; y < img.h; ++y)
          for (int x = 0; x < img.w; ++x) {
            double val = bg + ink_range * img.at(y, x, 0);
            val += nuisance.texture_amplitude * texture.at(y, x, 0);
            val += offset + nuisance.pixel_noise * rng.normal();
            img.at(y, x, 0) = val;
          }
        img.clamp01();

        SampleRecord rec;
        rec.class_id = class_id;
        rec.class_name = class_name;
        rec.sample_id = class_name + "/" + detail::zero_pad(sidx, 3);
        rec.payload = std::move(img);
        ds.samples.push_back(std::move(rec));
      }
    }
  }
  ds.validate();
  return ds;
}

// Writes a dataset as a <root>/<class_name>/<sample>.png corpus (the layout
// `ingest` reads back).
inline void dump_dataset_png(const GlyphDataset& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  ImageProvider provider(ds, InputSize{32, 32, 1});
  fs::create_directories(out_dir);
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
    const SampleRecord& rec = ds.samples[i];
    const fs::path dir = fs::path(out_dir) / rec.class_name;
    fs::create_directories(dir);
    const std::string base = rec.sample_id.substr(rec.sample_id.find('/') + 1);
    save_png(provider.get(i), (dir / (base + ".png")).string());
  }
}

}  // namespace glyphnet
