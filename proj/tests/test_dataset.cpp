#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <map>

#include "glyphnet/augment.hpp"
#include "glyphnet/dataset.hpp"
#include "glyphnet/synth.hpp"

using namespace glyphnet;
namespace fs = std::filesystem;

namespace {

// Directory-per-class fixture written as real PNG files.
struct CorpusFixture {
  fs::path root;

  explicit CorpusFixture(const std::string& name,
                         const std::map<std::string, int>& class_sizes) {
    root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    Rng rng(7);
    for (const auto& [cname, count] : class_sizes) {
      fs::create_directories(root / cname);
      for (int i = 0; i < count; ++i) {
        Image img(20, 16, 1);
        for (double& v : img.data) v = rng.uniform();
        save_png(img, (root / cname / (detail::zero_pad(i, 3) + ".png")).string());
      }
    }
  }
  ~CorpusFixture() { fs::remove_all(root); }
};

GlyphDataset synthetic_unsplit(int classes_of_20 = 3) {
  std::map<std::string, int> sizes;
  for (int c = 0; c < classes_of_20; ++c) sizes["class" + std::to_string(c)] = 20;
  CorpusFixture fixture("glyphnet_ds_tmp", sizes);
  return ingest(fixture.root.string()).dataset;
}

}  // namespace

TEST_CASE("ingest walks class directories in lexicographic order") {
  CorpusFixture fixture("glyphnet_ingest", {{"beta", 20}, {"alpha", 20}, {"gamma", 20}});
  const IngestResult result = ingest(fixture.root.string());
  REQUIRE(result.skipped == 0);
  REQUIRE(result.dataset.samples.size() == 60);
  REQUIRE(result.dataset.class_names ==
          std::vector<std::string>{"alpha", "beta", "gamma"});
  for (const auto& s : result.dataset.samples)
    REQUIRE(s.class_name == result.dataset.class_names[s.class_id]);
}

TEST_CASE("ingest skips corrupt files with a warning count") {
  CorpusFixture fixture("glyphnet_corrupt", {{"a", 20}, {"b", 20}, {"c", 20}});
  std::ofstream bad(fixture.root / "a" / "broken.png");
  bad << "not a png";
  bad.close();
  const IngestResult result = ingest(fixture.root.string());
  REQUIRE(result.skipped == 1);
  REQUIRE(result.dataset.samples.size() == 60);  // 59 from 'a' would mean a real loss
}

TEST_CASE("ingest rejects roots without class directories") {
  const fs::path empty = fs::temp_directory_path() / "glyphnet_empty_root";
  fs::remove_all(empty);
  fs::create_directories(empty);
  REQUIRE_THROWS_AS(ingest(empty.string()), DataError);
  fs::remove_all(empty);
}

TEST_CASE("prepare_low_shot drops small classes and caps large ones") {
  CorpusFixture fixture("glyphnet_lowshot", {{"small", 19}, {"exact", 20}, {"big", 35}});
  const GlyphDataset raw = ingest(fixture.root.string()).dataset;
  const GlyphDataset prepared = prepare_low_shot(raw, 20, 20, 5);

  REQUIRE(prepared.num_classes() == 2);
  REQUIRE(prepared.class_names == std::vector<std::string>{"big", "exact"});
  for (const auto& [cid, members] : prepared.by_class()) REQUIRE(members.size() == 20);

  // Same seed: identical retained id sets; class ids re-densified.
  const GlyphDataset again = prepare_low_shot(raw, 20, 20, 5);
  REQUIRE(again.sample_ids() == prepared.sample_ids());
  for (const auto& s : prepared.samples) REQUIRE(s.class_id < 2);

  REQUIRE_THROWS_AS(prepare_low_shot(raw, 100, 100, 5), DataError);
}

TEST_CASE("split_848 assigns 8/4/8 per class, disjoint and exhaustive") {
  const GlyphDataset prepared = synthetic_unsplit(3);
  const GlyphDataset split = split_848(prepared, 11);

  for (const auto& [cid, members] : split.by_class()) {
    int train = 0, val = 0, test = 0, unassigned = 0;
    for (int idx : members) {
      switch (split.samples[idx].split) {
        case Split::train: ++train; break;
        case Split::val: ++val; break;
        case Split::test: ++test; break;
        default: ++unassigned;
      }
    }
    REQUIRE(train == 8);
    REQUIRE(val == 4);
    REQUIRE(test == 8);
    REQUIRE(unassigned == 0);
  }

  // Determinism in the record-level assignment.
  const GlyphDataset same = split_848(prepared, 11);
  const GlyphDataset other = split_848(prepared, 12);
  bool any_differs = false;
  for (std::size_t i = 0; i < split.samples.size(); ++i) {
    REQUIRE(same.samples[i].split == split.samples[i].split);
    any_differs |= other.samples[i].split != split.samples[i].split;
  }
  REQUIRE(any_differs);

  GlyphDataset bad = prepared;
  bad.samples.pop_back();
  REQUIRE_THROWS_AS(split_848(bad, 11), std::invalid_argument);
}

TEST_CASE("split manifest round-trips the exact assignment") {
  const GlyphDataset split = split_848(synthetic_unsplit(2), 3);
  const fs::path path = fs::temp_directory_path() / "glyphnet_manifest.tsv";
  write_split_manifest(split, path.string());

  GlyphDataset blank = split;
  for (auto& s : blank.samples) s.split = Split::unassigned;
  apply_split_manifest(blank, path.string());
  for (std::size_t i = 0; i < split.samples.size(); ++i)
    REQUIRE(blank.samples[i].split == split.samples[i].split);
  fs::remove(path);
}

TEST_CASE("augment disabled is the bit-exact identity") {
  Rng rng(21);
  Image img(16, 16, 3);
  for (double& v : img.data) v = rng.uniform();
  AugmentationConfig cfg;
  cfg.enabled = false;
  Rng aug_rng(3);
  const Image out = augment(img, cfg, aug_rng);
  REQUIRE(out.data == img.data);
}

TEST_CASE("augment with all-zero magnitudes is the identity") {
  Rng rng(22);
  Image img(16, 16, 3);
  for (double& v : img.data) v = rng.uniform(0.1, 0.9);
  AugmentationConfig cfg;
  cfg.brightness = cfg.contrast = cfg.saturation = cfg.hue = 0.0;
  cfg.grayscale_probability = 0.0;
  cfg.rotation_degrees = 0.0;
  Rng aug_rng(4);
  const Image out = augment(img, cfg, aug_rng);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    REQUIRE(out.data[i] == Catch::Approx(img.data[i]).margin(1e-12));
}

TEST_CASE("augment with grayscale probability one equalizes channels") {
  Rng rng(23);
  Image img(12, 12, 3);
  for (double& v : img.data) v = rng.uniform();
  AugmentationConfig cfg;
  cfg.brightness = cfg.contrast = cfg.saturation = cfg.hue = 0.0;
  cfg.grayscale_probability = 1.0;
  cfg.rotation_degrees = 0.0;
  Rng aug_rng(5);
  const Image out = augment(img, cfg, aug_rng);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      REQUIRE(out.at(y, x, 0) == Catch::Approx(out.at(y, x, 1)).margin(1.0 / 255.0));
      REQUIRE(out.at(y, x, 1) == Catch::Approx(out.at(y, x, 2)).margin(1.0 / 255.0));
    }
}

TEST_CASE("augment preserves spatial dimensions") {
  Rng rng(24);
  Image img(20, 14, 1);
  for (double& v : img.data) v = rng.uniform();
  AugmentationConfig cfg;  // defaults, everything on
  for (int trial = 0; trial < 5; ++trial) {
    Rng aug_rng(trial);
    const Image out = augment(img, cfg, aug_rng);
    REQUIRE(out.h == img.h);
    REQUIRE(out.w == img.w);
    REQUIRE(out.c == img.c);
  }
}

TEST_CASE("synthetic generator: counts, determinism, and micro-perturbation bound") {
  const GlyphDataset ds = synth_resembling_glyphs(5, 2, 20, 77);
  REQUIRE(ds.num_classes() == 10);
  REQUIRE(ds.samples.size() == 200);

  const GlyphDataset again = synth_resembling_glyphs(5, 2, 20, 77);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    REQUIRE(again.samples[i].sample_id == ds.samples[i].sample_id);
    REQUIRE(again.samples[i].payload->data == ds.samples[i].payload->data);
  }

  const GlyphDataset different = synth_resembling_glyphs(5, 2, 20, 78);
  bool any = false;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    any |= different.samples[i].payload->data != ds.samples[i].payload->data;
  REQUIRE(any);

  REQUIRE_THROWS_AS(synth_resembling_glyphs(3, 1, 20, 1), std::invalid_argument);
}

TEST_CASE("synthetic corpus round-trips through the PNG layout and ingest") {
  const GlyphDataset ds = synth_resembling_glyphs(2, 2, 4, 13);
  const fs::path root = fs::temp_directory_path() / "glyphnet_synth_dump";
  fs::remove_all(root);
  dump_dataset_png(ds, root.string());
  const IngestResult loaded = ingest(root.string());
  REQUIRE(loaded.dataset.num_classes() == 4);
  REQUIRE(loaded.dataset.samples.size() == 16);
  REQUIRE(loaded.dataset.class_names == ds.class_names);
  fs::remove_all(root);
}

TEST_CASE("image provider pads arbitrary sizes to the encoder input") {
  CorpusFixture fixture("glyphnet_provider", {{"a", 20}});
  GlyphDataset ds = ingest(fixture.root.string()).dataset;
  ImageProvider provider(ds, InputSize{32, 32, 1});
  const Image& img = provider.get(0);
  REQUIRE(img.h == 32);
  REQUIRE(img.w == 32);
  REQUIRE(img.c == 1);
  // Second access hits the cache and must be the same object.
  REQUIRE(&provider.get(0) == &img);
}
