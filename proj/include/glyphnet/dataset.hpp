#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "glyphnet/encoder.hpp"
#include "glyphnet/errors.hpp"
#include "glyphnet/image.hpp"
#include "glyphnet/image_io.hpp"
#include "glyphnet/pair_sampler.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

enum class Split { train, val, test, unassigned };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    default: return "unassigned";
  }
}

inline Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  if (name == "unassigned") return Split::unassigned;
  throw DataError("unknown split name '" + name + "'");
}

struct SampleRecord {
  std::string sample_id;          // unique, stable across runs
  int class_id = -1;
  std::string class_name;
  std::string image_path;         // empty for synthetic samples
  std::optional<Image> payload;   // in-memory pixels for synthetic samples
  Split split = Split::unassigned;
};

struct GlyphDataset {
  std::vector<SampleRecord> samples;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }

  std::vector<int> indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
      if (samples[i].split == s) out.push_back(i);
    return out;
  }

  SplitView split_view(Split s) const {
    SplitView view;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
      if (samples[i].split == s) {
        view.sample_indices.push_back(i);
        view.labels.push_back(samples[i].class_id);
      }
    return view;
  }

  std::vector<std::string> sample_ids() const {
    std::vector<std::string> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.sample_id);
    return ids;
  }

  std::map<int, std::vector<int>> by_class() const {
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
      groups[samples[i].class_id].push_back(i);
    return groups;
  }

  void validate() const {
    std::map<std::string, int> seen;
    for (const auto& s : samples) {
      require(seen.emplace(s.sample_id, 1).second,
              "GlyphDataset: duplicate sample_id '" + s.sample_id + "'");
      require(s.class_id >= 0 && s.class_id < num_classes(),
              "GlyphDataset: class_id out of range for '" + s.sample_id + "'");
    }
  }
};

// ---------------------------------------------------------------------------
// Ingestion: <root>/<class_name>/<image files>
// ---------------------------------------------------------------------------

struct IngestResult {
  GlyphDataset dataset;
  int skipped = 0;  // unreadable or corrupt files
};

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// Class ids follow lexicographic directory order; files are probed so corrupt
// images are skipped (with a warning) rather than failing the run.
inline IngestResult ingest(const std::string& root_directory) {
  namespace fs = std::filesystem;
  const fs::path root(root_directory);
  if (!fs::is_directory(root)) throw DataError("ingest: not a directory: " + root_directory);

  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw DataError("ingest: no class directories under " + root_directory);

  IngestResult result;
  for (int cid = 0; cid < static_cast<int>(class_dirs.size()); ++cid) {
    const std::string& cname = class_dirs[cid];
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / cname))
      if (entry.is_regular_file() && has_image_extension(entry.path()))
        files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const std::string& file : files) {
      const std::string path = (root / cname / file).string();
      try {
        (void)load_image(path);  // readability probe only
      } catch (const DataError&) {
        std::cerr << "warning: skipping unreadable image " << path << "\n";
        ++result.skipped;
        continue;
      }
      SampleRecord rec;
      rec.sample_id = cname + "/" + file;
      rec.class_id = cid;
      rec.class_name = cname;
      rec.image_path = path;
      result.dataset.samples.push_back(std::move(rec));
    }
    result.dataset.class_names.push_back(cname);
  }
  if (result.dataset.samples.empty())
    throw DataError("ingest: no readable images under " + root_directory);
  result.dataset.validate();
  return result;
}

// ---------------------------------------------------------------------------
// Low-shot preparation and the 8:4:8 split
// ---------------------------------------------------------------------------

// Removes classes below min_samples, caps the rest to `cap` by seeded uniform
// sampling, and re-densifies class ids.
inline GlyphDataset prepare_low_shot(const GlyphDataset& dataset, int min_samples,
                                     int cap, std::uint64_t seed) {
  require(min_samples >= 1 && cap >= 1, "prepare_low_shot: thresholds must be positive");
  GlyphDataset out;
  const auto groups = dataset.by_class();
  for (const auto& [cid, members] : groups) {
    if (static_cast<int>(members.size()) < min_samples) continue;
    std::vector<int> keep = members;
    if (static_cast<int>(keep.size()) > cap) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cid), 0xCA9ULL));
      rng.shuffle(keep);
      keep.resize(cap);
      std::sort(keep.begin(), keep.end());
    }
    const int new_cid = out.num_classes();
    out.class_names.push_back(dataset.class_names.at(cid));
    for (int idx : keep) {
      SampleRecord rec = dataset.samples[idx];
      rec.class_id = new_cid;
      rec.split = Split::unassigned;
      out.samples.push_back(std::move(rec));
    }
  }
  if (out.num_classes() == 0)
    throw DataError("prepare_low_shot: no class has at least " +
                    std::to_string(min_samples) + " samples");
  out.validate();
  return out;
}

// Seeded per-class permutation assigning 8/4/8 of exactly 20 samples to
// train/val/test.
inline GlyphDataset split_848(const GlyphDataset& dataset, std::uint64_t seed) {
  GlyphDataset out = dataset;
  for (const auto& [cid, members] : out.by_class()) {
    require(members.size() == 20,
            "split_848: class " + out.class_names.at(cid) + " has " +
                std::to_string(members.size()) + " samples, expected 20");
    std::vector<int> order = members;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cid), 0x848ULL));
    rng.shuffle(order);
    for (int k = 0; k < 20; ++k) {
      Split s = k < 8 ? Split::train : (k < 12 ? Split::val : Split::test);
      out.samples[order[k]].split = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split manifest: sample_id<TAB>class_id<TAB>split, one line per sample
// ---------------------------------------------------------------------------

inline void write_split_manifest(const GlyphDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_split_manifest: cannot write " + path);
  for (const auto& s : dataset.samples)
    out << s.sample_id << '\t' << s.class_id << '\t' << split_name(s.split) << '\n';
}

// Applies a previously written manifest; every line must match a known sample.
inline void apply_split_manifest(GlyphDataset& dataset, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("apply_split_manifest: cannot read " + path);
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(dataset.samples.size()); ++i)
    index[dataset.samples[i].sample_id] = i;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, split_str;
    int cid = -1;
    if (!std::getline(ss, id, '\t') || !(ss >> cid >> std::ws) ||
        !std::getline(ss, split_str))
      throw DataError("apply_split_manifest: malformed line " + std::to_string(line_no));
    auto it = index.find(id);
    if (it == index.end())
      throw DataError("apply_split_manifest: unknown sample_id '" + id + "'");
    require(dataset.samples[it->second].class_id == cid,
            "apply_split_manifest: class mismatch for '" + id + "'");
    dataset.samples[it->second].split = split_from_name(split_str);
  }
}

// ---------------------------------------------------------------------------
// Image provider: resolves records to encoder-ready pixel rows
// ---------------------------------------------------------------------------

class ImageProvider {
 public:
  ImageProvider(const GlyphDataset& dataset, InputSize target)
      : dataset_(dataset), target_(target), cache_(dataset.samples.size()) {}

  // Decoded (or synthetic), channel-converted, aspect-preserving resize+pad.
  const Image& get(int sample_index) {
    auto& slot = cache_.at(sample_index);
    if (!slot) {
      const SampleRecord& rec = dataset_.samples.at(sample_index);
      Image img = rec.payload ? *rec.payload : load_image(rec.image_path);
      img = to_channels(img, target_.channels);
      if (img.h != target_.height || img.w != target_.width)
        img = resize_pad(img, target_.height, target_.width);
      slot = std::move(img);
    }
    return *slot;
  }

  InputSize target() const { return target_; }
  const GlyphDataset& dataset() const { return dataset_; }

 private:
  const GlyphDataset& dataset_;
  InputSize target_;
  std::vector<std::optional<Image>> cache_;
};

inline void image_to_row(const Image& img,
                         Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  require(row.size() == static_cast<Eigen::Index>(img.data.size()),
          "image_to_row: size mismatch");
  for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = img.data[i];
}

}  // namespace glyphnet
