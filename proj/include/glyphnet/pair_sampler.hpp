#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "glyphnet/errors.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

// One training pair by dataset sample index; flag 1 iff same class.
struct PairRecord {
  int left_index = 0;
  int right_index = 0;
  int flag = 0;
};

// Training-split view the sampler operates on.
struct SplitView {
  std::vector<int> sample_indices;  // dataset indices
  std::vector<int> labels;          // class ids, aligned with sample_indices

  void validate() const {
    require(sample_indices.size() == labels.size(), "SplitView: size mismatch");
  }
  int size() const { return static_cast<int>(sample_indices.size()); }
};

// Full pair schedule for one epoch: every intra-class positive pair plus
// freshly drawn negatives, globally shuffled, served in batches.
struct EpochPairPlan {
  std::vector<PairRecord> pairs;
  int epoch = 0;
  std::uint64_t seed = 0;
  int batch_size = 1;

  int num_batches() const {
    if (pairs.empty()) return 0;
    return static_cast<int>((pairs.size() + batch_size - 1) / batch_size);
  }

  // Half-open [begin, end) range of batch b; the final batch may be partial.
  std::pair<std::size_t, std::size_t> batch_range(int b) const {
    const std::size_t begin = static_cast<std::size_t>(b) * batch_size;
    return {begin, std::min(pairs.size(), begin + batch_size)};
  }
};

namespace detail {

inline std::map<int, std::vector<int>> group_by_label(const SplitView& split) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < split.size(); ++i)
    groups[split.labels[i]].push_back(split.sample_indices[i]);
  return groups;
}

}  // namespace detail

// All unordered intra-class pairs, n(n-1)/2 per class. Classes with a single
// sample produce none and are reported on stderr.
inline std::vector<PairRecord> enumerate_positive_pairs(const SplitView& split) {
  split.validate();
  require(split.size() > 0, "enumerate_positive_pairs: empty split");
  std::vector<PairRecord> out;
  for (const auto& [label, members] : detail::group_by_label(split)) {
    if (members.size() < 2) {
      std::cerr << "warning: class " << label
                << " has fewer than 2 training samples; no positive pairs\n";
      continue;
    }
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        out.push_back({members[a], members[b], 1});
  }
  return out;
}

// For every anchor image: p_n partners, one uniformly random image from each
// of p_n distinct non-anchor classes.
inline std::vector<PairRecord> sample_negative_pairs(const SplitView& split, int p_n,
                                                     std::uint64_t rng_seed) {
  split.validate();
  require(split.size() > 0, "sample_negative_pairs: empty split");
  require(p_n >= 0, "sample_negative_pairs: p_n must be nonnegative");
  std::vector<PairRecord> out;
  if (p_n == 0) return out;

  const auto groups = detail::group_by_label(split);
  std::vector<int> class_ids;
  class_ids.reserve(groups.size());
  for (const auto& [label, _] : groups) class_ids.push_back(label);
  require(p_n < static_cast<int>(class_ids.size()),
          "sample_negative_pairs: p_n must be smaller than the number of classes");

  Rng rng(mix_seed(rng_seed, 0x9E67ULL));
  std::vector<int> candidates;
  for (int i = 0; i < split.size(); ++i) {
    const int anchor = split.sample_indices[i];
    const int anchor_label = split.labels[i];
    candidates.clear();
    for (int cid : class_ids)
      if (cid != anchor_label) candidates.push_back(cid);
    // Partial Fisher-Yates: first p_n entries are distinct uniform classes.
    for (int k = 0; k < p_n; ++k) {
      const int j = rng.uniform_int(k, static_cast<int>(candidates.size()) - 1);
      std::swap(candidates[k], candidates[j]);
      const auto& members = groups.at(candidates[k]);
      const int pick = rng.uniform_int(0, static_cast<int>(members.size()) - 1);
      out.push_back({anchor, members[pick], 0});
    }
  }
  return out;
}

// Positives (shared by every epoch) plus epoch-fresh negatives, orientation of
// positives randomized, globally shuffled with (seed, epoch) randomness.
inline EpochPairPlan build_epoch_plan(const SplitView& split, int p_n, int epoch,
                                      std::uint64_t seed, int batch_size) {
  require(batch_size >= 1, "build_epoch_plan: batch_size must be >= 1");
  EpochPairPlan plan;
  plan.epoch = epoch;
  plan.seed = seed;
  plan.batch_size = batch_size;
  plan.pairs = enumerate_positive_pairs(split);
  const std::vector<PairRecord> negatives =
      sample_negative_pairs(split, p_n, mix_seed(seed, static_cast<std::uint64_t>(epoch), 0x4E6ULL));
  plan.pairs.insert(plan.pairs.end(), negatives.begin(), negatives.end());

  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 0x5F17ULL));
  for (PairRecord& p : plan.pairs)
    if (p.flag == 1 && rng.uniform() < 0.5) std::swap(p.left_index, p.right_index);
  rng.shuffle(plan.pairs);
  return plan;
}

// Debug dump, one line per pair: left_id<TAB>right_id<TAB>flag.
inline void write_plan(const EpochPairPlan& plan, const std::vector<std::string>& sample_ids,
                       std::ostream& out) {
  for (const PairRecord& p : plan.pairs)
    out << sample_ids.at(p.left_index) << '\t' << sample_ids.at(p.right_index) << '\t'
        << p.flag << '\n';
}

inline void write_plan_file(const EpochPairPlan& plan,
                            const std::vector<std::string>& sample_ids,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_plan_file: cannot write " + path);
  write_plan(plan, sample_ids, out);
}

}  // namespace glyphnet
