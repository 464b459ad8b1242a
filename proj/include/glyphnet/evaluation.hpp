#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "glyphnet/checkpoint.hpp"
#include "glyphnet/dataset.hpp"
#include "glyphnet/errors.hpp"
#include "glyphnet/model.hpp"

namespace glyphnet {

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  Vector per_class_accuracy;                       // length C
  std::map<std::pair<int, int>, int> confusion_counts;  // (true, pred) -> count
  int num_samples = 0;
  int num_classes = 0;
  // Per-sample predictions, aligned: enables the misclassification report.
  std::vector<std::string> sample_ids;
  std::vector<int> true_labels;
  std::vector<int> predicted_labels;

  int confusion(int true_class, int pred_class) const {
    const auto it = confusion_counts.find({true_class, pred_class});
    return it == confusion_counts.end() ? 0 : it->second;
  }

  int row_sum(int true_class) const {
    int sum = 0;
    for (const auto& [key, count] : confusion_counts)
      if (key.first == true_class) sum += count;
    return sum;
  }
};

struct AccuracyHistogram {
  std::array<int, 11> bin_edges{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};  // percent
  std::array<int, 10> bin_counts{};
};

// ---------------------------------------------------------------------------
// Metric computation
// ---------------------------------------------------------------------------

inline MetricsReport compute_metrics(const std::vector<int>& true_labels,
                                     const std::vector<int>& predicted_labels,
                                     int num_classes,
                                     std::vector<std::string> sample_ids = {}) {
  require(true_labels.size() == predicted_labels.size(), "compute_metrics: size mismatch");
  require(!true_labels.empty(), "compute_metrics: empty evaluation");
  MetricsReport rep;
  rep.num_classes = num_classes;
  rep.num_samples = static_cast<int>(true_labels.size());
  rep.sample_ids = std::move(sample_ids);
  rep.true_labels = true_labels;
  rep.predicted_labels = predicted_labels;

  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    require(true_labels[i] >= 0 && true_labels[i] < num_classes &&
                predicted_labels[i] >= 0 && predicted_labels[i] < num_classes,
            "compute_metrics: label out of range");
    ++rep.confusion_counts[{true_labels[i], predicted_labels[i]}];
  }

  int trace = 0;
  double f1_sum = 0.0;
  rep.per_class_accuracy = Vector::Zero(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const int tp = rep.confusion(c, c);
    trace += tp;
    int fn = 0, fp = 0;
    for (const auto& [key, count] : rep.confusion_counts) {
      if (key.first == c && key.second != c) fn += count;
      if (key.second == c && key.first != c) fp += count;
    }
    const int support = tp + fn;
    rep.per_class_accuracy[c] = support > 0 ? static_cast<double>(tp) / support : 0.0;
    const int denom = 2 * tp + fp + fn;
    f1_sum += denom > 0 ? 2.0 * tp / denom : 0.0;  // zero-support classes count as 0
  }
  rep.accuracy = static_cast<double>(trace) / rep.num_samples;
  rep.macro_f1 = f1_sum / num_classes;
  return rep;
}

// Decile bins over per-class accuracy. Integer arithmetic keeps the boundary
// rule exact: accuracy on a bin edge lands in the upper bin, 100% in the top.
inline AccuracyHistogram per_class_histogram(const MetricsReport& report) {
  AccuracyHistogram hist;
  for (int c = 0; c < report.num_classes; ++c) {
    const int correct = report.confusion(c, c);
    const int total = report.row_sum(c);
    const int bin = total > 0 ? std::min(9, 10 * correct / total) : 0;
    ++hist.bin_counts[bin];
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Misclassification report (most confused class pairs)
// ---------------------------------------------------------------------------

struct ConfusedPair {
  int true_class = 0;
  int predicted_class = 0;
  int count = 0;
};

struct MisclassifiedSample {
  std::string sample_id;
  int predicted_class = 0;
  int true_class = 0;
};

struct MisclassificationReport {
  std::vector<ConfusedPair> top_pairs;           // ranked by count desc
  std::vector<MisclassifiedSample> samples;      // members of the top pairs
};

// Class pairs ranked by off-diagonal confusion count, ties broken by
// (true_class, predicted_class) index order; emits the offending sample ids.
inline MisclassificationReport misclassification_report(const MetricsReport& report,
                                                        int k) {
  require(k >= 1, "misclassification_report: k must be >= 1");
  std::vector<ConfusedPair> pairs;
  for (const auto& [key, count] : report.confusion_counts)
    if (key.first != key.second && count > 0)
      pairs.push_back({key.first, key.second, count});
  std::sort(pairs.begin(), pairs.end(), [](const ConfusedPair& a, const ConfusedPair& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.true_class != b.true_class) return a.true_class < b.true_class;
    return a.predicted_class < b.predicted_class;
  });
  MisclassificationReport out;
  if (static_cast<int>(pairs.size()) > k) pairs.resize(k);
  out.top_pairs = pairs;
  for (const ConfusedPair& p : out.top_pairs)
    for (std::size_t i = 0; i < report.true_labels.size(); ++i)
      if (report.true_labels[i] == p.true_class &&
          report.predicted_labels[i] == p.predicted_class)
        out.samples.push_back({i < report.sample_ids.size() ? report.sample_ids[i] : "",
                               p.predicted_class, p.true_class});
  return out;
}

// ---------------------------------------------------------------------------
// Running a model over a split
// ---------------------------------------------------------------------------

using PredictFn = std::function<std::vector<int>(const Matrix&)>;

// Evaluates `predict` over the given split (no augmentation) in fixed order.
inline MetricsReport evaluate_split(const PredictFn& predict, ImageProvider& provider,
                                    Split split, int eval_batch = 64) {
  const GlyphDataset& ds = provider.dataset();
  const std::vector<int> indices = ds.indices_of(split);
  require(!indices.empty(), "evaluate_split: split is empty");
  const InputSize in = provider.target();

  std::vector<int> y_true, y_pred;
  std::vector<std::string> ids;
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(eval_batch)) {
    const std::size_t end = std::min(indices.size(), start + eval_batch);
    Matrix images(end - start, in.flat());
    for (std::size_t i = start; i < end; ++i)
      image_to_row(provider.get(indices[i]), images.row(i - start));
    const std::vector<int> pred = predict(images);
    for (std::size_t i = start; i < end; ++i) {
      y_true.push_back(ds.samples[indices[i]].class_id);
      y_pred.push_back(pred[i - start]);
      ids.push_back(ds.samples[indices[i]].sample_id);
    }
  }
  return compute_metrics(y_true, y_pred, ds.num_classes(), std::move(ids));
}

// Rebuilds the model a checkpoint describes and evaluates it on a split.
// Stage-2 checkpoints average the heads whose classification loss was
// trained; baseline checkpoints use their single softmax head.
inline MetricsReport evaluate(const Checkpoint& ckpt, const GlyphDataset& dataset,
                              Split split) {
  require(split == Split::val || split == Split::test,
          "evaluate: split must be val or test");
  const auto& man = ckpt.manifest;
  ModelConfig mc;
  mc.encoder = man.at("encoder").get<std::string>();
  mc.input_channels = man.at("input_channels").get<int>();
  mc.z_dim = man.at("z_dim").get<int>();
  mc.num_classes = man.at("num_classes").get<int>();
  mc.cosine_scale = man.value("cosine_scale", 30.0);
  require(mc.num_classes == dataset.num_classes(),
          "evaluate: checkpoint has " + std::to_string(mc.num_classes) +
              " classes but dataset has " + std::to_string(dataset.num_classes()));

  const std::string stage = man.at("stage").get<std::string>();
  if (stage == "stage2") {
    CcfgModel model(mc, /*init_seed=*/0);
    restore_params(model.params(), ckpt);
    const bool use_t = man.value("loss_focal", true);
    const bool use_b = man.value("loss_lmcl", true);
    ImageProvider provider(dataset, model.encoder().input_size());
    return evaluate_split(
        [&](const Matrix& images) {
          return model.predict_with_heads(images, use_t, use_b).second;
        },
        provider, split);
  }
  if (stage == "ce_baseline") {
    CeBaselineModel model(mc, /*init_seed=*/0);
    restore_params(model.params(), ckpt);
    ImageProvider provider(dataset, InputSize{32, 32, mc.input_channels});
    return evaluate_split(
        [&](const Matrix& images) { return model.predict(images).second; }, provider,
        split);
  }
  throw DataError("evaluate: checkpoint stage '" + stage + "' has no classifier");
}

inline MetricsReport evaluate(const std::string& checkpoint_path,
                              const GlyphDataset& dataset, Split split) {
  return evaluate(Checkpoint::load(checkpoint_path), dataset, split);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline void write_metrics_report(const MetricsReport& report,
                                 const std::vector<std::string>& class_names,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_metrics_report: cannot write " + path);
  out << "accuracy = " << report.accuracy << "\n";
  out << "macro_f1 = " << report.macro_f1 << "\n";
  out << "num_samples = " << report.num_samples << "\n";
  out << "num_classes = " << report.num_classes << "\n";
  out << "\nclass_id\tclass_name\tsupport\tcorrect\taccuracy\n";
  for (int c = 0; c < report.num_classes; ++c) {
    const int support = report.row_sum(c);
    out << c << '\t' << (c < static_cast<int>(class_names.size()) ? class_names[c] : "?")
        << '\t' << support << '\t' << report.confusion(c, c) << '\t'
        << report.per_class_accuracy[c] << '\n';
  }
}

inline void write_per_class_csv(const MetricsReport& report,
                                const std::vector<std::string>& class_names,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_per_class_csv: cannot write " + path);
  out << "class_id,class_name,accuracy\n";
  for (int c = 0; c < report.num_classes; ++c)
    out << c << ',' << (c < static_cast<int>(class_names.size()) ? class_names[c] : "?")
        << ',' << report.per_class_accuracy[c] << '\n';
}

inline void write_histogram_csv(const AccuracyHistogram& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_histogram_csv: cannot write " + path);
  out << "bin_edge,count\n";
  for (int b = 0; b < 10; ++b)
    out << hist.bin_edges[b] << ',' << hist.bin_counts[b] << '\n';
}

}  // namespace glyphnet
