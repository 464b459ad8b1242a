#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/checkpoint.hpp"
#include "glyphnet/config.hpp"
#include "glyphnet/dataset.hpp"
#include "glyphnet/evaluation.hpp"
#include "glyphnet/losses.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/optimizer.hpp"
#include "glyphnet/pair_sampler.hpp"
#include "glyphnet/schedule.hpp"

namespace glyphnet {

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double scl = 0.0;    // stage-1 loss, mean per anchor
  double focal = 0.0;  // stage-2 components, mean per pair
  double lmcl = 0.0;
  double l_e = 0.0;
  double l_a = 0.0;
  double total = 0.0;
  double val_accuracy = -1.0;  // -1 when no validation ran this epoch
  double val_macro_f1 = -1.0;
};

struct TrainingLog {
  std::vector<EpochRecord> records;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("TrainingLog: cannot write " + path);
    out << "epoch,lr,scl,focal,lmcl,l_e,l_a,total,val_accuracy,val_macro_f1\n";
    for (const auto& r : records)
      out << r.epoch << ',' << r.lr << ',' << r.scl << ',' << r.focal << ',' << r.lmcl
          << ',' << r.l_e << ',' << r.l_a << ',' << r.total << ',' << r.val_accuracy
          << ',' << r.val_macro_f1 << '\n';
  }

  static TrainingLog read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("TrainingLog: cannot read " + path);
    TrainingLog log;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      EpochRecord r;
      char comma;
      ss >> r.epoch >> comma >> r.lr >> comma >> r.scl >> comma >> r.focal >> comma >>
          r.lmcl >> comma >> r.l_e >> comma >> r.l_a >> comma >> r.total >> comma >>
          r.val_accuracy >> comma >> r.val_macro_f1;
      log.records.push_back(r);
    }
    return log;
  }
};

struct TrainOutputs {
  Checkpoint checkpoint;  // best-validation (stage 2, baseline) or final (stage 1)
  TrainingLog log;
  int best_epoch = -1;
  double best_val_accuracy = -1.0;
};

// Observer invoked with each epoch's pair plan (stage 2); used for plan dumps.
using PlanObserver = std::function<void(const EpochPairPlan&)>;

// ---------------------------------------------------------------------------
// Ablation toggles
// ---------------------------------------------------------------------------

// Validated stage-2 loss mask: any component may be disabled, but at least
// one classification loss must remain (otherwise there is no decision layer).
inline LossMask ablation_toggles(const TrainConfig& cfg) {
  const LossMask& m = cfg.mask;
  require(m.focal || m.lmcl || m.euclidean || m.angular,
          "ablation: all four losses are disabled");
  require(m.focal || m.lmcl,
          "ablation: at least one classification loss (focal or lmcl) must be enabled");
  return m;
}

namespace detail {

inline void guard_finite(double value, const char* what, int epoch) {
  if (!std::isfinite(value))
    throw DivergenceError(std::string(what) + " became non-finite at epoch " +
                          std::to_string(epoch));
}

// Distinguishes diverged weights (non-finite parameters blowing up layer
// contracts) from genuine usage errors.
template <typename F>
void guarded_step(F&& body, const std::vector<Param*>& params, const char* what,
                  int epoch) {
  try {
    body();
  } catch (const std::invalid_argument&) {
    for (const Param* p : params)
      if (!p->value.allFinite())
        throw DivergenceError(std::string(what) + ": parameters became non-finite at epoch " +
                              std::to_string(epoch));
    throw;
  }
}

// Augmented (training) or plain (eval) image rows for the given samples. The
// augmentation stream is derived per (seed, epoch, slot) so batch composition
// and worker order cannot change the pixels a sample receives.
inline Matrix make_image_batch(ImageProvider& provider, const std::vector<int>& indices,
                               const AugmentationConfig& aug, bool train,
                               std::uint64_t seed, int epoch, std::uint64_t slot_base) {
  const InputSize in = provider.target();
  Matrix images(static_cast<Eigen::Index>(indices.size()), in.flat());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Image& base = provider.get(indices[i]);
    if (train && aug.enabled) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), slot_base + i, 0xA26ULL));
      image_to_row(augment(base, aug, rng), images.row(i));
    } else {
      image_to_row(base, images.row(i));
    }
  }
  return images;
}

inline nlohmann::json make_manifest(const std::string& stage, const TrainConfig& cfg,
                                    const GlyphDataset& dataset) {
  nlohmann::json m;
  m["stage"] = stage;
  m["encoder"] = cfg.encoder;
  m["input_channels"] = cfg.input_channels;
  m["z_dim"] = cfg.z_dim;
  m["num_classes"] = dataset.num_classes();
  m["cosine_scale"] = cfg.loss.s;
  m["seed"] = cfg.seed;
  m["config_hash"] = cfg.config_hash;
  m["loss_focal"] = cfg.mask.focal;
  m["loss_lmcl"] = cfg.mask.lmcl;
  m["loss_euclidean"] = cfg.mask.euclidean;
  m["loss_angular"] = cfg.mask.angular;
  m["class_names"] = dataset.class_names;
  return m;
}

// Realizes a requested Neg/Pos ratio by scaling p_n; otherwise returns the
// configured p_n. Always below the class count (sampler requirement).
inline int effective_p_n(const TrainConfig& cfg, const SplitView& view) {
  int num_positives = 0;
  for (const auto& [label, members] : group_by_label(view)) {
    const int n = static_cast<int>(members.size());
    num_positives += n * (n - 1) / 2;
  }
  int num_classes = static_cast<int>(group_by_label(view).size());
  int p_n = cfg.loss.p_n;
  if (cfg.neg_pos_ratio > 0.0 && view.size() > 0)
    p_n = static_cast<int>(
        std::lround(cfg.neg_pos_ratio * num_positives / static_cast<double>(view.size())));
  return std::max(0, std::min(p_n, num_classes - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1: supervised contrastive warm-up of encoder + projection
// ---------------------------------------------------------------------------

inline TrainOutputs run_stage1(const TrainConfig& cfg, const GlyphDataset& dataset) {
  cfg.validate();
  require(cfg.stage == 1, "run_stage1: config stage must be 1");
  ModelConfig mc{cfg.encoder, cfg.input_channels, cfg.z_dim,
                 std::max(1, dataset.num_classes()), cfg.loss.s};
  Stage1Model model(mc, cfg.seed);
  auto optimizer = make_optimizer(cfg.optimizer, cfg.momentum, cfg.weight_decay);
  ImageProvider provider(dataset, model.encoder().input_size());
  const LrSchedule schedule = cfg.schedule();

  std::vector<int> train_indices = dataset.indices_of(Split::train);
  require(train_indices.size() >= 2, "run_stage1: need at least 2 training samples");
  // The SCL multiplier tau/base_temperature (an exposed constant factor).
  const double scale = cfg.loss.tau / cfg.loss.base_temperature;

  TrainOutputs out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    std::vector<int> order = train_indices;
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0x51EULL));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int epoch_anchors = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (order.size() - end == 1) end = order.size();  // fold a trailing singleton
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      if (batch.size() < 2) break;
      const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

      Matrix images = detail::make_image_batch(provider, batch, cfg.aug, true, cfg.seed,
                                               epoch, start * 2 + 1);
      IntVector labels(n);
      for (Eigen::Index i = 0; i < n; ++i)
        labels[i] = dataset.samples[batch[i]].class_id;

      detail::guarded_step(
          [&] {
            EmbeddingBatch z = model.forward_stage1(images, labels, /*train=*/true);
            const double loss = scale * scl_loss(z.vectors, z.labels, cfg.loss.tau);
            detail::guard_finite(loss, "stage-1 loss", epoch);
            epoch_loss += loss;
            epoch_anchors += static_cast<int>(n);

            const Matrix grad = (scale / static_cast<double>(n)) *
                                scl_loss_grad(z.vectors, z.labels, cfg.loss.tau);
            model.zero_grads();
            model.backward(grad);
            optimizer->step(model.params(), lr);
          },
          model.params(), "stage 1", epoch);
      if (start + static_cast<std::size_t>(cfg.batch_size) >= order.size() &&
          end == order.size())
        break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.scl = epoch_anchors > 0 ? epoch_loss / epoch_anchors : 0.0;
    rec.total = rec.scl;
    out.log.records.push_back(rec);
  }

  out.checkpoint = snapshot_params(model.params(), detail::make_manifest("stage1", cfg, dataset));
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: joint classification + dual-space pairwise contrastive training
// ---------------------------------------------------------------------------

inline TrainOutputs run_stage2(const TrainConfig& cfg, const GlyphDataset& dataset,
                               const Checkpoint* init_checkpoint = nullptr,
                               const PlanObserver& on_plan = nullptr) {
  cfg.validate();
  require(cfg.stage == 2, "run_stage2: config stage must be 2");
  const LossMask mask = ablation_toggles(cfg);

  ModelConfig mc{cfg.encoder, cfg.input_channels, cfg.z_dim, dataset.num_classes(),
                 cfg.loss.s};
  CcfgModel model(mc, cfg.seed);

  if (cfg.init_mode == "ce_trained" || cfg.init_mode == "stage1_checkpoint") {
    if (init_checkpoint == nullptr)
      throw ConfigError("run_stage2: init_mode " + cfg.init_mode +
                        " requires an init checkpoint");
  }
  if (init_checkpoint != nullptr && cfg.init_mode != "scratch") {
    restore_params(model.params(), *init_checkpoint, {"encoder."});
    if (cfg.init_mode == "stage1_checkpoint") {
      // The stage-1 projection seeds both branch projections.
      restore_params(model.params(), *init_checkpoint, {"proj_e.", "proj_a."},
                     {{"proj_e.weight", "proj.weight"},
                      {"proj_e.bias", "proj.bias"},
                      {"proj_a.weight", "proj.weight"},
                      {"proj_a.bias", "proj.bias"}});
    }
  }

  auto optimizer = make_optimizer(cfg.optimizer, cfg.momentum, cfg.weight_decay);
  ImageProvider provider(dataset, model.encoder().input_size());
  const LrSchedule schedule = cfg.schedule();
  const SplitView train_view = dataset.split_view(Split::train);
  require(train_view.size() > 0, "run_stage2: empty training split");
  const int p_n = detail::effective_p_n(cfg, train_view);
  const double lambda = cfg.loss.lambda;

  TrainOutputs out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    const EpochPairPlan plan =
        build_epoch_plan(train_view, p_n, epoch, cfg.seed, cfg.batch_size);
    if (on_plan) on_plan(plan);

    double sum_focal = 0.0, sum_lmcl = 0.0, sum_e = 0.0, sum_a = 0.0, sum_total = 0.0;
    for (int b = 0; b < plan.num_batches(); ++b) {
      const auto [begin, end] = plan.batch_range(b);
      const Eigen::Index n = static_cast<Eigen::Index>(end - begin);
      std::vector<int> left(n), right(n);
      IntVector left_labels(n), right_labels(n), flags(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const PairRecord& p = plan.pairs[begin + j];
        left[j] = p.left_index;
        right[j] = p.right_index;
        left_labels[j] = dataset.samples[p.left_index].class_id;
        right_labels[j] = dataset.samples[p.right_index].class_id;
        flags[j] = p.flag;
      }

      // One Siamese pass: rows [0, n) are left members, [n, 2n) right members.
      std::vector<int> all = left;
      all.insert(all.end(), right.begin(), right.end());
      Matrix images = detail::make_image_batch(provider, all, cfg.aug, true, cfg.seed,
                                               epoch, (begin * 4 + 2) << 1);
      detail::guarded_step([&] {
      DualHeadOutput fwd = model.forward(images, /*train=*/true);

      const Matrix t_l = fwd.t.topRows(n), t_r = fwd.t.bottomRows(n);
      const Matrix cos_l = fwd.r_prime.cosines.topRows(n),
                   cos_r = fwd.r_prime.cosines.bottomRows(n);
      const Matrix ze_l = fwd.z_e.topRows(n), ze_r = fwd.z_e.bottomRows(n);

      // Probabilities are clamped before the focal log (the loss itself
      // rejects exact zeros).
      const Matrix tcl_l = t_l.cwiseMax(1e-12), tcl_r = t_r.cwiseMax(1e-12);

      double l_focal = 0.0, l_lmcl = 0.0, l_e = 0.0, l_a = 0.0;
      if (mask.focal)
        l_focal = focal_pair_loss(tcl_l, tcl_r, left_labels, right_labels, cfg.loss.gamma);
      if (mask.lmcl)
        l_lmcl = lmcl_loss(cos_l, cos_r, left_labels, right_labels, cfg.loss.s, cfg.loss.m_c);
      if (mask.euclidean) l_e = euclidean_pair_loss(ze_l, ze_r, flags, cfg.loss.m_e);
      if (mask.angular) l_a = angular_pair_loss(cos_l, cos_r, flags, cfg.loss.m_a);
      const double batch_total = total_loss(l_focal, l_lmcl, l_e, l_a, lambda);
      detail::guard_finite(batch_total, "stage-2 loss", epoch);
      sum_focal += l_focal;
      sum_lmcl += l_lmcl;
      sum_e += l_e;
      sum_a += l_a;
      sum_total += batch_total;

      const double inv_n = 1.0 / static_cast<double>(n);
      Matrix d_t = Matrix::Zero(2 * n, model.config().num_classes);
      Matrix d_cos = Matrix::Zero(2 * n, model.config().num_classes);
      Matrix d_ze = Matrix::Zero(2 * n, cfg.z_dim);
      if (mask.focal) {
        auto [gl, gr] =
            focal_pair_loss_grad(tcl_l, tcl_r, left_labels, right_labels, cfg.loss.gamma);
        d_t.topRows(n) = inv_n * gl;
        d_t.bottomRows(n) = inv_n * gr;
      }
      if (mask.lmcl) {
        auto [gl, gr] =
            lmcl_loss_grad(cos_l, cos_r, left_labels, right_labels, cfg.loss.s, cfg.loss.m_c);
        d_cos.topRows(n) += inv_n * gl;
        d_cos.bottomRows(n) += inv_n * gr;
      }
      if (mask.angular) {
        auto [gl, gr] = angular_pair_loss_grad(cos_l, cos_r, flags, cfg.loss.m_a);
        d_cos.topRows(n) += (lambda * inv_n) * gl;
        d_cos.bottomRows(n) += (lambda * inv_n) * gr;
      }
      if (mask.euclidean) {
        auto [gl, gr] = euclidean_pair_loss_grad(ze_l, ze_r, flags, cfg.loss.m_e);
        d_ze.topRows(n) = (lambda * inv_n) * gl;
        d_ze.bottomRows(n) = (lambda * inv_n) * gr;
      }

      model.zero_grads();
      model.backward(d_t, d_cos, d_ze);
      optimizer->step(model.params(), lr);
      }, model.params(), "stage 2", epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    const double num_pairs = static_cast<double>(plan.pairs.size());
    rec.focal = sum_focal / num_pairs;
    rec.lmcl = sum_lmcl / num_pairs;
    rec.l_e = sum_e / num_pairs;
    rec.l_a = sum_a / num_pairs;
    rec.total = sum_total / num_pairs;

    const MetricsReport val = evaluate_split(
        [&](const Matrix& imgs) {
          return model.predict_with_heads(imgs, mask.focal, mask.lmcl).second;
        },
        provider, Split::val);
    rec.val_accuracy = val.accuracy;
    rec.val_macro_f1 = val.macro_f1;
    out.log.records.push_back(rec);

    if (val.accuracy > out.best_val_accuracy) {
      out.best_val_accuracy = val.accuracy;
      out.best_epoch = epoch;
      out.checkpoint =
          snapshot_params(model.params(), detail::make_manifest("stage2", cfg, dataset));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-entropy baseline: the same encoder with a single softmax head,
// trained on plain image batches for the comparison experiments.
// ---------------------------------------------------------------------------

inline TrainOutputs run_baseline_ce(const TrainConfig& cfg, const GlyphDataset& dataset) {
  cfg.validate();
  ModelConfig mc{cfg.encoder, cfg.input_channels, cfg.z_dim, dataset.num_classes(),
                 cfg.loss.s};
  CeBaselineModel model(mc, cfg.seed);
  auto optimizer = make_optimizer(cfg.optimizer, cfg.momentum, cfg.weight_decay);
  ImageProvider provider(dataset, InputSize{32, 32, cfg.input_channels});
  const LrSchedule schedule = cfg.schedule();
  const std::vector<int> train_indices = dataset.indices_of(Split::train);
  require(!train_indices.empty(), "run_baseline_ce: empty training split");

  TrainOutputs out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    std::vector<int> order = train_indices;
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0xCE17ULL));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
      Matrix images = detail::make_image_batch(provider, batch, cfg.aug, true, cfg.seed,
                                               epoch, start * 2 + 3);
      detail::guarded_step(
          [&] {
            const Matrix t = model.forward_probs(images, /*train=*/true).cwiseMax(1e-12);
            double loss = 0.0;
            Matrix d_t = Matrix::Zero(n, dataset.num_classes());
            for (Eigen::Index i = 0; i < n; ++i) {
              const int y = dataset.samples[batch[i]].class_id;
              loss -= std::log(t(i, y));
              d_t(i, y) = -1.0 / (t(i, y) * static_cast<double>(n));
            }
            detail::guard_finite(loss, "baseline loss", epoch);
            epoch_loss += loss;
            model.zero_grads();
            model.backward(d_t);
            optimizer->step(model.params(), lr);
          },
          model.params(), "baseline", epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.focal = epoch_loss / static_cast<double>(order.size());
    rec.total = rec.focal;
    const MetricsReport val = evaluate_split(
        [&](const Matrix& imgs) { return model.predict(imgs).second; }, provider,
        Split::val);
    rec.val_accuracy = val.accuracy;
    rec.val_macro_f1 = val.macro_f1;
    out.log.records.push_back(rec);
    if (val.accuracy > out.best_val_accuracy) {
      out.best_val_accuracy = val.accuracy;
      out.best_epoch = epoch;
      out.checkpoint = snapshot_params(model.params(),
                                       detail::make_manifest("ce_baseline", cfg, dataset));
    }
  }
  return out;
}

}  // namespace glyphnet
