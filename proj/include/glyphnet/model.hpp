#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "glyphnet/encoder.hpp"
#include "glyphnet/losses.hpp"
#include "glyphnet/nn.hpp"

namespace glyphnet {

struct ModelConfig {
  std::string encoder = "tiny_cnn";
  int input_channels = 1;
  int z_dim = 64;
  int num_classes = 0;
  double cosine_scale = 30.0;  // s applied to cosines before the softmax head

  void validate() const {
    require(z_dim > 0, "ModelConfig: z_dim must be positive");
    require(num_classes > 0, "ModelConfig: num_classes must be positive");
    require(cosine_scale > 0.0, "ModelConfig: cosine_scale must be positive");
  }
};

// Per-image forward products of the two branches.
struct DualHeadOutput {
  Matrix z_e;            // B x z_dim, unit rows (Euclidean branch projection)
  Matrix z_a_raw;        // B x z_dim, raw angular branch projection
  Matrix r;              // B x C standard logits
  CosineLogits r_prime;  // B x C cosines
  Matrix t;              // softmax(r)
  Matrix b;              // softmax(s * cosines), margin-free
};

// Shared encoder with two parallel branches: projection + softmax head in
// Euclidean space, projection + cosine head in angular space. At inference
// the two head distributions are averaged.
class CcfgModel {
 public:
  CcfgModel(const ModelConfig& cfg, std::uint64_t init_seed)
      : cfg_(cfg), rng_(mix_seed(init_seed, 0xCC)) {
    cfg_.validate();
    encoder_ = make_encoder(cfg_.encoder, cfg_.input_channels, rng_);
    const int d = encoder_->output_dim();
    proj_e_ = std::make_unique<Dense>("proj_e", d, cfg_.z_dim, rng_);
    head_e_ = std::make_unique<Dense>("head_e", cfg_.z_dim, cfg_.num_classes, rng_);
    proj_a_ = std::make_unique<Dense>("proj_a", d, cfg_.z_dim, rng_);
    head_a_ = std::make_unique<CosineHead>("head_a", cfg_.z_dim, cfg_.num_classes, rng_);
  }

  DualHeadOutput forward(const Matrix& images, bool train) {
    require(images.rows() >= 1, "forward: batch is empty");
    const Matrix h = encoder_->forward(images, train);
    const Matrix pe = tanh_forward(proj_e_->forward(h, train));
    const Matrix pa = tanh_forward(proj_a_->forward(h, train));
    if (train) {
      cached_pe_ = pe;
      cached_pa_ = pa;
    }
    DualHeadOutput out;
    out.z_e = l2_normalize_rows(pe, "forward: Euclidean projection");
    out.z_a_raw = pa;
    out.r = head_e_->forward(pe, train);
    out.r_prime.cosines = head_a_->forward(pa, train);
    out.t = softmax_rows(out.r);
    out.b = softmax_rows(cfg_.cosine_scale * out.r_prime.cosines);
    if (train) cached_t_ = out.t;
    return out;
  }

  // Backpropagates gradients expressed on t (softmax probabilities), on the
  // cosine logits r', and on the normalized Euclidean projection z_e.
  // Must follow a forward(..., train=true) on the same batch.
  void backward(const Matrix& d_t, const Matrix& d_rprime, const Matrix& d_ze) {
    const Matrix d_r = softmax_backward(cached_t_, d_t);
    Matrix d_pe = head_e_->backward(d_r);
    d_pe += l2_normalize_backward(cached_pe_, d_ze);
    const Matrix d_pa = head_a_->backward(d_rprime);
    const Matrix dh = proj_e_->backward(tanh_backward(cached_pe_, d_pe)) +
                      proj_a_->backward(tanh_backward(cached_pa_, d_pa));
    encoder_->backward(dh);
  }

  // Averaged-head inference: probabilities (t + b) / 2 and the argmax class,
  // lowest index winning ties.
  std::pair<Matrix, std::vector<int>> predict(const Matrix& images) {
    require(images.rows() >= 1, "predict: batch is empty");
    const DualHeadOutput out = forward(images, /*train=*/false);
    Matrix avg = 0.5 * (out.t + out.b);
    return {avg, argmax_rows(avg)};
  }

  // Head-restricted inference used by loss-ablation evaluation: average over
  // the heads whose classification loss was trained.
  std::pair<Matrix, std::vector<int>> predict_with_heads(const Matrix& images,
                                                         bool use_t, bool use_b) {
    require(use_t || use_b, "predict_with_heads: at least one head required");
    const DualHeadOutput out = forward(images, /*train=*/false);
    Matrix probs;
    if (use_t && use_b)
      probs = 0.5 * (out.t + out.b);
    else
      probs = use_t ? out.t : out.b;
    return {probs, argmax_rows(probs)};
  }

  static std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> cls(probs.rows());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      int best = 0;
      for (Eigen::Index j = 1; j < probs.cols(); ++j)
        if (probs(i, j) > probs(i, best)) best = static_cast<int>(j);
      cls[i] = best;
    }
    return cls;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out = encoder_->params();
    for (auto* p : proj_e_->params()) out.push_back(p);
    for (auto* p : head_e_->params()) out.push_back(p);
    for (auto* p : proj_a_->params()) out.push_back(p);
    for (auto* p : head_a_->params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (Param* p : params()) p->zero_grad();
  }

  const ModelConfig& config() const { return cfg_; }
  Encoder& encoder() { return *encoder_; }
  CosineHead& head_a() { return *head_a_; }

 private:
  ModelConfig cfg_;
  Rng rng_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Dense> proj_e_;
  std::unique_ptr<Dense> head_e_;
  std::unique_ptr<Dense> proj_a_;
  std::unique_ptr<CosineHead> head_a_;
  Matrix cached_pe_, cached_pa_, cached_t_;
};

// Stage-1 network: encoder plus a single projection head whose l2-normalized
// output feeds the supervised contrastive loss.
class Stage1Model {
 public:
  Stage1Model(const ModelConfig& cfg, std::uint64_t init_seed)
      : cfg_(cfg), rng_(mix_seed(init_seed, 0xCC)) {
    encoder_ = make_encoder(cfg_.encoder, cfg_.input_channels, rng_);
    proj_ = std::make_unique<Dense>("proj", encoder_->output_dim(), cfg_.z_dim, rng_);
  }

  EmbeddingBatch forward_stage1(const Matrix& images, const IntVector& labels,
                                bool train) {
    require(images.rows() >= 1, "forward_stage1: batch is empty");
    const Matrix h = encoder_->forward(images, train);
    const Matrix p = tanh_forward(proj_->forward(h, train));
    if (train) cached_p_ = p;
    EmbeddingBatch batch;
    batch.vectors = l2_normalize_rows(p, "forward_stage1");
    batch.labels = labels;
    batch.unit_normalized = true;
    return batch;
  }

  void backward(const Matrix& d_z) {
    const Matrix d_p = l2_normalize_backward(cached_p_, d_z);
    encoder_->backward(proj_->backward(tanh_backward(cached_p_, d_p)));
  }

  std::vector<Param*> params() {
    std::vector<Param*> out = encoder_->params();
    for (auto* p : proj_->params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (Param* p : params()) p->zero_grad();
  }

  const ModelConfig& config() const { return cfg_; }
  Encoder& encoder() { return *encoder_; }

 private:
  ModelConfig cfg_;
  Rng rng_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Dense> proj_;
  Matrix cached_p_;
};

// Plain cross-entropy classifier over the same encoder; the comparison
// baseline. Parameter names match the Euclidean branch of CcfgModel so its
// encoder can seed stage-2 training.
class CeBaselineModel {
 public:
  CeBaselineModel(const ModelConfig& cfg, std::uint64_t init_seed)
      : cfg_(cfg), rng_(mix_seed(init_seed, 0xCC)) {
    cfg_.validate();
    encoder_ = make_encoder(cfg_.encoder, cfg_.input_channels, rng_);
    proj_ = std::make_unique<Dense>("proj_e", encoder_->output_dim(), cfg_.z_dim, rng_);
    head_ = std::make_unique<Dense>("head_e", cfg_.z_dim, cfg_.num_classes, rng_);
  }

  Matrix forward_probs(const Matrix& images, bool train) {
    require(images.rows() >= 1, "forward_probs: batch is empty");
    const Matrix h = encoder_->forward(images, train);
    const Matrix p = tanh_forward(proj_->forward(h, train));
    if (train) cached_p_ = p;
    const Matrix t = softmax_rows(head_->forward(p, train));
    if (train) cached_t_ = t;
    return t;
  }

  void backward(const Matrix& d_t) {
    const Matrix d_logits = softmax_backward(cached_t_, d_t);
    const Matrix d_p = head_->backward(d_logits);
    encoder_->backward(proj_->backward(tanh_backward(cached_p_, d_p)));
  }

  std::pair<Matrix, std::vector<int>> predict(const Matrix& images) {
    const Matrix t = forward_probs(images, /*train=*/false);
    return {t, CcfgModel::argmax_rows(t)};
  }

  std::vector<Param*> params() {
    std::vector<Param*> out = encoder_->params();
    for (auto* p : proj_->params()) out.push_back(p);
    for (auto* p : head_->params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (Param* p : params()) p->zero_grad();
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Rng rng_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Dense> proj_;
  std::unique_ptr<Dense> head_;
  Matrix cached_p_, cached_t_;
};

}  // namespace glyphnet
