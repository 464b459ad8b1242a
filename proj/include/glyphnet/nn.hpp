#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "glyphnet/errors.hpp"
#include "glyphnet/losses.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

// A named trainable array. The name doubles as the checkpoint key.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

inline void he_uniform_init(Matrix& w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / std::max(1, fan_in));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------------------
// Row-wise softmax and l2 normalization with backward passes
// ---------------------------------------------------------------------------

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

inline Matrix softmax_backward(const Matrix& probs, const Matrix& dprobs) {
  Matrix dlogits(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double dot = probs.row(i).dot(dprobs.row(i));
    dlogits.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
  }
  return dlogits;
}

inline Matrix l2_normalize_rows(const Matrix& x, const char* who = "l2_normalize_rows") {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (!std::isfinite(n))
      throw DivergenceError(std::string(who) + ": non-finite feature norm in row " +
                            std::to_string(i));
    require(n > 0.0, std::string(who) + ": zero-norm row " + std::to_string(i));
    out.row(i) = x.row(i) / n;
  }
  return out;
}

// Backward of z = x / |x| given the raw input x.
inline Matrix l2_normalize_backward(const Matrix& x, const Matrix& dz) {
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    const Eigen::RowVectorXd zhat = x.row(i) / n;
    dx.row(i) = (dz.row(i) - zhat * zhat.dot(dz.row(i))) / n;
  }
  return dx;
}

inline Matrix tanh_forward(const Matrix& x) { return x.array().tanh(); }

inline Matrix tanh_backward(const Matrix& out, const Matrix& dout) {
  return dout.array() * (1.0 - out.array().square());
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

class Dense {
 public:
  Dense(const std::string& prefix, int in_dim, int out_dim, Rng& rng)
      : weight(prefix + ".weight", out_dim, in_dim), bias(prefix + ".bias", out_dim, 1) {
    he_uniform_init(weight.value, in_dim, rng);
  }

  Matrix forward(const Matrix& x, bool train) {
    if (train) cached_input_ = x;
    Matrix out = x * weight.value.transpose();
    out.rowwise() += bias.value.col(0).transpose();
    return out;
  }

  Matrix backward(const Matrix& dout) {
    weight.grad.noalias() += dout.transpose() * cached_input_;
    bias.grad.col(0) += dout.colwise().sum().transpose();
    return dout * weight.value;
  }

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  Matrix cached_input_;
};

// ---------------------------------------------------------------------------
// Cosine classification head: rows of the weight matrix are class centers;
// logits are cosines between the l2-normalized input and each center.
// ---------------------------------------------------------------------------

class CosineHead {
 public:
  CosineHead(const std::string& prefix, int feat_dim, int num_classes, Rng& rng)
      : weight(prefix + ".weight", num_classes, feat_dim) {
    he_uniform_init(weight.value, feat_dim, rng);
  }

  Matrix forward(const Matrix& x, bool train) {
    const Matrix xhat = l2_normalize_rows(x, "CosineHead input");
    const Matrix what = l2_normalize_rows(weight.value, "CosineHead weight");
    if (train) {
      cached_x_ = x;
      cached_xhat_ = xhat;
      cached_what_ = what;
    }
    return xhat * what.transpose();
  }

  Matrix backward(const Matrix& dcos) {
    const Matrix dxhat = dcos * cached_what_;
    const Matrix dwhat = dcos.transpose() * cached_xhat_;
    for (Eigen::Index c = 0; c < weight.value.rows(); ++c) {
      const double n = weight.value.row(c).norm();
      weight.grad.row(c) +=
          (dwhat.row(c) - cached_what_.row(c) * cached_what_.row(c).dot(dwhat.row(c))) / n;
    }
    return l2_normalize_backward(cached_x_, dxhat);
  }

  std::vector<Param*> params() { return {&weight}; }

  Param weight;

 private:
  Matrix cached_x_, cached_xhat_, cached_what_;
};

// ---------------------------------------------------------------------------
// Convolution stack building blocks (3x3 pad-1 conv, 2x2 max pool, ReLU,
// global average pooling). Activations are batches of flattened H x W x C
// maps, channel-last: index (y, x, c) -> (y*W + x)*C + c.
// ---------------------------------------------------------------------------

class Conv3x3 {
 public:
  Conv3x3(const std::string& prefix, int h, int w, int in_ch, int out_ch, Rng& rng)
      : h_(h), w_(w), in_ch_(in_ch), out_ch_(out_ch),
        weight(prefix + ".weight", out_ch, 9 * in_ch), bias(prefix + ".bias", out_ch, 1) {
    he_uniform_init(weight.value, 9 * in_ch, rng);
  }

  int out_cols() const { return h_ * w_ * out_ch_; }

  Matrix forward(const Matrix& x, bool train) {
    require(x.cols() == h_ * w_ * in_ch_, "Conv3x3: input feature size mismatch");
    if (train) cached_input_ = x;
    const Eigen::Index batch = x.rows();
    Matrix out(batch, out_cols());
    Matrix col(h_ * w_, 9 * in_ch_);
    for (Eigen::Index b = 0; b < batch; ++b) {
      im2col(x, b, col);
      Matrix prod = col * weight.value.transpose();  // (h*w) x out_ch
      prod.rowwise() += bias.value.col(0).transpose();
      for (int p = 0; p < h_ * w_; ++p)
        for (int c = 0; c < out_ch_; ++c) out(b, p * out_ch_ + c) = prod(p, c);
    }
    return out;
  }

  Matrix backward(const Matrix& dout) {
    const Eigen::Index batch = dout.rows();
    Matrix dx = Matrix::Zero(batch, h_ * w_ * in_ch_);
    Matrix col(h_ * w_, 9 * in_ch_);
    Matrix dprod(h_ * w_, out_ch_);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int p = 0; p < h_ * w_; ++p)
        for (int c = 0; c < out_ch_; ++c) dprod(p, c) = dout(b, p * out_ch_ + c);
      im2col(cached_input_, b, col);
      weight.grad.noalias() += dprod.transpose() * col;
      bias.grad.col(0) += dprod.colwise().sum().transpose();
      const Matrix dcol = dprod * weight.value;  // (h*w) x 9*in_ch
      col2im(dcol, dx, b);
    }
    return dx;
  }

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  void im2col(const Matrix& x, Eigen::Index b, Matrix& col) const {
    for (int y = 0; y < h_; ++y) {
      for (int xx = 0; xx < w_; ++xx) {
        const int p = y * w_ + xx;
        int k = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int sy = y + dy;
            const int sx = xx + dx;
            const bool inside = sy >= 0 && sy < h_ && sx >= 0 && sx < w_;
            for (int c = 0; c < in_ch_; ++c, ++k)
              col(p, k) = inside ? x(b, (sy * w_ + sx) * in_ch_ + c) : 0.0;
          }
        }
      }
    }
  }

  void col2im(const Matrix& dcol, Matrix& dx, Eigen::Index b) const {
    for (int y = 0; y < h_; ++y) {
      for (int xx = 0; xx < w_; ++xx) {
        const int p = y * w_ + xx;
        int k = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx_ = -1; dx_ <= 1; ++dx_) {
            const int sy = y + dy;
            const int sx = xx + dx_;
            const bool inside = sy >= 0 && sy < h_ && sx >= 0 && sx < w_;
            for (int c = 0; c < in_ch_; ++c, ++k)
              if (inside) dx(b, (sy * w_ + sx) * in_ch_ + c) += dcol(p, k);
          }
        }
      }
    }
  }

  int h_, w_, in_ch_, out_ch_;
  Matrix cached_input_;
};

class Relu {
 public:
  Matrix forward(const Matrix& x, bool train) {
    Matrix out = x.cwiseMax(0.0);
    if (train) cached_output_ = out;
    return out;
  }
  Matrix backward(const Matrix& dout) const {
    return (cached_output_.array() > 0.0).select(dout.array(), 0.0).matrix();
  }

 private:
  Matrix cached_output_;
};

class MaxPool2 {
 public:
  MaxPool2(int h, int w, int ch) : h_(h), w_(w), ch_(ch) {
    require(h % 2 == 0 && w % 2 == 0, "MaxPool2: input dims must be even");
  }

  int out_cols() const { return (h_ / 2) * (w_ / 2) * ch_; }

  Matrix forward(const Matrix& x, bool train) {
    const Eigen::Index batch = x.rows();
    const int oh = h_ / 2, ow = w_ / 2;
    Matrix out(batch, out_cols());
    if (train) argmax_.assign(static_cast<std::size_t>(batch) * out_cols(), 0);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
          for (int c = 0; c < ch_; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = 0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int idx = ((2 * y + dy) * w_ + (2 * xx + dx)) * ch_ + c;
                if (x(b, idx) > best) {
                  best = x(b, idx);
                  best_idx = idx;
                }
              }
            const int oidx = (y * ow + xx) * ch_ + c;
            out(b, oidx) = best;
            if (train) argmax_[b * out_cols() + oidx] = best_idx;
          }
    }
    return out;
  }

  Matrix backward(const Matrix& dout) const {
    Matrix dx = Matrix::Zero(dout.rows(), h_ * w_ * ch_);
    for (Eigen::Index b = 0; b < dout.rows(); ++b)
      for (int o = 0; o < out_cols(); ++o)
        dx(b, argmax_[b * out_cols() + o]) += dout(b, o);
    return dx;
  }

 private:
  int h_, w_, ch_;
  std::vector<int> argmax_;
};

class GlobalAvgPool {
 public:
  GlobalAvgPool(int h, int w, int ch) : positions_(h * w), ch_(ch) {}

  Matrix forward(const Matrix& x, bool /*train*/) const {
    Matrix out = Matrix::Zero(x.rows(), ch_);
    for (Eigen::Index b = 0; b < x.rows(); ++b)
      for (int p = 0; p < positions_; ++p)
        for (int c = 0; c < ch_; ++c) out(b, c) += x(b, p * ch_ + c);
    return out / static_cast<double>(positions_);
  }

  Matrix backward(const Matrix& dout) const {
    Matrix dx(dout.rows(), positions_ * ch_);
    for (Eigen::Index b = 0; b < dout.rows(); ++b)
      for (int p = 0; p < positions_; ++p)
        for (int c = 0; c < ch_; ++c)
          dx(b, p * ch_ + c) = dout(b, c) / static_cast<double>(positions_);
    return dx;
  }

 private:
  int positions_, ch_;
};

}  // namespace glyphnet
