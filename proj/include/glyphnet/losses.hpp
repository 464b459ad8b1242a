#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "glyphnet/errors.hpp"

namespace glyphnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// ---------------------------------------------------------------------------
// Batch types
// ---------------------------------------------------------------------------

// Projected features z_i with class labels, one row per image.
struct EmbeddingBatch {
  Matrix vectors;        // B x d
  IntVector labels;      // B
  bool unit_normalized = false;

  void validate(int num_classes = -1) const {
    require(vectors.rows() == labels.size(), "EmbeddingBatch: rows != labels");
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      require(labels[i] >= 0, "EmbeddingBatch: negative label");
      if (num_classes >= 0)
        require(labels[i] < num_classes, "EmbeddingBatch: label out of range");
    }
    if (unit_normalized) {
      for (Eigen::Index i = 0; i < vectors.rows(); ++i)
        require(std::abs(vectors.row(i).norm() - 1.0) <= 1e-6,
                "EmbeddingBatch: row " + std::to_string(i) + " is not unit norm");
    }
  }
};

// N feature pairs with the same-class flag f_j.
struct PairFeatureBatch {
  Matrix left;           // N x d
  Matrix right;          // N x d
  IntVector flags;       // N, in {0,1}
  IntVector left_labels;
  IntVector right_labels;

  void validate() const {
    require(left.rows() == right.rows() && left.cols() == right.cols(),
            "PairFeatureBatch: left/right shape mismatch");
    require(flags.size() == left.rows(), "PairFeatureBatch: flags length mismatch");
    require(left_labels.size() == left.rows() && right_labels.size() == left.rows(),
            "PairFeatureBatch: label length mismatch");
    for (Eigen::Index j = 0; j < flags.size(); ++j) {
      require(flags[j] == 0 || flags[j] == 1, "PairFeatureBatch: flag not in {0,1}");
      const bool same = left_labels[j] == right_labels[j];
      require((flags[j] == 1) == same,
              "PairFeatureBatch: flag " + std::to_string(j) + " inconsistent with labels");
    }
  }
};

// Cosine similarities between features and class centers, entries in [-1, 1].
struct CosineLogits {
  Matrix cosines;  // batch x C

  void validate() const {
    require((cosines.array() >= -1.0 - 1e-6).all() && (cosines.array() <= 1.0 + 1e-6).all(),
            "CosineLogits: entry outside [-1, 1]");
  }
};

// All loss hyperparameters. Defaults follow the reference training recipe.
struct LossConfig {
  double tau = 0.07;               // supervised contrastive temperature
  double base_temperature = 0.07;  // constant multiplier tau/base_temperature on L_scl
  double gamma = 3.5;              // focal exponent
  double s = 30.0;                 // cosine scale
  double m_c = 0.40;               // cosine margin
  double m_e = 1.0;                // Euclidean margin
  double m_a = 1.0;                // angular chord margin
  double lambda = 0.3;             // balance weight on the pairwise terms
  int p_n = 4;                     // negative classes sampled per image

  void validate() const {
    require(tau > 0.0, "LossConfig: tau must be positive");
    require(base_temperature > 0.0, "LossConfig: base_temperature must be positive");
    require(gamma >= 0.0 && gamma <= 3.5, "LossConfig: gamma must lie in [0, 3.5]");
    require(s > 0.0, "LossConfig: s must be positive");
    require(m_c >= 0.0 && m_c <= 0.5, "LossConfig: m_c must lie in [0, 0.5]");
    require(m_e > 0.0, "LossConfig: m_e must be positive");
    require(m_a > 0.0, "LossConfig: m_a must be positive");
    require(lambda >= 0.0, "LossConfig: lambda must be nonnegative");
    require(p_n >= 0, "LossConfig: p_n must be nonnegative");
  }
};

// Which stage-2 components are active. Disabled components contribute exactly
// zero loss and zero gradient.
struct LossMask {
  bool focal = true;
  bool lmcl = true;
  bool euclidean = true;
  bool angular = true;
};

namespace detail {

inline double logsumexp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// Row-wise log-sum-exp over j != i of sim(i, j).
inline double logsumexp_off_diagonal(const Matrix& sim, Eigen::Index i) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < sim.cols(); ++j)
    if (j != i && sim(i, j) > m) m = sim(i, j);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < sim.cols(); ++j)
    if (j != i) acc += std::exp(sim(i, j) - m);
  return m + std::log(acc);
}

inline void check_labels(const IntVector& labels, Eigen::Index num_classes,
                         const char* who) {
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < num_classes,
            std::string(who) + ": label out of range");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Supervised contrastive loss (stage 1)
// ---------------------------------------------------------------------------
//
// L = sum_i (-1/|P(i)|) sum_{p in P(i)} log exp(z_i.z_p / tau)
//                                           / sum_{j != i} exp(z_i.z_j / tau)
//
// Rows whose positive set P(i) is empty contribute exactly zero.

inline double scl_loss(const Matrix& vectors, const IntVector& labels, double tau) {
  require(tau > 0.0, "scl_loss: tau must be positive");
  require(vectors.rows() >= 2, "scl_loss: batch must contain at least 2 rows");
  require(vectors.rows() == labels.size(), "scl_loss: rows != labels");
  const Eigen::Index n = vectors.rows();
  const Matrix sim = (vectors * vectors.transpose()) / tau;

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int pos_count = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      if (p != i && labels[p] == labels[i]) ++pos_count;
    if (pos_count == 0) continue;
    const double lse = detail::logsumexp_off_diagonal(sim, i);
    double inner = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      if (p != i && labels[p] == labels[i]) inner += sim(i, p) - lse;
    loss += -inner / pos_count;
  }
  return loss;
}

inline double scl_loss(const EmbeddingBatch& batch, double tau) {
  require(batch.unit_normalized, "scl_loss: batch must be unit normalized");
  batch.validate();
  return scl_loss(batch.vectors, batch.labels, tau);
}

// Gradient of scl_loss with respect to every row of `vectors`.
inline Matrix scl_loss_grad(const Matrix& vectors, const IntVector& labels, double tau) {
  require(tau > 0.0, "scl_loss_grad: tau must be positive");
  require(vectors.rows() >= 2, "scl_loss_grad: batch must contain at least 2 rows");
  const Eigen::Index n = vectors.rows();
  const Matrix sim = (vectors * vectors.transpose()) / tau;
  Matrix grad = Matrix::Zero(vectors.rows(), vectors.cols());

  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> positives;
    for (Eigen::Index p = 0; p < n; ++p)
      if (p != i && labels[p] == labels[i]) positives.push_back(p);
    if (positives.empty()) continue;
    const double inv_pos = 1.0 / static_cast<double>(positives.size());

    // Softmax over j != i of sim(i, j).
    const double lse = detail::logsumexp_off_diagonal(sim, i);
    Vector w = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) w[j] = std::exp(sim(i, j) - lse);

    Vector mean_pos = Vector::Zero(vectors.cols());
    for (Eigen::Index p : positives) mean_pos += vectors.row(p).transpose();
    mean_pos *= inv_pos;
    Vector weighted = vectors.transpose() * w;

    grad.row(i) += (-(mean_pos - weighted) / tau).transpose();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i) continue;
      const double is_pos =
          (labels[k] == labels[i]) ? inv_pos : 0.0;
      grad.row(k) += (-(is_pos - w[k]) / tau) * vectors.row(i);
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Focal classification loss over both pair members (stage 2)
// ---------------------------------------------------------------------------
//
// L = -sum_j [ (1 - t1(y1j))^g log t1(y1j) + (1 - t2(y2j))^g log t2(y2j) ]
//
// Probabilities below 1e-12 are clamped up before the log; an exact zero at a
// target index is rejected since the caller is expected to clamp first.

namespace detail {

inline double focal_term(double t, double gamma) {
  require(t > 0.0, "focal_pair_loss: target probability is exactly zero");
  t = std::min(std::max(t, 1e-12), 1.0);
  if (gamma == 0.0) return -std::log(t);
  return -std::pow(1.0 - t, gamma) * std::log(t);
}

// d/dt of the focal term, on the clamped value.
inline double focal_term_grad(double t, double gamma) {
  t = std::min(std::max(t, 1e-12), 1.0);
  if (gamma == 0.0) return -1.0 / t;
  const double one_minus = 1.0 - t;
  if (one_minus <= 0.0) return 0.0;
  return gamma * std::pow(one_minus, gamma - 1.0) * std::log(t) -
         std::pow(one_minus, gamma) / t;
}

}  // namespace detail

inline double focal_pair_loss(const Matrix& probs_left, const Matrix& probs_right,
                              const IntVector& left_labels, const IntVector& right_labels,
                              double gamma) {
  require(gamma >= 0.0, "focal_pair_loss: gamma must be nonnegative");
  require(probs_left.rows() == probs_right.rows() &&
              probs_left.cols() == probs_right.cols(),
          "focal_pair_loss: probability shape mismatch");
  require(left_labels.size() == probs_left.rows() &&
              right_labels.size() == probs_left.rows(),
          "focal_pair_loss: label length mismatch");
  detail::check_labels(left_labels, probs_left.cols(), "focal_pair_loss");
  detail::check_labels(right_labels, probs_left.cols(), "focal_pair_loss");

  double loss = 0.0;
  for (Eigen::Index j = 0; j < probs_left.rows(); ++j) {
    loss += detail::focal_term(probs_left(j, left_labels[j]), gamma);
    loss += detail::focal_term(probs_right(j, right_labels[j]), gamma);
  }
  return loss;
}

// Gradients with respect to both probability matrices; nonzero only at the
// target indices.
inline std::pair<Matrix, Matrix> focal_pair_loss_grad(
    const Matrix& probs_left, const Matrix& probs_right, const IntVector& left_labels,
    const IntVector& right_labels, double gamma) {
  Matrix gl = Matrix::Zero(probs_left.rows(), probs_left.cols());
  Matrix gr = Matrix::Zero(probs_right.rows(), probs_right.cols());
  for (Eigen::Index j = 0; j < probs_left.rows(); ++j) {
    gl(j, left_labels[j]) = detail::focal_term_grad(probs_left(j, left_labels[j]), gamma);
    gr(j, right_labels[j]) =
        detail::focal_term_grad(probs_right(j, right_labels[j]), gamma);
  }
  return {gl, gr};
}

// ---------------------------------------------------------------------------
// Large-margin cosine loss over both pair members (stage 2)
// ---------------------------------------------------------------------------
//
// Per member: -log softmax(u)_y with u_k = s*cos(theta_k) - s*m_c*[k == y].
// Both members enter with the same (negative) sign; evaluated via a
// log-sum-exp path so large s stays finite.

namespace detail {

inline double lmcl_member(const Eigen::Ref<const Vector>& cosines, int label, double s,
                          double m_c) {
  Vector u = s * cosines;
  u[label] -= s * m_c;
  return detail::logsumexp(u) - u[label];
}

inline Vector lmcl_member_grad(const Eigen::Ref<const Vector>& cosines, int label,
                               double s, double m_c) {
  Vector u = s * cosines;
  u[label] -= s * m_c;
  const double lse = detail::logsumexp(u);
  Vector p = (u.array() - lse).exp();
  p[label] -= 1.0;
  return s * p;
}

}  // namespace detail

inline double lmcl_loss(const Matrix& cos_left, const Matrix& cos_right,
                        const IntVector& left_labels, const IntVector& right_labels,
                        double s, double m_c) {
  require(s > 0.0, "lmcl_loss: s must be positive");
  require(m_c >= 0.0 && m_c <= 0.5, "lmcl_loss: m_c must lie in [0, 0.5]");
  require(cos_left.rows() == cos_right.rows() && cos_left.cols() == cos_right.cols(),
          "lmcl_loss: cosine shape mismatch");
  detail::check_labels(left_labels, cos_left.cols(), "lmcl_loss");
  detail::check_labels(right_labels, cos_left.cols(), "lmcl_loss");

  double loss = 0.0;
  for (Eigen::Index j = 0; j < cos_left.rows(); ++j) {
    loss += detail::lmcl_member(cos_left.row(j).transpose(), left_labels[j], s, m_c);
    loss += detail::lmcl_member(cos_right.row(j).transpose(), right_labels[j], s, m_c);
  }
  return loss;
}

inline double lmcl_loss(const CosineLogits& cos_left, const CosineLogits& cos_right,
                        const IntVector& left_labels, const IntVector& right_labels,
                        double s, double m_c) {
  cos_left.validate();
  cos_right.validate();
  return lmcl_loss(cos_left.cosines, cos_right.cosines, left_labels, right_labels, s, m_c);
}

inline std::pair<Matrix, Matrix> lmcl_loss_grad(const Matrix& cos_left,
                                                const Matrix& cos_right,
                                                const IntVector& left_labels,
                                                const IntVector& right_labels, double s,
                                                double m_c) {
  Matrix gl(cos_left.rows(), cos_left.cols());
  Matrix gr(cos_right.rows(), cos_right.cols());
  for (Eigen::Index j = 0; j < cos_left.rows(); ++j) {
    gl.row(j) =
        detail::lmcl_member_grad(cos_left.row(j).transpose(), left_labels[j], s, m_c)
            .transpose();
    gr.row(j) =
        detail::lmcl_member_grad(cos_right.row(j).transpose(), right_labels[j], s, m_c)
            .transpose();
  }
  return {gl, gr};
}

// ---------------------------------------------------------------------------
// Pairwise contrastive loss in Euclidean space (stage 2)
// ---------------------------------------------------------------------------
//
// L = sum_j f_j d^2 + (1 - f_j) max(0, m_e - d)^2  with d = |z1j - z2j|.

inline double euclidean_pair_loss(const Matrix& left, const Matrix& right,
                                  const IntVector& flags, double m_e) {
  require(m_e > 0.0, "euclidean_pair_loss: margin must be positive");
  require(left.rows() == right.rows() && left.cols() == right.cols(),
          "euclidean_pair_loss: shape mismatch");
  require(flags.size() == left.rows(), "euclidean_pair_loss: flags length mismatch");

  double loss = 0.0;
  for (Eigen::Index j = 0; j < left.rows(); ++j) {
    const double d2 = (left.row(j) - right.row(j)).squaredNorm();
    if (flags[j] == 1) {
      loss += d2;
    } else {
      const double hinge = std::max(0.0, m_e - std::sqrt(d2));
      loss += hinge * hinge;
    }
  }
  return loss;
}

inline double euclidean_pair_loss(const PairFeatureBatch& pairs, double m_e) {
  pairs.validate();
  return euclidean_pair_loss(pairs.left, pairs.right, pairs.flags, m_e);
}

inline std::pair<Matrix, Matrix> euclidean_pair_loss_grad(const Matrix& left,
                                                          const Matrix& right,
                                                          const IntVector& flags,
                                                          double m_e) {
  Matrix gl = Matrix::Zero(left.rows(), left.cols());
  Matrix gr = Matrix::Zero(right.rows(), right.cols());
  for (Eigen::Index j = 0; j < left.rows(); ++j) {
    const Eigen::RowVectorXd diff = left.row(j) - right.row(j);
    if (flags[j] == 1) {
      gl.row(j) = 2.0 * diff;
      gr.row(j) = -2.0 * diff;
    } else {
      const double d = diff.norm();
      if (d < m_e && d > 1e-12) {
        const double coef = -2.0 * (m_e - d) / d;
        gl.row(j) = coef * diff;
        gr.row(j) = -coef * diff;
      }
      // d == 0 on a negative pair: the hinge is nonsmooth there; the zero
      // subgradient is used.
    }
  }
  return {gl, gr};
}

// ---------------------------------------------------------------------------
// Pairwise contrastive loss in angular space (stage 2)
// ---------------------------------------------------------------------------
//
// Inputs are the raw r' vectors; both sides are unit-normalized internally and
// then the Euclidean contrastive form is applied to the chord distance.

namespace detail {

inline Matrix normalize_rows_checked(const Matrix& m, const char* who) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!std::isfinite(n))
      throw DivergenceError(std::string(who) + ": non-finite row norm at " +
                            std::to_string(i));
    require(n > 0.0, std::string(who) + ": zero-norm row " + std::to_string(i));
    out.row(i) = m.row(i) / n;
  }
  return out;
}

}  // namespace detail

inline double angular_pair_loss(const Matrix& left, const Matrix& right,
                                const IntVector& flags, double m_a) {
  require(m_a > 0.0, "angular_pair_loss: margin must be positive");
  require(left.rows() == right.rows() && left.cols() == right.cols(),
          "angular_pair_loss: shape mismatch");
  const Matrix lh = detail::normalize_rows_checked(left, "angular_pair_loss");
  const Matrix rh = detail::normalize_rows_checked(right, "angular_pair_loss");
  return euclidean_pair_loss(lh, rh, flags, m_a);
}

inline double angular_pair_loss(const PairFeatureBatch& pairs, double m_a) {
  pairs.validate();
  return angular_pair_loss(pairs.left, pairs.right, pairs.flags, m_a);
}

// Equivalent chord formulation: f_j 2(1 - cos a_j)
//                             + (1 - f_j) max(0, m_a - sqrt(2(1 - cos a_j)))^2.
inline double angular_pair_loss_cosine_form(const Matrix& left, const Matrix& right,
                                            const IntVector& flags, double m_a) {
  require(m_a > 0.0, "angular_pair_loss_cosine_form: margin must be positive");
  double loss = 0.0;
  for (Eigen::Index j = 0; j < left.rows(); ++j) {
    const double ln = left.row(j).norm();
    const double rn = right.row(j).norm();
    require(ln > 0.0 && rn > 0.0, "angular_pair_loss_cosine_form: zero-norm row");
    const double cos_a =
        std::clamp(left.row(j).dot(right.row(j)) / (ln * rn), -1.0, 1.0);
    const double chord_sq = 2.0 * (1.0 - cos_a);
    if (flags[j] == 1) {
      loss += chord_sq;
    } else {
      const double hinge = std::max(0.0, m_a - std::sqrt(chord_sq));
      loss += hinge * hinge;
    }
  }
  return loss;
}

inline std::pair<Matrix, Matrix> angular_pair_loss_grad(const Matrix& left,
                                                        const Matrix& right,
                                                        const IntVector& flags,
                                                        double m_a) {
  const Matrix lh = detail::normalize_rows_checked(left, "angular_pair_loss_grad");
  const Matrix rh = detail::normalize_rows_checked(right, "angular_pair_loss_grad");
  auto [glh, grh] = euclidean_pair_loss_grad(lh, rh, flags, m_a);
  Matrix gl(left.rows(), left.cols());
  Matrix gr(right.rows(), right.cols());
  for (Eigen::Index j = 0; j < left.rows(); ++j) {
    // Chain through x -> x/|x|: J^T g = (g - x_hat (x_hat . g)) / |x|.
    gl.row(j) = (glh.row(j) - lh.row(j) * lh.row(j).dot(glh.row(j))) / left.row(j).norm();
    gr.row(j) =
        (grh.row(j) - rh.row(j) * rh.row(j).dot(grh.row(j))) / right.row(j).norm();
  }
  return {gl, gr};
}

// ---------------------------------------------------------------------------
// Total stage-2 objective
// ---------------------------------------------------------------------------

inline double total_loss(double focal, double lmcl, double l_e, double l_a,
                         double lambda) {
  require(std::isfinite(focal) && std::isfinite(lmcl) && std::isfinite(l_e) &&
              std::isfinite(l_a),
          "total_loss: component is not finite");
  require(lambda >= 0.0, "total_loss: lambda must be nonnegative");
  return focal + lmcl + lambda * (l_e + l_a);
}

}  // namespace glyphnet
