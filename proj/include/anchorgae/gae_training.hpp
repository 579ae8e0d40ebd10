#pragma once

// Distance-softmax decoder, cross-entropy reconstruction of B, hand-derived
// gradients through both encoder branches, and the full-batch training loop.

#include "anchorgae/anchor_graph.hpp"
#include "anchorgae/bipartite_conv.hpp"
#include "anchorgae/numerics.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace anchorgae {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kProbabilityFloor = 1e-300;

/// q(u_j | v_i) = softmax_j(-||z_i - zt_j||^2), row-wise with max subtraction.
inline DenseMatrix decode(const DenseMatrix& z, const DenseMatrix& z_t) {
  if (z.cols() != z_t.cols()) throw DimensionError("decode: embeddings " + shape_str(z) + " and " + shape_str(z_t) + " differ in width");
  DenseMatrix q = pairwise_sq_dist(z, z_t);
  parallel_for(q.rows(), [&](long i) {
    auto row = q.row(i);
    const double lo = row.minCoeff();
    row = (-(row.array() - lo)).exp().matrix();
    row /= row.sum();
  });
  return q;
}

struct LossValue {
  double value = 0.0;
  bool clamped = false;  // some q entry on p's support underflowed to the floor
};

/// Cross-entropy sum_i sum_j p_ij log(1 / q_ij); only B's stored entries contribute.
inline LossValue loss_with_flag(const AnchorGraph& p, const DenseMatrix& q) {
  if (q.rows() != p.n || q.cols() != p.m) {
    throw DimensionError("loss: q " + shape_str(q) + " vs graph " + std::to_string(p.n) + "x" + std::to_string(p.m));
  }
  LossValue out;
  for (Index i = 0; i < p.n; ++i) {
    for (Index e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
      if (p.val[e] == 0.0) continue;
      double qv = q(i, p.col[e]);
      if (qv < kProbabilityFloor) {
        qv = kProbabilityFloor;
        out.clamped = true;
      }
      out.value -= p.val[e] * std::log(qv);
    }
  }
  return out;
}

inline double loss(const AnchorGraph& p, const DenseMatrix& q) { return loss_with_flag(p, q).value; }

/// dL/dD_ij = p_ij - (sum_l p_il) q_ij for D the squared-distance matrix.
inline DenseMatrix loss_grad_distances(const AnchorGraph& p, const DenseMatrix& q) {
  DenseMatrix g(q.rows(), q.cols());
  for (Index i = 0; i < p.n; ++i) {
    double mass = 0.0;
    for (Index e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) mass += p.val[e];
    g.row(i) = -mass * q.row(i);
    for (Index e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) g(i, p.col[e]) += p.val[e];
  }
  return g;
}

using Gradients = std::vector<DenseMatrix>;

/// Backpropagates `upstream` = dL/dZ (or dL/dZ_t) through one branch.
inline Gradients backward_branch(const AnchorGraph& g, const ForwardResult& fwd, const EncoderParams& params,
                                 DenseMatrix upstream) {
  const std::size_t depth = params.depth();
  const Index rows = fwd.branch == Branch::samples ? g.n : g.m;
  if (fwd.cache.size() != depth) throw DimensionError("backward: cache holds " + std::to_string(fwd.cache.size()) + " layers, params " + std::to_string(depth));
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& c = fwd.cache[l];
    if (c.pre.rows() != rows || c.pre.cols() != params.weights[l].cols() || c.aggregated.rows() != g.m ||
        c.aggregated.cols() != params.weights[l].rows()) {
      throw DimensionError("backward: stale cache at layer " + std::to_string(l));
    }
  }
  if (upstream.rows() != rows || upstream.cols() != params.weights.back().cols()) {
    throw DimensionError("backward: upstream gradient " + shape_str(upstream) + " does not match branch output");
  }

  Gradients grads(depth);
  DenseMatrix dh = std::move(upstream);
  for (std::size_t step = 0; step < depth; ++step) {
    const std::size_t l = depth - 1 - step;
    const auto& c = fwd.cache[l];
    DenseMatrix dpre = std::move(dh);
    if (params.activations[l] == Activation::relu) dpre = dpre.cwiseProduct(DenseMatrix((c.pre.array() > 0.0).cast<double>()));
    const DenseMatrix& w = params.weights[l];
    if (fwd.branch == Branch::samples) {
      // pre = B (T2 W),  T2 = Delta^-1 B^T H
      const DenseMatrix u = bt_times(g, dpre);
      grads[l] = c.aggregated.transpose() * u;
      if (l > 0) dh = b_times(g, scale_by_inverse_degree(g, u * w.transpose()));
    } else {
      // pre = (Delta^-1 B^T B H) W
      grads[l] = c.aggregated.transpose() * dpre;
      if (l > 0) dh = bt_times(g, b_times(g, scale_by_inverse_degree(g, dpre * w.transpose())));
    }
  }
  return grads;
}

struct EmbeddingGrads {
  DenseMatrix dz;    // n x d'
  DenseMatrix dz_t;  // m x d'
};

/// Chain rule from dL/dD to both embeddings, scaled by `loss_scale`.
inline EmbeddingGrads embedding_grads(const AnchorGraph& p, const DenseMatrix& z, const DenseMatrix& z_t, const DenseMatrix& q,
                                      double loss_scale = 1.0) {
  DenseMatrix gd = loss_grad_distances(p, q);
  if (loss_scale != 1.0) gd *= loss_scale;
  const Vector row_sums = gd.rowwise().sum();
  const Vector col_sums = gd.colwise().sum().transpose();
  EmbeddingGrads out;
  out.dz.noalias() = gd * z_t;
  out.dz_t.noalias() = gd.transpose() * z;
  out.dz = 2.0 * (row_sums.asDiagonal() * z - out.dz);
  out.dz_t = 2.0 * (col_sums.asDiagonal() * z_t - out.dz_t);
  return out;
}

/// dL/dW_l summed over the sample and anchor branches (shared weights).
inline Gradients backward(const AnchorGraph& g, const ForwardResult& samples, const ForwardResult& anchors, const EncoderParams& params,
                          const AnchorGraph& p, const DenseMatrix& q, double loss_scale = 1.0) {
  const EmbeddingGrads eg = embedding_grads(p, samples.z, anchors.z, q, loss_scale);
  Gradients grads = backward_branch(g, samples, params, eg.dz);
  const Gradients ga = backward_branch(g, anchors, params, eg.dz_t);
  for (std::size_t l = 0; l < grads.size(); ++l) grads[l] += ga[l];
  return grads;
}

enum class Optimizer { gd, adam };

inline const char* to_string(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

struct TrainConfig {
  int inner_epochs = 200;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip;  // max global L2 norm

  void validate() const {
    if (inner_epochs < 1) throw std::invalid_argument("TrainConfig: inner_epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (grad_clip && !(*grad_clip > 0.0)) throw std::invalid_argument("TrainConfig: grad_clip must be > 0");
  }
};

/// Per-epoch loss, recorded before each parameter update.
struct LossTrace {
  std::vector<double> values;
};

struct TrainResult {
  EncoderParams params;
  LossTrace trace;
  bool clamped = false;
};

/// Optimiser state lives only for one call; the outer loop restarts Adam's
/// moments each time the graph changes.
inline TrainResult train(const AnchorGraph& g, const DenseMatrix& x, const DenseMatrix& c, EncoderParams params, const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  std::vector<DenseMatrix> m1, m2;
  for (const auto& w : params.weights) {
    m1.push_back(DenseMatrix::Zero(w.rows(), w.cols()));
    m2.push_back(DenseMatrix::Zero(w.rows(), w.cols()));
  }
  TrainResult result;
  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    const ForwardResult fs = conv_forward_samples(g, x, params);
    const ForwardResult fa = conv_forward_anchors(g, c, params);
    const DenseMatrix q = decode(fs.z, fa.z);
    const LossValue lv = loss_with_flag(g, q);
    if (!std::isfinite(lv.value)) throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
    result.clamped = result.clamped || lv.clamped;
    result.trace.values.push_back(lv.value);

    Gradients grads = backward(g, fs, fa, params, g, q);
    if (cfg.grad_clip) {
      double sq = 0.0;
      for (const auto& gr : grads) sq += gr.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > *cfg.grad_clip) {
        for (auto& gr : grads) gr *= *cfg.grad_clip / norm;
      }
    }
    if (cfg.optimizer == Optimizer::gd) {
      for (std::size_t l = 0; l < grads.size(); ++l) params.weights[l] -= cfg.learning_rate * grads[l];
    } else {
      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      for (std::size_t l = 0; l < grads.size(); ++l) {
        m1[l] = cfg.beta1 * m1[l] + (1.0 - cfg.beta1) * grads[l];
        m2[l] = cfg.beta2 * m2[l] + (1.0 - cfg.beta2) * grads[l].cwiseAbs2();
        const auto mhat = m1[l].array() / (1.0 - b1t);
        const auto vhat = m2[l].array() / (1.0 - b2t);
        params.weights[l].array() -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
      }
    }
    for (std::size_t l = 0; l < grads.size(); ++l) {
      if (!params.weights[l].allFinite()) throw TrainingError("train: non-finite weights after epoch " + std::to_string(epoch));
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace anchorgae
