#pragma once

// Graph convolution over the anchor graph without forming the n x n or m x m
// adjacency. Samples use A = B Delta^-1 B^T, anchors use A_t = Delta^-1 B^T B,
// and both branches share the same weights.

#include "anchorgae/anchor_graph.hpp"
#include "anchorgae/numerics.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace anchorgae {

enum class Activation { relu, linear };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

struct EncoderParams {
  std::vector<DenseMatrix> weights;  // W_l is d_{l-1} x d_l
  std::vector<Activation> activations;

  std::size_t depth() const { return weights.size(); }

  std::vector<Index> dims() const {
    std::vector<Index> out;
    if (weights.empty()) return out;
    out.push_back(weights.front().rows());
    for (const auto& w : weights) out.push_back(w.cols());
    return out;
  }

  void validate() const {
    if (weights.empty()) throw std::invalid_argument("EncoderParams: no layers");
    if (activations.size() != weights.size()) throw std::invalid_argument("EncoderParams: one activation per layer required");
    for (std::size_t l = 1; l < weights.size(); ++l) {
      if (weights[l - 1].cols() != weights[l].rows()) {
        throw DimensionError("EncoderParams: layer " + std::to_string(l) + " shape " + shape_str(weights[l - 1]) +
                             " does not chain into " + shape_str(weights[l]));
      }
    }
  }
};

/// Glorot-uniform weights; ReLU on hidden layers, linear output layer.
inline EncoderParams init_params(const std::vector<Index>& layer_dims, SeededRng& rng) {
  if (layer_dims.size() < 2) throw std::invalid_argument("init_params: need input and at least one output dimension");
  EncoderParams p;
  for (std::size_t l = 1; l < layer_dims.size(); ++l) {
    const Index din = layer_dims[l - 1];
    const Index dout = layer_dims[l];
    if (din < 1 || dout < 1) throw std::invalid_argument("init_params: layer dimensions must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(din + dout));
    DenseMatrix w(din, dout);
    for (Index i = 0; i < din; ++i) {
      for (Index j = 0; j < dout; ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    p.weights.push_back(std::move(w));
    p.activations.push_back(l + 1 == layer_dims.size() ? Activation::linear : Activation::relu);
  }
  return p;
}

/// Per-layer intermediates of one forward pass.
struct LayerCache {
  DenseMatrix aggregated;  // m x d_in: Delta^-1 B^T H (samples) or A_t H (anchors)
  DenseMatrix pre;         // pre-activation
  DenseMatrix out;         // post-activation
};

enum class Branch { samples, anchors };

struct ForwardResult {
  DenseMatrix z;
  Branch branch = Branch::samples;
  std::vector<LayerCache> cache;  // empty in inference mode
};

inline DenseMatrix apply_activation(Activation a, const DenseMatrix& pre) {
  return a == Activation::relu ? DenseMatrix(pre.cwiseMax(0.0)) : pre;
}

namespace detail {

/// phi(B Y) in one pass over the output rows.
inline DenseMatrix b_times_activated(const AnchorGraph& g, const DenseMatrix& y, Activation a) {
  if (a != Activation::relu) return b_times(g, y);
  if (y.rows() != g.m) throw DimensionError("b_times: graph has " + std::to_string(g.m) + " anchors, operand " + shape_str(y));
  DenseMatrix out(g.n, y.cols());
  parallel_for(g.n, [&](long i) {
    const Index lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
    if (lo == hi) {
      out.row(i).setZero();
      return;
    }
    out.row(i).noalias() = g.val[lo] * y.row(g.col[lo]);
    for (Index e = lo + 1; e < hi; ++e) out.row(i).noalias() += g.val[e] * y.row(g.col[e]);
    out.row(i) = out.row(i).cwiseMax(0.0);
  });
  return out;
}

/// Inference-only sample branch that never materialises a hidden layer:
/// each row of phi(B T) is formed and immediately scattered into the next
/// layer's B^T H, split over per-worker partial sums.
inline DenseMatrix forward_samples_streamed(const AnchorGraph& g, const DenseMatrix& x, const EncoderParams& params) {
  DenseMatrix agg = scale_by_inverse_degree(g, bt_times(g, x));
  const std::size_t depth = params.depth();
  for (std::size_t l = 0;; ++l) {
    const DenseMatrix t3 = agg * params.weights[l];
    if (l + 1 == depth) return b_times_activated(g, t3, params.activations[l]);
    const Index width = t3.cols();
    const long parts = std::max<long>(1, std::min<long>(thread_count(), g.n / 1024));
    std::vector<DenseMatrix> partial(parts, DenseMatrix::Zero(g.m, width));
    const bool relu = params.activations[l] == Activation::relu;
    parallel_for(
        parts,
        [&](long p) {
          const Index lo = g.n * p / parts, hi = g.n * (p + 1) / parts;
          Eigen::RowVectorXd row(width);
          for (Index i = lo; i < hi; ++i) {
            row.setZero();
            for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) row.noalias() += g.val[e] * t3.row(g.col[e]);
            if (relu) row = row.cwiseMax(0.0);
            for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) partial[p].row(g.col[e]).noalias() += g.val[e] * row;
          }
        },
        1);
    agg = std::move(partial[0]);
    for (long p = 1; p < parts; ++p) agg += partial[p];
    agg = scale_by_inverse_degree(g, std::move(agg));
  }
}


inline void check_forward_inputs(const AnchorGraph& g, const DenseMatrix& x, Index expected_rows, const EncoderParams& params,
                                 const char* what) {
  params.validate();
  if (x.rows() != expected_rows) {
    throw DimensionError(std::string(what) + ": input " + shape_str(x) + " does not match graph (" + std::to_string(g.n) + " samples, " +
                         std::to_string(g.m) + " anchors)");
  }
  if (x.cols() != params.weights.front().rows()) {
    throw DimensionError(std::string(what) + ": input " + shape_str(x) + " does not match first layer " + shape_str(params.weights.front()));
  }
  require_positive_degrees(g, what);
}

}  // namespace detail

/// Z = phi_L(A ... phi_1(A X W_1) ... W_L), each layer evaluated as
/// B ((Delta^-1 (B^T H)) W).
inline ForwardResult conv_forward_samples(const AnchorGraph& g, const DenseMatrix& x, const EncoderParams& params,
                                          bool keep_cache = true) {
  detail::check_forward_inputs(g, x, g.n, params, "conv_forward_samples");
  ForwardResult r;
  r.branch = Branch::samples;
  if (!keep_cache) {
    r.z = detail::forward_samples_streamed(g, x, params);
    return r;
  }
  const DenseMatrix* in = &x;
  DenseMatrix h;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    DenseMatrix t2 = scale_by_inverse_degree(g, bt_times(g, *in));
    DenseMatrix t3 = t2 * params.weights[l];
    DenseMatrix pre = b_times(g, t3);
    DenseMatrix out = apply_activation(params.activations[l], pre);
    r.cache.push_back({std::move(t2), std::move(pre), out});
    h = std::move(out);
    in = &h;
  }
  r.z = std::move(h);
  return r;
}

/// Z_t = phi_L(A_t ... phi_1(A_t C W_1) ... W_L), each layer evaluated as
/// (Delta^-1 (B^T (B H))) W.
inline ForwardResult conv_forward_anchors(const AnchorGraph& g, const DenseMatrix& c, const EncoderParams& params,
                                          bool keep_cache = true) {
  detail::check_forward_inputs(g, c, g.m, params, "conv_forward_anchors");
  ForwardResult r;
  r.branch = Branch::anchors;
  DenseMatrix h = c;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    DenseMatrix agg = scale_by_inverse_degree(g, bt_times(g, b_times(g, h)));
    DenseMatrix pre = agg * params.weights[l];
    DenseMatrix out = apply_activation(params.activations[l], pre);
    if (keep_cache) r.cache.push_back({std::move(agg), std::move(pre), out});
    h = std::move(out);
  }
  r.z = std::move(h);
  return r;
}

}  // namespace anchorgae
