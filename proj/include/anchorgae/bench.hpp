#pragma once

// Forward-pass timing of the factored convolution against a dense-adjacency
// reference, for the linear-in-n scaling check.

#include "anchorgae/anchor_graph.hpp"
#include "anchorgae/bipartite_conv.hpp"
#include "anchorgae/metrics.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

namespace anchorgae {

struct BenchConfig {
  std::vector<Index> sizes = {10000, 20000, 40000};
  Index anchors = 200;
  Index dim = 64;
  std::vector<Index> layers = {128, 64};
  Index k = 5;
  int reps = 5;
  Index dense_cap = 4000;  // dense path skipped (inf) above this n
  std::uint64_t seed = 0;
};

struct BenchRow {
  Index n = 0;
  double t_factored = 0.0;
  double t_dense = std::numeric_limits<double>::infinity();
};

/// Gaussian samples and a graph built by one row solve against random anchors.
struct BenchInstance {
  DenseMatrix x;
  AnchorGraph g;
  EncoderParams params;
};

inline BenchInstance make_bench_instance(Index n, const BenchConfig& cfg, SeededRng& rng) {
  BenchInstance inst;
  inst.x.resize(n, cfg.dim);
  for (Index i = 0; i < inst.x.size(); ++i) inst.x.data()[i] = rng.normal();
  const DenseMatrix anchors = init_anchors(inst.x, cfg.anchors, rng);
  assign_rows(inst.g, pairwise_sq_dist(inst.x, anchors), cfg.k, RowRule::weighted);
  // a random anchor set can leave some anchor unused; route one row to it
  for (Index j = 0; j < inst.g.m; ++j) {
    if (inst.g.delta(j) > 0.0) continue;
    const Index i = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    inst.g.col[inst.g.row_ptr[i]] = j;
    inst.g.recompute_delta();
  }
  inst.g.anchors = anchors;
  std::vector<Index> dims{cfg.dim};
  dims.insert(dims.end(), cfg.layers.begin(), cfg.layers.end());
  inst.params = init_params(dims, rng);
  return inst;
}

/// Same stack as conv_forward_samples, but through the materialised n x n A.
inline DenseMatrix dense_forward_samples(const DenseMatrix& a, const DenseMatrix& x, const EncoderParams& params) {
  DenseMatrix h = x;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    DenseMatrix ah(a.rows(), h.cols());
    ah.noalias() = a * h;
    DenseMatrix pre(ah.rows(), params.weights[l].cols());
    pre.noalias() = ah * params.weights[l];
    h = apply_activation(params.activations[l], pre);
  }
  return h;
}

inline DenseMatrix dense_forward_anchors(const DenseMatrix& a_t, const DenseMatrix& c, const EncoderParams& params) {
  return dense_forward_samples(a_t, c, params);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Max abs difference between factored and dense sample-branch outputs.
inline double bench_spot_check(const BenchConfig& cfg, Index n = 200) {
  SeededRng rng(cfg.seed ^ 0x51ULL);
  BenchConfig small = cfg;
  small.anchors = std::min<Index>(cfg.anchors, n / 2);
  const BenchInstance inst = make_bench_instance(n, small, rng);
  const DenseMatrix fact = conv_forward_samples(inst.g, inst.x, inst.params, false).z;
  const DenseMatrix dense = dense_forward_samples(dense_adjacency(inst.g).a, inst.x, inst.params);
  return (fact - dense).cwiseAbs().maxCoeff();
}

inline std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.sizes.empty()) throw std::invalid_argument("bench: no sizes given");
  if (!std::is_sorted(cfg.sizes.begin(), cfg.sizes.end())) throw std::invalid_argument("bench: sizes must be ascending");
  if (cfg.reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
  std::vector<BenchRow> rows;
  SeededRng rng(cfg.seed);
  for (Index n : cfg.sizes) {
    if (n < cfg.anchors) throw std::invalid_argument("bench: size " + std::to_string(n) + " is below the anchor count");
    const BenchInstance inst = make_bench_instance(n, cfg, rng);
    BenchRow row;
    row.n = n;
    conv_forward_samples(inst.g, inst.x, inst.params, false);  // warm-up
    std::vector<double> times;
    for (int r = 0; r < cfg.reps; ++r) {
      Stopwatch sw;
      const DenseMatrix z = conv_forward_samples(inst.g, inst.x, inst.params, false).z;
      times.push_back(sw.seconds());
      if (!z.allFinite()) throw NumericError("bench: non-finite forward output");
    }
    row.t_factored = median(times);
    if (n <= cfg.dense_cap) {
      try {
        const DenseMatrix a = dense_adjacency(inst.g).a;
        times.clear();
        for (int r = 0; r < cfg.reps; ++r) {
          Stopwatch sw;
          dense_forward_samples(a, inst.x, inst.params);
          times.push_back(sw.seconds());
        }
        row.t_dense = median(times);
      } catch (const std::bad_alloc&) {
        row.t_dense = std::numeric_limits<double>::infinity();
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace anchorgae
