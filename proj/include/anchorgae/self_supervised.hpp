#pragma once

// Outer training loop: train the encoder, refit the anchor graph on the
// embedding, pull anchors back to input space and grow the sparsity k so the
// refitted graph does not fragment into tiny uniform groups.

#include "anchorgae/anchor_graph.hpp"
#include "anchorgae/bipartite_conv.hpp"
#include "anchorgae/gae_training.hpp"
#include "anchorgae/numerics.hpp"

#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace anchorgae {

struct SparsitySchedule {
  Index k0 = 3;
  Index k_max = 3;    // floor(m * n_s / n)
  Index delta_k = 0;  // floor((k_max - k0) / E)
  int outer_epochs = 5;
  Index n_s = 0;      // smallest-cluster size estimate
  Index m = 0;

  /// Without a prior, n_s = floor(n / c).
  static SparsitySchedule make(Index n, Index m, int clusters, int outer_epochs, Index k0, std::optional<Index> n_s = std::nullopt) {
    if (n < 1 || m < 2) throw std::invalid_argument("SparsitySchedule: need n >= 1 and m >= 2");
    if (k0 < 1 || k0 >= m) throw std::invalid_argument("SparsitySchedule: k0 must satisfy 1 <= k0 < m");
    if (outer_epochs < 0) throw std::invalid_argument("SparsitySchedule: outer_epochs must be >= 0");
    if (!n_s && clusters < 1) throw std::invalid_argument("SparsitySchedule: clusters must be >= 1");
    SparsitySchedule s;
    s.k0 = k0;
    s.m = m;
    s.outer_epochs = outer_epochs;
    s.n_s = n_s ? *n_s : n / clusters;
    if (s.n_s < 1) throw std::invalid_argument("SparsitySchedule: n_s must be >= 1");
    s.k_max = std::max(k0, (m * s.n_s) / n);
    s.delta_k = outer_epochs > 0 ? (s.k_max - k0) / outer_epochs : 0;
    return s;
  }
};

/// k + delta_k, capped at m - 1 (the row solve needs a (k+1)-th distance).
inline Index step_sparsity(const SparsitySchedule& s, Index current_k) {
  return std::max(current_k, std::min(current_k + s.delta_k, s.m - 1));
}

enum class LoopMode {
  full,     // refit B, pull back anchors, grow k
  fixed_b,  // keep the initial graph (ablation A)
  fixed_k,  // refit with constant k (ablation B)
  knn,      // uniform 1/k rows over the k nearest anchors (ablation C)
};

inline const char* to_string(LoopMode m) {
  switch (m) {
    case LoopMode::full: return "full";
    case LoopMode::fixed_b: return "fixed-b";
    case LoopMode::fixed_k: return "fixed-k";
    case LoopMode::knn: return "knn";
  }
  return "full";
}

inline LoopMode parse_loop_mode(const std::string& s) {
  if (s == "full") return LoopMode::full;
  if (s == "fixed-b" || s == "fixed_b") return LoopMode::fixed_b;
  if (s == "fixed-k" || s == "fixed_k") return LoopMode::fixed_k;
  if (s == "knn") return LoopMode::knn;
  throw std::invalid_argument("unknown mode '" + s + "' (expected full, fixed-b, fixed-k or knn)");
}

struct CollapseDiagnostics {
  int iteration = 0;
  Index k = 0;
  double uniformity_gap = 0.0;       // max |b_ij - 1/k| over nonzero entries
  double mean_uniformity_gap = 0.0;  // row-averaged version of the above
  Index component_count = 0;         // connected components of the bipartite graph
  double reconstruction_gap = 0.0;   // max |q_ij - p_ij| over p's support
};

/// Connected components of the (n + m)-node bipartite graph with an edge for
/// every positive b_ij.
inline Index bipartite_components(const AnchorGraph& g) {
  std::vector<Index> parent(static_cast<std::size_t>(g.n + g.m));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  Index comps = g.n + g.m;
  for (Index i = 0; i < g.n; ++i) {
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      if (g.val[e] <= 0.0) continue;
      const Index a = find(i);
      const Index b = find(g.n + g.col[e]);
      if (a != b) {
        parent[std::max(a, b)] = std::min(a, b);
        --comps;
      }
    }
  }
  return comps;
}

inline double reconstruction_gap(const AnchorGraph& g, const DenseMatrix& q) {
  double gap = 0.0;
  for (Index i = 0; i < g.n; ++i) {
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      if (g.val[e] > 0.0) gap = std::max(gap, std::abs(q(i, g.col[e]) - g.val[e]));
    }
  }
  return gap;
}

inline CollapseDiagnostics measure_collapse(const AnchorGraph& g, const DenseMatrix& q) {
  if (q.rows() != g.n || q.cols() != g.m) {
    throw DimensionError("measure_collapse: q " + shape_str(q) + " vs graph " + std::to_string(g.n) + "x" + std::to_string(g.m));
  }
  CollapseDiagnostics d;
  d.k = g.k;
  const double target = g.k > 0 ? 1.0 / static_cast<double>(g.k) : 0.0;
  double row_sum = 0.0;
  for (Index i = 0; i < g.n; ++i) {
    double row_gap = 0.0;
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      if (g.val[e] > 0.0) row_gap = std::max(row_gap, std::abs(g.val[e] - target));
    }
    d.uniformity_gap = std::max(d.uniformity_gap, row_gap);
    row_sum += row_gap;
  }
  d.mean_uniformity_gap = g.n > 0 ? row_sum / static_cast<double>(g.n) : 0.0;
  d.component_count = bipartite_components(g);
  d.reconstruction_gap = reconstruction_gap(g, q);
  return d;
}

/// Anchors in input space as B-column-weighted means of the samples,
/// c_j = X^T b_j / Delta_j, so each anchor is a convex combination of samples.
inline DenseMatrix pullback_anchors(const DenseMatrix& x, const AnchorGraph& g) { return update_anchors(x, g); }

struct AnchorGaeConfig {
  Index anchors = 200;
  int clusters = 2;
  std::vector<Index> hidden = {128, 64};
  Index k0 = 3;
  int outer_epochs = 5;
  std::optional<Index> n_s;
  LoopMode mode = LoopMode::full;
  TrainConfig train;
  int fit_max_iters = 30;
  double fit_tol = 1e-6;
  std::uint64_t seed = 0;

  void validate(Index n) const {
    if (anchors < 2 || anchors > n) throw std::invalid_argument("anchors must satisfy 2 <= m <= n");
    if (clusters < 1) throw std::invalid_argument("clusters must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("at least one layer size is required");
    if (hidden.size() > 4) throw std::invalid_argument("at most 4 layers are supported");
    if (outer_epochs < 0) throw std::invalid_argument("outer_epochs must be >= 0");
    train.validate();
  }
};

/// State handed to an observer after initialisation (iteration 0) and after
/// each outer round.
struct IterationSnapshot {
  int iteration = 0;
  const AnchorGraph* graph = nullptr;  // graph after this round's refit
  const EncoderParams* params = nullptr;
  const DenseMatrix* x = nullptr;
  const CollapseDiagnostics* diagnostics = nullptr;
};

struct AnchorGaeResult {
  DenseMatrix z;  // encoder output on the final graph
  AnchorGraph graph;
  EncoderParams params;
  SparsitySchedule schedule;
  std::vector<CollapseDiagnostics> diagnostics;
  std::vector<LossTrace> traces;  // one per training round
  std::vector<Index> k_path;      // k after initialisation and after each round
};

namespace detail {

inline void require_stage_finite(const DenseMatrix& m, const std::string& stage, int round) {
  if (!m.allFinite()) throw NumericError("run_anchorgae: non-finite values after stage '" + stage + "' (round " + std::to_string(round) + ")");
}

}  // namespace detail

inline AnchorGaeResult run_anchorgae(const DenseMatrix& x, const AnchorGaeConfig& cfg,
                                     const std::function<void(const IterationSnapshot&)>& observer = {}) {
  cfg.validate(x.rows());
  detail::require_stage_finite(x, "input", 0);
  const RowRule rule = cfg.mode == LoopMode::knn ? RowRule::knn : RowRule::weighted;
  AnchorGaeResult res;
  res.schedule = SparsitySchedule::make(x.rows(), cfg.anchors, cfg.clusters, cfg.outer_epochs, cfg.k0, cfg.n_s);

  SeededRng root(cfg.seed);
  SeededRng anchor_rng = root.fork(1);
  SeededRng weight_rng = root.fork(2);

  ConnectivitySolveConfig fit{cfg.k0, cfg.fit_max_iters, cfg.fit_tol, rule};
  AnchorGraph g = fit_anchor_graph(x, init_anchors(x, cfg.anchors, anchor_rng), fit);
  DenseMatrix c = g.anchors;

  std::vector<Index> dims{x.cols()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  EncoderParams params = init_params(dims, weight_rng);

  Index k = cfg.k0;
  res.k_path.push_back(k);
  auto record = [&](int iteration, const DenseMatrix& q, double recon) {
    CollapseDiagnostics d = measure_collapse(g, q);
    d.iteration = iteration;
    d.reconstruction_gap = recon;
    res.diagnostics.push_back(d);
    if (observer) observer(IterationSnapshot{iteration, &g, &params, &x, &res.diagnostics.back()});
  };
  {
    const DenseMatrix q = decode(conv_forward_samples(g, x, params, false).z, conv_forward_anchors(g, c, params, false).z);
    record(0, q, reconstruction_gap(g, q));
  }

  // E = 0 still trains once on the initial graph, without refitting.
  const int rounds = std::max(cfg.outer_epochs, 1);
  for (int round = 1; round <= rounds; ++round) {
    TrainResult tr = train(g, x, c, std::move(params), cfg.train);
    params = std::move(tr.params);
    res.traces.push_back(std::move(tr.trace));
    if (cfg.outer_epochs == 0) break;

    const DenseMatrix z = conv_forward_samples(g, x, params, false).z;
    const DenseMatrix z_t = conv_forward_anchors(g, c, params, false).z;
    detail::require_stage_finite(z, "encode", round);
    detail::require_stage_finite(z_t, "encode anchors", round);
    const DenseMatrix q = decode(z, z_t);
    const double recon = reconstruction_gap(g, q);

    if (cfg.mode != LoopMode::fixed_b) {
      fit.k = k;
      AnchorGraph refit = fit_anchor_graph(z, z_t, fit);
      c = pullback_anchors(x, refit);
      detail::require_stage_finite(c, "pullback", round);
      refit.anchors = c;
      g = std::move(refit);
    }
    // Uniformity and components describe the refitted graph; the
    // reconstruction gap is the trained model's fit to the graph it was trained on.
    record(round, q, recon);
    if (cfg.mode != LoopMode::fixed_k) k = step_sparsity(res.schedule, k);
    res.k_path.push_back(k);
  }

  res.z = conv_forward_samples(g, x, params, false).z;
  detail::require_stage_finite(res.z, "final encode", rounds);
  res.graph = std::move(g);
  res.params = std::move(params);
  return res;
}

}  // namespace anchorgae
