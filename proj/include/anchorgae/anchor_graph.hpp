#pragma once

// Sample-to-anchor bipartite graph: the k-sparse row-stochastic matrix B of
// connectivity probabilities p(u_j | v_i), its anchor degrees and the anchors.

#include "anchorgae/numerics.hpp"
#include "anchorgae/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace anchorgae {

/// B stored in compressed sparse rows; rows produced by the connectivity
/// solver all carry exactly `k` entries.
struct AnchorGraph {
  Index n = 0;
  Index m = 0;
  Index k = 0;
  std::vector<Index> row_ptr;  // n + 1
  std::vector<Index> col;      // anchor ids, row-major
  std::vector<double> val;     // p(u_j | v_i)
  Vector delta;                // column sums of B
  DenseMatrix anchors;         // m x d, in the space B was fitted in

  Index nnz() const { return static_cast<Index>(col.size()); }

  void recompute_delta() {
    delta = Vector::Zero(m);
    for (std::size_t e = 0; e < col.size(); ++e) delta(col[e]) += val[e];
  }

  double min_degree() const { return m == 0 ? 0.0 : delta.minCoeff(); }

  DenseMatrix dense_b() const {
    DenseMatrix b = DenseMatrix::Zero(n, m);
    for (Index i = 0; i < n; ++i) {
      for (Index e = row_ptr[i]; e < row_ptr[i + 1]; ++e) b(i, col[e]) += val[e];
    }
    return b;
  }

  /// Builds a graph from a dense B, keeping strictly positive entries.
  static AnchorGraph from_dense(const DenseMatrix& b, DenseMatrix anchors = {}) {
    AnchorGraph g;
    g.n = b.rows();
    g.m = b.cols();
    g.row_ptr.assign(1, 0);
    for (Index i = 0; i < g.n; ++i) {
      Index cnt = 0;
      for (Index j = 0; j < g.m; ++j) {
        if (b(i, j) > 0.0) {
          g.col.push_back(j);
          g.val.push_back(b(i, j));
          ++cnt;
        }
      }
      g.k = std::max(g.k, cnt);
      g.row_ptr.push_back(static_cast<Index>(g.col.size()));
    }
    g.anchors = std::move(anchors);
    g.recompute_delta();
    return g;
  }
};

/// How each row of B is formed from its anchor distances.
enum class RowRule {
  weighted,  // closed-form k-sparse solution of the regularised problem
  knn,       // uniform 1/k over the k nearest anchors
};

struct ConnectivitySolveConfig {
  Index k = 3;
  int max_iters = 30;
  double tol = 1e-6;
  RowRule rule = RowRule::weighted;

  void validate(Index m) const {
    if (k < 1 || k >= m) {
      throw std::invalid_argument("connectivity: sparsity k=" + std::to_string(k) + " must satisfy 1 <= k < m=" +
                                  std::to_string(m));
    }
    if (max_iters < 1) throw std::invalid_argument("connectivity: max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("connectivity: tol must be > 0");
  }
};

struct SparseRow {
  std::vector<Index> col;  // ascending distance, ties by ascending index
  std::vector<double> val;
};

namespace detail {

/// Indices of the k+1 smallest entries, ordered by (distance, index).
inline std::vector<Index> nearest_k_plus_one(std::span<const double> d, Index k) {
  std::vector<Index> idx(d.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  auto less = [&](Index a, Index b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + k + 1, idx.end(), less);
  idx.resize(k + 1);
  return idx;
}

inline void check_row_input(std::span<const double> d, Index k) {
  const auto m = static_cast<Index>(d.size());
  if (k < 1 || k >= m) {
    throw std::invalid_argument("solve_connectivity_row: need 1 <= k < m (k=" + std::to_string(k) +
                                ", m=" + std::to_string(m) + ")");
  }
  for (double v : d) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("solve_connectivity_row: distances must be finite and >= 0");
  }
}

}  // namespace detail

/// p_j = (d_{k+1} - d_j)_+ / sum_{l<=k} (d_{k+1} - d_l) over the k nearest
/// anchors. When the k+1 nearest distances all tie the row falls back to 1/k.
inline SparseRow solve_connectivity_row(std::span<const double> dists, Index k) {
  detail::check_row_input(dists, k);
  const auto idx = detail::nearest_k_plus_one(dists, k);
  const double dk1 = dists[idx[k]];
  double denom = 0.0;
  for (Index l = 0; l < k; ++l) denom += dk1 - dists[idx[l]];
  SparseRow row;
  row.col.assign(idx.begin(), idx.begin() + k);
  row.val.resize(k);
  // Relative guard: a denominator at rounding level of d_{k+1} is a full tie.
  if (!(denom > 1e-14 * std::max(1.0, dk1))) {
    std::fill(row.val.begin(), row.val.end(), 1.0 / static_cast<double>(k));
    return row;
  }
  for (Index l = 0; l < k; ++l) row.val[l] = std::max(0.0, dk1 - dists[idx[l]]) / denom;
  return row;
}

inline SparseRow knn_row(std::span<const double> dists, Index k) {
  detail::check_row_input(dists, k);
  const auto idx = detail::nearest_k_plus_one(dists, k);
  SparseRow row;
  row.col.assign(idx.begin(), idx.begin() + k);
  row.val.assign(k, 1.0 / static_cast<double>(k));
  return row;
}

/// Replaces the rows of `g` with solutions computed from the n x m distance matrix.
inline void assign_rows(AnchorGraph& g, const DenseMatrix& dists, Index k, RowRule rule) {
  const Index n = dists.rows();
  const Index m = dists.cols();
  g.n = n;
  g.m = m;
  g.k = k;
  g.row_ptr.resize(n + 1);
  for (Index i = 0; i <= n; ++i) g.row_ptr[i] = i * k;
  g.col.assign(n * k, 0);
  g.val.assign(n * k, 0.0);
  parallel_for(n, [&](long i) {
    std::span<const double> d(dists.data() + i * m, static_cast<std::size_t>(m));
    const SparseRow r = rule == RowRule::weighted ? solve_connectivity_row(d, k) : knn_row(d, k);
    std::copy(r.col.begin(), r.col.end(), g.col.begin() + i * k);
    std::copy(r.val.begin(), r.val.end(), g.val.begin() + i * k);
  });
  g.recompute_delta();
}

/// B^T Y (m x cols).
inline DenseMatrix bt_times(const AnchorGraph& g, const DenseMatrix& y) {
  if (y.rows() != g.n) throw DimensionError("bt_times: graph has " + std::to_string(g.n) + " rows, operand " + shape_str(y));
  DenseMatrix out = DenseMatrix::Zero(g.m, y.cols());
  for (Index i = 0; i < g.n; ++i) {
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) out.row(g.col[e]).noalias() += g.val[e] * y.row(i);
  }
  return out;
}

/// B Y (n x cols).
inline DenseMatrix b_times(const AnchorGraph& g, const DenseMatrix& y) {
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
  });
  return out;
}

inline void require_positive_degrees(const AnchorGraph& g, const char* what) {
  for (Index j = 0; j < g.m; ++j) {
    if (!(g.delta(j) >= 1e-12)) {
      throw NumericError(std::string(what) + ": anchor " + std::to_string(j) + " has zero degree");
    }
  }
}

/// Scales row j of `y` by 1 / delta_j.
inline DenseMatrix scale_by_inverse_degree(const AnchorGraph& g, DenseMatrix y) {
  for (Index j = 0; j < g.m; ++j) y.row(j) /= g.delta(j);
  return y;
}

/// Anchor j becomes the B-weighted mean of the mapped samples.
inline DenseMatrix update_anchors(const DenseMatrix& x_mapped, const AnchorGraph& g) {
  if (x_mapped.rows() != g.n) {
    throw DimensionError("update_anchors: " + shape_str(x_mapped) + " samples vs graph with " + std::to_string(g.n) + " rows");
  }
  require_positive_degrees(g, "update_anchors");
  return scale_by_inverse_degree(g, bt_times(g, x_mapped));
}

/// gamma_i = 1/2 (k d_{k+1} - sum_{l<=k} d_l) for one distance row.
inline double regularization_weight(std::span<const double> d, Index k) {
  const auto idx = detail::nearest_k_plus_one(d, k);
  double s = 0.0;
  for (Index l = 0; l < k; ++l) s += d[idx[l]];
  return 0.5 * (static_cast<double>(k) * d[idx[k]] - s);
}

/// Value of the regularised objective for one row: expected distance plus
/// gamma * ||p - uniform||^2, with gamma derived from the same distances.
inline double row_objective(std::span<const double> d, std::span<const Index> cols, std::span<const double> vals, Index k) {
  const auto m = static_cast<double>(d.size());
  const double gamma = regularization_weight(d, k);
  double expected = 0.0;
  double sq = 0.0;
  for (std::size_t e = 0; e < cols.size(); ++e) {
    expected += vals[e] * d[cols[e]];
    sq += (vals[e] - 1.0 / m) * (vals[e] - 1.0 / m) - 1.0 / (m * m);
  }
  sq += 1.0 / m;  // the m zero entries' (1/m)^2 each, minus those re-counted above
  return expected + gamma * sq;
}

inline double connectivity_objective(const DenseMatrix& dists, const AnchorGraph& g) {
  double total = 0.0;
  const Index m = dists.cols();
  for (Index i = 0; i < g.n; ++i) {
    const auto b = static_cast<std::size_t>(g.row_ptr[i]);
    const auto len = static_cast<std::size_t>(g.row_ptr[i + 1] - g.row_ptr[i]);
    total += row_objective(std::span<const double>(dists.data() + i * m, static_cast<std::size_t>(m)),
                           std::span<const Index>(g.col.data() + b, len), std::span<const double>(g.val.data() + b, len), g.k);
  }
  return total;
}

inline double expected_distance(const DenseMatrix& dists, const AnchorGraph& g) {
  double total = 0.0;
  for (Index i = 0; i < g.n; ++i) {
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) total += g.val[e] * dists(i, g.col[e]);
  }
  return total;
}

/// Per-iteration record of the alternating solve. Each half-step is an exact
/// minimiser of its own subproblem, so both before/after pairs must descend.
struct FitTrace {
  std::vector<double> objective;
  std::vector<double> p_step_before, p_step_after;            // objective at fixed distances
  std::vector<double> anchor_step_before, anchor_step_after;  // expected distance at fixed B
  int iterations = 0;
  int reseeds = 0;
};

/// m distinct rows of x, sampled uniformly without replacement.
inline DenseMatrix init_anchors(const DenseMatrix& x, Index m, SeededRng& rng) {
  const Index n = x.rows();
  if (m < 1 || m > n) {
    throw std::invalid_argument("init_anchors: need 1 <= m <= n (m=" + std::to_string(m) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(perm[i], perm[j]);
  }
  DenseMatrix out(m, x.cols());
  for (Index i = 0; i < m; ++i) out.row(i) = x.row(perm[i]);
  return out;
}

namespace detail {

/// Moves every zero-degree anchor onto the sample farthest from its nearest
/// anchor, re-solving rows after each move. Returns the number of moves.
inline int reseed_empty_anchors(const DenseMatrix& x, DenseMatrix& anchors, DenseMatrix& dists, AnchorGraph& g,
                                const ConnectivitySolveConfig& cfg) {
  int moves = 0;
  const int limit = static_cast<int>(2 * g.m + 2);
  for (;;) {
    Index empty = -1;
    for (Index j = 0; j < g.m; ++j) {
      if (g.delta(j) < 1e-12) {
        empty = j;
        break;
      }
    }
    if (empty < 0) return moves;
    if (++moves > limit) throw NumericError("fit_anchor_graph: could not give every anchor a positive degree");
    Index far = 0;
    double best = -1.0;
    for (Index i = 0; i < dists.rows(); ++i) {
      const double nearest = dists.row(i).minCoeff();
      if (nearest > best) {
        best = nearest;
        far = i;
      }
    }
    anchors.row(empty) = x.row(far);
    dists.col(empty) = (x.rowwise() - x.row(far)).rowwise().squaredNorm();
    assign_rows(g, dists, cfg.k, cfg.rule);
  }
}

}  // namespace detail

/// Alternates the closed-form row solve and the weighted-mean anchor update
/// until the objective's relative change drops below cfg.tol.
inline AnchorGraph fit_anchor_graph(const DenseMatrix& x_mapped, const DenseMatrix& anchors0,
                                    const ConnectivitySolveConfig& cfg, FitTrace* trace = nullptr) {
  if (anchors0.cols() != x_mapped.cols()) {
    throw DimensionError("fit_anchor_graph: samples " + shape_str(x_mapped) + " vs anchors " + shape_str(anchors0));
  }
  cfg.validate(anchors0.rows());
  require_finite(x_mapped, "fit_anchor_graph (samples)");
  require_finite(anchors0, "fit_anchor_graph (anchors)");

  DenseMatrix anchors = anchors0;
  DenseMatrix dists = pairwise_sq_dist(x_mapped, anchors);
  AnchorGraph g;
  AnchorGraph previous;
  double prev_obj = std::numeric_limits<double>::quiet_NaN();

  for (int t = 1; t <= cfg.max_iters; ++t) {
    assign_rows(g, dists, cfg.k, cfg.rule);
    const int moved = detail::reseed_empty_anchors(x_mapped, anchors, dists, g, cfg);
    const double obj = connectivity_objective(dists, g);
    if (trace) {
      trace->reseeds += moved;
      trace->objective.push_back(obj);
      if (t > 1 && moved == 0) {
        trace->p_step_before.push_back(connectivity_objective(dists, previous));
        trace->p_step_after.push_back(obj);
      }
    }
    const double before = trace ? expected_distance(dists, g) : 0.0;
    anchors = update_anchors(x_mapped, g);
    dists = pairwise_sq_dist(x_mapped, anchors);
    if (trace) {
      trace->anchor_step_before.push_back(before);
      trace->anchor_step_after.push_back(expected_distance(dists, g));
      trace->iterations = t;
    }
    const bool converged = t > 1 && std::abs(obj - prev_obj) <= cfg.tol * std::max(std::abs(prev_obj), 1e-300);
    prev_obj = obj;
    if (converged) break;
    if (trace) previous = g;
  }
  g.anchors = std::move(anchors);
  return g;
}

/// p(v_i | u_j) = b_ij / delta_j as a dense m x n matrix.
inline DenseMatrix normalize_anchor_side(const AnchorGraph& g) {
  require_positive_degrees(g, "normalize_anchor_side");
  DenseMatrix out = DenseMatrix::Zero(g.m, g.n);
  for (Index i = 0; i < g.n; ++i) {
    for (Index e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) out(g.col[e], i) += g.val[e] / g.delta(g.col[e]);
  }
  return out;
}

struct DenseAdjacency {
  DenseMatrix a;    // n x n, B Delta^-1 B^T
  DenseMatrix a_t;  // m x m, Delta^-1 B^T B
};

/// Materialises both one-step transition graphs. Reference use only.
inline DenseAdjacency dense_adjacency(const AnchorGraph& g) {
  require_positive_degrees(g, "dense_adjacency");
  const DenseMatrix b = g.dense_b();
  const Vector inv = g.delta.cwiseInverse();
  DenseAdjacency out;
  out.a = b * inv.asDiagonal() * b.transpose();
  out.a_t = inv.asDiagonal() * (b.transpose() * b);
  return out;
}

}  // namespace anchorgae
