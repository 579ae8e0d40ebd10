#pragma once

// Final label extraction: k-means on an embedding, or spectral clustering of
// the anchor graph through the SVD of B Delta^-1/2.

#include "anchorgae/anchor_graph.hpp"
#include "anchorgae/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace anchorgae {

struct ClusterAssignment {
  std::vector<int> labels;  // each in [0, c)
  int c = 0;
};

struct KMeansResult {
  ClusterAssignment assignment;
  DenseMatrix centroids;
  double wcss = 0.0;
  std::vector<double> wcss_trace;  // after each assignment step of the winning restart
  int restart = 0;
};

namespace detail {

inline double nearest_centroid(const DenseMatrix& z, Index i, const DenseMatrix& centroids, int& label) {
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < centroids.rows(); ++j) {
    const double d = (z.row(i) - centroids.row(j)).squaredNorm();
    if (d < best) {
      best = d;
      label = static_cast<int>(j);
    }
  }
  return best;
}

inline DenseMatrix kmeanspp_seed(const DenseMatrix& z, int c, SeededRng& rng) {
  const Index n = z.rows();
  DenseMatrix centroids(c, z.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  Index pick = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  for (int j = 0; j < c; ++j) {
    centroids.row(j) = z.row(pick);
    chosen[pick] = 1;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (z.row(i) - centroids.row(j)).squaredNorm());
      total += d2[i];
    }
    if (j + 1 == c) break;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      // Remaining points coincide with chosen centroids; take unchosen rows in order.
      pick = 0;
      while (pick < n - 1 && chosen[pick]) ++pick;
    }
  }
  return centroids;
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeding; best of `restarts` by WCSS, ties
/// to the lowest restart index.
inline KMeansResult kmeans(const DenseMatrix& z, int c, SeededRng& rng, int restarts = 10, int max_iters = 300) {
  const Index n = z.rows();
  if (c < 1 || c > n) throw std::invalid_argument("kmeans: need 1 <= c <= n (c=" + std::to_string(c) + ", n=" + std::to_string(n) + ")");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  require_finite(z, "kmeans");

  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    SeededRng local = rng.fork(static_cast<std::uint64_t>(r));
    DenseMatrix centroids = detail::kmeanspp_seed(z, c, local);
    std::vector<int> labels(n, -1);
    std::vector<double> dist(n, 0.0);
    std::vector<double> trace;
    double wcss = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      bool changed = false;
      wcss = 0.0;
      for (Index i = 0; i < n; ++i) {
        int lab = 0;
        dist[i] = detail::nearest_centroid(z, i, centroids, lab);
        changed = changed || lab != labels[i];
        labels[i] = lab;
        wcss += dist[i];
      }
      trace.push_back(wcss);
      if (!changed && it > 0) break;

      DenseMatrix sums = DenseMatrix::Zero(c, z.cols());
      std::vector<Index> counts(c, 0);
      for (Index i = 0; i < n; ++i) {
        sums.row(labels[i]) += z.row(i);
        ++counts[labels[i]];
      }
      for (int j = 0; j < c; ++j) {
        if (counts[j] > 0) {
          centroids.row(j) = sums.row(j) / static_cast<double>(counts[j]);
          continue;
        }
        // Empty cluster: move it onto the point farthest from its centroid.
        Index far = 0;
        for (Index i = 1; i < n; ++i) {
          if (dist[i] > dist[far]) far = i;
        }
        centroids.row(j) = z.row(far);
        dist[far] = 0.0;
      }
    }
    if (wcss < best.wcss) {
      best.assignment.labels = labels;
      best.assignment.c = c;
      best.centroids = centroids;
      best.wcss = wcss;
      best.wcss_trace = std::move(trace);
      best.restart = r;
    }
  }
  return best;
}

struct SpectralResult {
  DenseMatrix v;  // n x c, sample side of the co-clustering indicator
  DenseMatrix u;  // m x c, anchor side
  Vector singular_values;
  ClusterAssignment assignment;
  std::vector<std::string> warnings;
};

/// B^T B accumulated row by row from the sparse rows (O(n k^2)).
inline DenseMatrix gram_bt_b(const AnchorGraph& g) {
  DenseMatrix s = DenseMatrix::Zero(g.m, g.m);
  for (Index i = 0; i < g.n; ++i) {
    for (Index a = g.row_ptr[i]; a < g.row_ptr[i + 1]; ++a) {
      for (Index b = g.row_ptr[i]; b < g.row_ptr[i + 1]; ++b) s(g.col[a], g.col[b]) += g.val[a] * g.val[b];
    }
  }
  return s;
}

/// Leading singular triplets of B Delta^-1/2 from the m x m eigenproblem of
/// its Gram matrix; labels by k-means on the l2-normalised sample rows.
/// The sqrt(2)/2 scaling of the closed form is kept though it does not change the labels.
inline SpectralResult spectral_via_svd(const AnchorGraph& g, int c, std::uint64_t seed = 0, int restarts = 10) {
  if (c < 1 || c > g.m) throw std::invalid_argument("spectral_via_svd: need 1 <= c <= m (c=" + std::to_string(c) + ")");
  require_positive_degrees(g, "spectral_via_svd");

  // Column sums recomputed from B must agree with the stored degrees: the
  // bipartite normalisation and the anchor-graph one then coincide.
  Vector du = Vector::Zero(g.m);
  for (std::size_t e = 0; e < g.col.size(); ++e) du(g.col[e]) += g.val[e];
  for (std::size_t e = 0; e < g.col.size(); ++e) {
    const Index j = g.col[e];
    if (g.val[e] * std::abs(1.0 / std::sqrt(du(j)) - 1.0 / std::sqrt(g.delta(j))) >= 1e-12) {
      throw NumericError("spectral_via_svd: stored degrees disagree with column sums of B");
    }
  }

  const Vector inv_sqrt = g.delta.cwiseSqrt().cwiseInverse();
  const DenseMatrix gram = inv_sqrt.asDiagonal() * gram_bt_b(g) * inv_sqrt.asDiagonal();
  const EigenPairs eig = sym_eig_topc(gram, c);

  SpectralResult out;
  out.singular_values.resize(c);
  const DenseMatrix right = eig.vectors;
  DenseMatrix left = b_times(g, inv_sqrt.asDiagonal() * right);  // B_hat * U_tilde
  const double top = std::sqrt(std::max(eig.values(0), 0.0));
  for (Index j = 0; j < c; ++j) {
    const double sigma = std::sqrt(std::max(eig.values(j), 0.0));
    out.singular_values(j) = sigma;
    if (sigma <= 1e-10 * std::max(top, 1e-300)) {
      left.col(j).setZero();
      out.warnings.push_back("spectral_via_svd: B_hat has rank < " + std::to_string(c) + "; component " + std::to_string(j) +
                             " padded with zeros");
    } else {
      left.col(j) /= sigma;
    }
  }
  const double half_root2 = std::numbers::sqrt2 / 2.0;
  out.v = half_root2 * left;
  out.u = half_root2 * right;

  DenseMatrix normalized = out.v;
  std::vector<Index> zero_rows;
  std::vector<Index> live_rows;
  for (Index i = 0; i < g.n; ++i) {
    const double nrm = normalized.row(i).norm();
    if (nrm > 1e-300) {
      normalized.row(i) /= nrm;
      live_rows.push_back(i);
    } else {
      zero_rows.push_back(i);
    }
  }
  SeededRng rng(seed);
  out.assignment.c = c;
  out.assignment.labels.assign(g.n, 0);
  if (live_rows.empty()) return out;
  DenseMatrix live(static_cast<Index>(live_rows.size()), c);
  for (std::size_t r = 0; r < live_rows.size(); ++r) live.row(static_cast<Index>(r)) = normalized.row(live_rows[r]);
  const int clusters = static_cast<int>(std::min<Index>(c, live.rows()));
  const KMeansResult km = kmeans(live, clusters, rng, restarts);
  for (std::size_t r = 0; r < live_rows.size(); ++r) out.assignment.labels[live_rows[r]] = km.assignment.labels[r];
  if (!zero_rows.empty()) {
    // Zero rows go to the nearest cluster mean of the unnormalised rows.
    DenseMatrix means = DenseMatrix::Zero(clusters, c);
    std::vector<Index> counts(clusters, 0);
    for (std::size_t r = 0; r < live_rows.size(); ++r) {
      means.row(km.assignment.labels[r]) += out.v.row(live_rows[r]);
      ++counts[km.assignment.labels[r]];
    }
    for (int j = 0; j < clusters; ++j) means.row(j) /= static_cast<double>(std::max<Index>(counts[j], 1));
    for (Index i : zero_rows) {
      int lab = 0;
      detail::nearest_centroid(out.v, i, means, lab);
      out.assignment.labels[i] = lab;
    }
  }
  return out;
}

}  // namespace anchorgae
