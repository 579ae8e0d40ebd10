#pragma once

// Clustering accuracy under the best label bijection, normalised mutual
// information, and a wall-clock stopwatch.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchorgae {

struct EvalReport {
  double acc = 0.0;
  double nmi = 0.0;
  double runtime_seconds = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column assigned to each row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("hungarian: cost matrix must be square");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

/// Maps arbitrary integer labels to dense ids in first-appearance order.
inline std::vector<int> dense_ids(const std::vector<int>& labels, int* count = nullptr) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = ids.try_emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  if (count) *count = static_cast<int>(ids.size());
  return out;
}

/// Contingency counts, rows = predicted ids, cols = true ids.
inline std::vector<std::vector<double>> contingency(const std::vector<int>& pred, const std::vector<int>& truth, int& rows, int& cols) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("metrics: prediction has " + std::to_string(pred.size()) + " labels, truth has " +
                                std::to_string(truth.size()));
  }
  const auto p = dense_ids(pred, &rows);
  const auto t = dense_ids(truth, &cols);
  std::vector<std::vector<double>> table(rows, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) table[p[i]][t[i]] += 1.0;
  return table;
}

/// Fraction of samples correctly labelled under the best one-to-one matching
/// of predicted to true clusters (cost matrix padded to square).
inline double acc(const std::vector<int>& pred, const std::vector<int>& truth) {
  int rows = 0, cols = 0;
  const auto table = contingency(pred, truth, rows, cols);
  if (pred.empty()) return 0.0;
  const int size = std::max(rows, cols);
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, 0.0));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) cost[i][j] = -table[i][j];
  }
  const auto match = hungarian(cost);
  double hit = 0.0;
  for (int i = 0; i < rows; ++i) {
    if (match[i] < cols) hit += table[i][match[i]];
  }
  return hit / static_cast<double>(pred.size());
}

/// I(pred; truth) / sqrt(H(pred) H(truth)). Either entropy zero gives 0,
/// except two single-cluster partitions, which give 1.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  int rows = 0, cols = 0;
  const auto table = contingency(pred, truth, rows, cols);
  const double n = static_cast<double>(pred.size());
  if (pred.empty()) return 0.0;
  std::vector<double> pr(rows, 0.0), pc(cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      pr[i] += table[i][j];
      pc[j] += table[i][j];
    }
  }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts) {
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  const double hr = entropy(pr);
  const double hc = entropy(pc);
  if (rows == 1 && cols == 1) return 1.0;
  if (hr <= 0.0 || hc <= 0.0) return 0.0;
  double mi = 0.0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double c = table[i][j];
      if (c > 0.0) mi += (c / n) * std::log(c * n / (pr[i] * pc[j]));
    }
  }
  return std::clamp(mi / std::sqrt(hr * hc), 0.0, 1.0);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  void reset() { start_ = std::chrono::steady_clock::now(); }
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace anchorgae
