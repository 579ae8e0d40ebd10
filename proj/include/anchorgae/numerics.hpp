#pragma once

// Dense linear algebra substrate shared by every other module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anchorgae {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical precondition fails (NaN, non-symmetric input, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

inline void require_finite(const DenseMatrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError(what + ": non-finite entry");
}

/// Counter-based generator: draw i is a pure function of (seed, i).
/// Not thread-safe; give each thread its own instance.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), key_(mix(seed ^ 0x5851F42D4C957F2DULL)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = 0;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Independent stream derived from this seed, e.g. one per restart.
  SeededRng fork(std::uint64_t stream) const { return SeededRng(mix(seed_ + 0xD1B54A32D192ED03ULL * (stream + 1))); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shapes " + shape_str(a) + " and " + shape_str(b) + " do not chain");
  }
  DenseMatrix out = a * b;
  return out;
}

/// Squared Euclidean distances between the rows of `a` (n x d) and `b` (m x d).
/// Cancellation negatives are clamped to zero.
inline DenseMatrix pairwise_sq_dist(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise_sq_dist: feature dims differ (" + shape_str(a) + " vs " + shape_str(b) + ")");
  }
  const Vector an = a.rowwise().squaredNorm();
  const Eigen::RowVectorXd bn = b.rowwise().squaredNorm().transpose();
  DenseMatrix d(a.rows(), b.rows());
  d.noalias() = a * b.transpose();
  for (Index i = 0; i < d.rows(); ++i) {
    d.row(i) = (bn.array() + an(i) - 2.0 * d.row(i).array()).max(0.0);
  }
  return d;
}

struct EigenPairs {
  Vector values;        // descending
  DenseMatrix vectors;  // m x c, orthonormal columns
};

/// The c largest eigenpairs of a small symmetric matrix. Only ever called on
/// anchor-sized (m x m) problems.
inline EigenPairs sym_eig_topc(const DenseMatrix& s, Index c) {
  if (s.rows() != s.cols()) throw DimensionError("sym_eig_topc: matrix " + shape_str(s) + " is not square");
  if (c < 0 || c > s.rows()) {
    throw DimensionError("sym_eig_topc: requested " + std::to_string(c) + " pairs from " + shape_str(s));
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw NumericError("sym_eig_topc: input is not symmetric");
  }
  require_finite(s, "sym_eig_topc");
  const DenseMatrix sym = 0.5 * (s + s.transpose());
  const Index m = s.rows();
  EigenPairs out;
  out.values.resize(c);
  out.vectors.resize(m, c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() == Eigen::Success) {
    // Eigen sorts ascending.
    for (Index j = 0; j < c; ++j) {
      out.values(j) = solver.eigenvalues()(m - 1 - j);
      out.vectors.col(j) = solver.eigenvectors().col(m - 1 - j);
    }
    return out;
  }
  // Tridiagonal QR occasionally stalls. Shift to PSD, where singular pairs are eigenpairs.
  const double shift = sym.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::MatrixXd psd = sym + shift * Eigen::MatrixXd::Identity(m, m);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(psd, Eigen::ComputeFullU);
  if (svd.info() != Eigen::Success) throw NumericError("sym_eig_topc: eigensolver did not converge");
  for (Index j = 0; j < c; ++j) {
    out.values(j) = svd.singularValues()(j) - shift;
    out.vectors.col(j) = svd.matrixU().col(j);
  }
  return out;
}

}  // namespace anchorgae
