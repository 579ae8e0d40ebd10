#pragma once

// Dataset ingestion (delimited text, IDX binaries), synthetic data with
// ground truth, column scaling and atomic file output.

#include "anchorgae/numerics.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace anchorgae {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  DenseMatrix x;
  std::optional<std::vector<int>> labels;
  std::string name;
  DenseMatrix centers;  // generating centres, synthetic blobs only

  Index n() const { return x.rows(); }
  Index d() const { return x.cols(); }

  int num_classes() const {
    if (!labels || labels->empty()) return 0;
    return *std::max_element(labels->begin(), labels->end()) + 1;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace detail

/// One sample per line. `label_col` (negative counts from the end) is removed
/// from the features and mapped to dense ids in first-appearance order.
inline Dataset load_csv(const std::string& path, std::optional<int> label_col = std::nullopt, char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  Dataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  std::vector<double> values;
  std::vector<int> labels;
  std::map<std::string, int, std::less<>> label_ids;
  std::size_t width = 0;
  Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, delimiter);
    if (rows == 0) {
      width = cells.size();
      if (label_col) {
        const int resolved = *label_col < 0 ? static_cast<int>(width) + *label_col : *label_col;
        if (resolved < 0 || resolved >= static_cast<int>(width)) {
          throw DataError(path + ": label column " + std::to_string(*label_col) + " out of range for " + std::to_string(width) + " columns");
        }
        label_col = resolved;
      }
    } else if (cells.size() != width) {
      throw DataError(path + ": row " + std::to_string(rows) + " (line " + std::to_string(line_no) + ") has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(width));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (label_col && static_cast<int>(j) == *label_col) {
        auto [it, inserted] = label_ids.try_emplace(std::string(cells[j]), static_cast<int>(label_ids.size()));
        labels.push_back(it->second);
        continue;
      }
      const auto v = detail::parse_double(cells[j]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path + ": non-numeric cell '" + std::string(cells[j]) + "' at row " + std::to_string(rows) + ", column " +
                        std::to_string(j));
      }
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path + ": empty file");
  const Index cols = static_cast<Index>(width) - (label_col ? 1 : 0);
  if (cols < 1) throw DataError(path + ": no feature columns");
  ds.x = Eigen::Map<const DenseMatrix>(values.data(), rows, cols);
  if (label_col) ds.labels = std::move(labels);
  return ds;
}

/// Writes `content` next to `path` and renames it into place.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << content;
    if (!out) throw DataError(path + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError(path + ": rename failed: " + ec.message());
  }
}

inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  const int len = std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

inline std::string matrix_to_csv(const DenseMatrix& x, char delimiter = ',') {
  std::string out;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (j) out += delimiter;
      out += format_double(x(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::string& path, const DenseMatrix& x, char delimiter = ',') {
  write_file_atomic(path, matrix_to_csv(x, delimiter));
}

inline void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) out += std::to_string(l) + '\n';
  write_file_atomic(path, out);
}

/// Integer labels, one per line; ids are kept as written.
inline std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<int> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw DataError(path + ": bad label '" + std::string(t) + "' on line " + std::to_string(out.size() + 1));
    out.push_back(v);
  }
  if (out.empty()) throw DataError(path + ": empty file");
  return out;
}

/// IDX image file (magic 0x00000803) plus label file (0x00000801); pixels are
/// flattened row-major and divided by 255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError(images_path + ": cannot open");
  const std::uint32_t magic = detail::read_be32(img, images_path);
  if (magic != 0x00000803u) throw DataError(images_path + ": bad magic number for IDX images");
  const std::uint32_t count = detail::read_be32(img, images_path);
  const std::uint32_t h = detail::read_be32(img, images_path);
  const std::uint32_t w = detail::read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError(labels_path + ": cannot open");
  if (detail::read_be32(lab, labels_path) != 0x00000801u) throw DataError(labels_path + ": bad magic number for IDX labels");
  const std::uint32_t label_count = detail::read_be32(lab, labels_path);
  if (label_count != count) {
    throw DataError("IDX count mismatch: " + std::to_string(count) + " images vs " + std::to_string(label_count) + " labels");
  }

  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> raw(pixels * count);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw DataError(images_path + ": truncated pixel data");
  }
  std::vector<unsigned char> lraw(count);
  if (!lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()))) {
    throw DataError(labels_path + ": truncated label data");
  }
  Dataset ds;
  ds.name = std::filesystem::path(images_path).stem().string();
  ds.x.resize(count, static_cast<Index>(pixels));
  for (std::size_t i = 0; i < raw.size(); ++i) ds.x.data()[i] = static_cast<double>(raw[i]) / 255.0;
  ds.labels = std::vector<int>(lraw.begin(), lraw.end());
  return ds;
}

/// Concatenates datasets row-wise (e.g. MNIST train + test).
inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.d() != b.d()) throw DataError("concat: feature widths differ");
  Dataset out;
  out.name = a.name + "+" + b.name;
  out.x.resize(a.n() + b.n(), a.d());
  out.x << a.x, b.x;
  if (a.labels && b.labels) {
    out.labels = *a.labels;
    out.labels->insert(out.labels->end(), b.labels->begin(), b.labels->end());
  }
  return out;
}

/// Isotropic unit-variance Gaussian blobs. With c <= d the centres sit on
/// scaled coordinate axes so every pair is `separation` apart; otherwise on
/// random directions at the same radius. Labels are i mod c.
inline Dataset make_blobs(Index n, Index d, int c, double separation, SeededRng& rng) {
  if (n < 1 || d < 1 || c < 1 || c > n) throw std::invalid_argument("make_blobs: need n >= c >= 1 and d >= 1");
  if (!(separation > 0.0)) throw std::invalid_argument("make_blobs: separation must be > 0");
  Dataset ds;
  ds.name = "blobs";
  const double radius = separation / std::numbers::sqrt2;
  ds.centers = DenseMatrix::Zero(c, d);
  for (int j = 0; j < c; ++j) {
    if (c <= d) {
      ds.centers(j, j) = radius;
    } else {
      for (Index t = 0; t < d; ++t) ds.centers(j, t) = rng.normal();
      ds.centers.row(j) *= radius / ds.centers.row(j).norm();
    }
  }
  ds.x.resize(n, d);
  std::vector<int> labels(n);
  for (Index i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % c);
    for (Index t = 0; t < d; ++t) ds.x(i, t) = ds.centers(labels[i], t) + rng.normal();
  }
  ds.labels = std::move(labels);
  return ds;
}

/// Two interleaved half circles with Gaussian noise; first half label 0.
inline Dataset make_two_moons(Index n, double noise, SeededRng& rng) {
  if (n < 2) throw std::invalid_argument("make_two_moons: need n >= 2");
  if (noise < 0.0) throw std::invalid_argument("make_two_moons: noise must be >= 0");
  Dataset ds;
  ds.name = "moons";
  const Index outer = n / 2;
  const Index inner = n - outer;
  ds.x.resize(n, 2);
  std::vector<int> labels(n);
  for (Index i = 0; i < n; ++i) {
    const bool is_outer = i < outer;
    const Index local = is_outer ? i : i - outer;
    const Index count = is_outer ? outer : inner;
    const double t = count > 1 ? std::numbers::pi * static_cast<double>(local) / static_cast<double>(count - 1) : 0.0;
    if (is_outer) {
      ds.x(i, 0) = std::cos(t);
      ds.x(i, 1) = std::sin(t);
    } else {
      ds.x(i, 0) = 1.0 - std::cos(t);
      ds.x(i, 1) = 0.5 - std::sin(t);
    }
    ds.x(i, 0) += noise * rng.normal();
    ds.x(i, 1) += noise * rng.normal();
    labels[i] = is_outer ? 0 : 1;
  }
  ds.labels = std::move(labels);
  return ds;
}

/// Maps each column affinely onto [0, 1]; constant columns become 0.
inline DenseMatrix minmax_scale(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double lo = x.col(j).minCoeff();
    const double hi = x.col(j).maxCoeff();
    if (hi > lo) {
      out.col(j) = ((x.col(j).array() - lo) / (hi - lo)).matrix();
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

}  // namespace anchorgae
