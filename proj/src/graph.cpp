#include "cdsr/graph.hpp"

#include <algorithm>
#include <fstream>

namespace cdsr {

SparseRowMatrix SparseRowMatrix::from_edges(
    int rows, int cols, const std::vector<std::pair<int, int>>& edges) {
  SparseRowMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.entries.assign(static_cast<std::size_t>(rows), {});
  for (const auto& [i, j] : edges) {
    check(i >= 0 && i < rows && j >= 0 && j < cols,
          "edge (" + std::to_string(i) + "," + std::to_string(j) +
              ") out of bounds for " + std::to_string(rows) + "x" +
              std::to_string(cols) + " adjacency");
    m.entries[static_cast<std::size_t>(i)].emplace_back(j, 1.0);
  }
  for (auto& row : m.entries) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              row.end());
  }
  return m;
}

Mat SparseRowMatrix::multiply(const Mat& x) const {
  check(x.rows() == cols, "sparse matmul shape mismatch: " + std::to_string(cols) +
                              " vs " + std::to_string(x.rows()));
  Mat out = Mat::Zero(rows, x.cols());
  for (int i = 0; i < rows; ++i) {
    for (const auto& [j, w] : entries[static_cast<std::size_t>(i)]) {
      out.row(i).noalias() += w * x.row(j);
    }
  }
  return out;
}

SparseRowMatrix SparseRowMatrix::transposed() const {
  SparseRowMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.entries.assign(static_cast<std::size_t>(cols), {});
  for (int i = 0; i < rows; ++i) {
    for (const auto& [j, w] : entries[static_cast<std::size_t>(i)]) {
      t.entries[static_cast<std::size_t>(j)].emplace_back(i, w);
    }
  }
  for (auto& row : t.entries) std::sort(row.begin(), row.end());
  return t;
}

Mat SparseRowMatrix::dense() const {
  Mat d = Mat::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (const auto& [j, w] : entries[static_cast<std::size_t>(i)]) d(i, j) = w;
  }
  return d;
}

std::size_t SparseRowMatrix::edge_count() const {
  std::size_t n = 0;
  for (const auto& row : entries) n += row.size();
  return n;
}

SparseRowMatrix row_normalize(const SparseRowMatrix& binary_adj) {
  SparseRowMatrix out = binary_adj;
  for (auto& row : out.entries) {
    if (row.empty()) continue;
    const double w = 1.0 / static_cast<double>(row.size());
    for (auto& e : row) e.second = w;
  }
  return out;
}

std::vector<Mat> propagate(const SparseRowMatrix& a_norm, const Mat& e, int layers) {
  check(layers >= 0, "propagation depth must be >= 0");
  check(a_norm.rows == a_norm.cols, "adjacency must be square");
  check(a_norm.cols == e.rows(), "adjacency/table shape mismatch: " +
                                     std::to_string(a_norm.cols) + " vs " +
                                     std::to_string(e.rows()));
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(layers) + 1);
  out.push_back(e);
  for (int l = 0; l < layers; ++l) {
    out.push_back(a_norm.multiply(out.back()));
  }
  return out;
}

Mat aggregate_layers(const std::vector<Mat>& layers, const Mat& e) {
  check(!layers.empty(), "aggregate_layers: empty layer list");
  Mat mean = layers[0];
  for (std::size_t l = 1; l < layers.size(); ++l) mean += layers[l];
  mean /= static_cast<double>(layers.size());
  return mean + e;
}

void dump_layers(const std::vector<Mat>& layers, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot open layer dump file: " + path);
  f.precision(17);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    f << "layer " << l << " " << layers[l].rows() << " " << layers[l].cols() << "\n";
    for (Eigen::Index r = 0; r < layers[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < layers[l].cols(); ++c) {
        f << layers[l](r, c) << (c + 1 == layers[l].cols() ? '\n' : ' ');
      }
    }
  }
}

}  // namespace cdsr
