#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cdsr/common.hpp"

namespace cdsr {

// Row-compressed sparse matrix. Rows hold (col, weight) pairs sorted by
// column. Dense enough corpora could use Mat directly; the propagation
// contract below is representation-agnostic.
struct SparseRowMatrix {
  int rows{0};
  int cols{0};
  std::vector<std::vector<std::pair<int, double>>> entries;

  // Builds a binary matrix from an edge list; duplicate edges collapse to 1.
  static SparseRowMatrix from_edges(int rows, int cols,
                                    const std::vector<std::pair<int, int>>& edges);

  Mat multiply(const Mat& x) const;  // (*this) * x
  SparseRowMatrix transposed() const;
  Mat dense() const;
  int out_degree(int row) const { return static_cast<int>(entries[row].size()); }
  std::size_t edge_count() const;
};

// Each row with out-degree k > 0 gets weight 1/k at its edge positions;
// zero-out-degree rows stay all-zero.
SparseRowMatrix row_normalize(const SparseRowMatrix& binary_adj);

// Weight-free propagation: {G_0 = e, G_1, ..., G_L} with G_{l+1} = a_norm * G_l.
// layers == 0 returns {e} only.
std::vector<Mat> propagate(const SparseRowMatrix& a_norm, const Mat& e, int layers);

// Mean over all layer outputs plus the input table as residual.
// Callers that configure zero layers must bypass this and use e directly.
Mat aggregate_layers(const std::vector<Mat>& layers, const Mat& e);

// Per-layer history dump, for offline inspection of the propagation.
void dump_layers(const std::vector<Mat>& layers, const std::string& path);

}  // namespace cdsr
