#pragma once

#include <functional>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "cdsr/common.hpp"
#include "cdsr/graph.hpp"

namespace cdsr::ad {

// Reverse-mode tape over dense matrices. Nodes are created eagerly in
// topological order; backward() replays pull closures in reverse creation
// order. Scalars are 1x1 matrices. A tape lives for one forward/backward
// cycle and is then discarded.
class Tape {
 public:
  // Clamp bounds applied to probabilities before any log. Gradients are
  // zero in the clamped regime.
  static constexpr double kProbFloor = 1e-7;
  static constexpr double kProbCeil = 1.0 - 1e-7;

  int leaf(Mat value, bool requires_grad = false);

  int add(int a, int b);
  int scale(int a, double c);
  // Scalar combination: sum of coef * node over 1x1 nodes.
  int weighted_sum(const std::vector<std::pair<double, int>>& terms);
  int matmul(int a, int b);     // A * B
  int matmul_nt(int a, int b);  // A * B^T
  int add_row_bias(int x, int bias);
  int gather_rows(int table, std::vector<int> rows);
  // fwd * X; bwd must be fwd transposed (caller precomputes it once).
  int sparse_matmul(const SparseRowMatrix* fwd, const SparseRowMatrix* bwd, int x);
  int relu(int x);
  int layer_norm(int x, int gain, int bias, double eps = 1e-8);
  // Row t is a softmax over columns 0..t; columns > t are exactly zero.
  int causal_softmax(int scores);
  // Inverted dropout. Identity when !training or rate == 0.
  int dropout(int x, double rate, std::mt19937_64& rng, bool training);
  int mean_rows(int x);                             // 1 x d
  int mean_rows_at(int x, std::vector<int> rows);   // 1 x d over a row subset
  // Sum over rows r with targets[r] >= 0 of -log(clamp(softmax(logits[r])[t])).
  int cross_entropy_sum(int logits, std::vector<int> targets);
  // -log(clamp(sigmoid(pos))) - log(1 - clamp(sigmoid(neg))); scalar inputs.
  int bce_pair(int pos_score, int neg_score);

  void backward(int root);

  const Mat& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Mat& grad(int id) const;
  bool requires_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;  // allocated lazily by gbuf()
    bool requires_grad{false};
    std::function<void(Tape&)> pull;
  };

  int push(Mat value, bool requires_grad, std::function<void(Tape&)> pull);
  Mat& gbuf(int id);
  bool rg(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace cdsr::ad
