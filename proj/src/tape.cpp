#include "cdsr/tape.hpp"

#include <cmath>

namespace cdsr::ad {

int Tape::push(Mat value, bool requires_grad, std::function<void(Tape&)> pull) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::gbuf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

const Mat& Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  check(n.grad.size() != 0, "grad requested for a node backward never reached");
  return n.grad;
}

int Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

int Tape::add(int a, int b) {
  const Mat& va = val(a);
  const Mat& vb = val(b);
  check(va.rows() == vb.rows() && va.cols() == vb.cols(), "add shape mismatch");
  const int out = static_cast<int>(nodes_.size());
  return push(va + vb, rg(a) || rg(b), [out, a, b](Tape& t) {
    const Mat& g = t.grad(out);
    if (t.rg(a)) t.gbuf(a) += g;
    if (t.rg(b)) t.gbuf(b) += g;
  });
}

int Tape::scale(int a, double c) {
  const int out = static_cast<int>(nodes_.size());
  return push(val(a) * c, rg(a), [out, a, c](Tape& t) {
    if (t.rg(a)) t.gbuf(a) += c * t.grad(out);
  });
}

int Tape::weighted_sum(const std::vector<std::pair<double, int>>& terms) {
  double v = 0.0;
  bool needs = false;
  for (const auto& [c, id] : terms) {
    check(val(id).rows() == 1 && val(id).cols() == 1, "weighted_sum expects scalars");
    v += c * val(id)(0, 0);
    needs = needs || rg(id);
  }
  Mat value(1, 1);
  value(0, 0) = v;
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(value), needs, [out, terms](Tape& t) {
    const double g = t.grad(out)(0, 0);
    for (const auto& [c, id] : terms) {
      if (t.rg(id)) t.gbuf(id)(0, 0) += c * g;
    }
  });
}

int Tape::matmul(int a, int b) {
  const Mat& va = val(a);
  const Mat& vb = val(b);
  check(va.cols() == vb.rows(), "matmul shape mismatch");
  const int out = static_cast<int>(nodes_.size());
  return push(va * vb, rg(a) || rg(b), [out, a, b](Tape& t) {
    const Mat& g = t.grad(out);
    if (t.rg(a)) t.gbuf(a).noalias() += g * t.val(b).transpose();
    if (t.rg(b)) t.gbuf(b).noalias() += t.val(a).transpose() * g;
  });
}

int Tape::matmul_nt(int a, int b) {
  const Mat& va = val(a);
  const Mat& vb = val(b);
  check(va.cols() == vb.cols(), "matmul_nt shape mismatch");
  const int out = static_cast<int>(nodes_.size());
  return push(va * vb.transpose(), rg(a) || rg(b), [out, a, b](Tape& t) {
    const Mat& g = t.grad(out);
    if (t.rg(a)) t.gbuf(a).noalias() += g * t.val(b);
    if (t.rg(b)) t.gbuf(b).noalias() += g.transpose() * t.val(a);
  });
}

int Tape::add_row_bias(int x, int bias) {
  const Mat& vx = val(x);
  const Mat& vb = val(bias);
  check(vb.rows() == 1 && vb.cols() == vx.cols(), "bias must be 1 x cols");
  Mat value = vx;
  value.rowwise() += vb.row(0);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(value), rg(x) || rg(bias), [out, x, bias](Tape& t) {
    const Mat& g = t.grad(out);
    if (t.rg(x)) t.gbuf(x) += g;
    if (t.rg(bias)) t.gbuf(bias) += g.colwise().sum();
  });
}

int Tape::gather_rows(int table, std::vector<int> rows) {
  const Mat& vt = val(table);
  Mat value(static_cast<Eigen::Index>(rows.size()), vt.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    check(rows[r] >= 0 && rows[r] < vt.rows(),
          "gather_rows: index " + std::to_string(rows[r]) + " out of range");
    value.row(static_cast<Eigen::Index>(r)) = vt.row(rows[r]);
  }
  const int out = static_cast<int>(nodes_.size());
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  return push(std::move(value), rg(table), [out, table, idx](Tape& t) {
    if (!t.rg(table)) return;
    const Mat& g = t.grad(out);
    Mat& gt = t.gbuf(table);
    for (std::size_t r = 0; r < idx->size(); ++r) {
      gt.row((*idx)[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

int Tape::sparse_matmul(const SparseRowMatrix* fwd, const SparseRowMatrix* bwd, int x) {
  check(fwd != nullptr && bwd != nullptr, "sparse_matmul: null matrix");
  const int out = static_cast<int>(nodes_.size());
  return push(fwd->multiply(val(x)), rg(x), [out, bwd, x](Tape& t) {
    if (t.rg(x)) t.gbuf(x) += bwd->multiply(t.grad(out));
  });
}

int Tape::relu(int x) {
  const int out = static_cast<int>(nodes_.size());
  return push(val(x).cwiseMax(0.0), rg(x), [out, x](Tape& t) {
    if (!t.rg(x)) return;
    // subgradient 0 at the kink; mask recovered from the output value
    t.gbuf(x).array() +=
        t.grad(out).array() * (t.val(out).array() > 0.0).cast<double>();
  });
}

int Tape::layer_norm(int x, int gain, int bias, double eps) {
  const Mat& vx = val(x);
  const Eigen::Index d = vx.cols();
  check(val(gain).rows() == 1 && val(gain).cols() == d, "layer_norm gain shape");
  check(val(bias).rows() == 1 && val(bias).cols() == d, "layer_norm bias shape");
  auto xhat = std::make_shared<Mat>(vx.rows(), d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(vx.rows());
  for (Eigen::Index r = 0; r < vx.rows(); ++r) {
    const double mean = vx.row(r).mean();
    const double var = (vx.row(r).array() - mean).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (vx.row(r).array() - mean) * (*inv_std)(r);
  }
  Mat value = *xhat;
  value.array().rowwise() *= val(gain).row(0).array();
  value.rowwise() += val(bias).row(0);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(value), rg(x) || rg(gain) || rg(bias),
              [out, x, gain, bias, xhat, inv_std](Tape& t) {
                const Mat& g = t.grad(out);
                if (t.rg(gain)) {
                  t.gbuf(gain) += g.cwiseProduct(*xhat).colwise().sum();
                }
                if (t.rg(bias)) t.gbuf(bias) += g.colwise().sum();
                if (!t.rg(x)) return;
                const Eigen::Index d = g.cols();
                Mat dxhat = g;
                dxhat.array().rowwise() *= t.val(gain).row(0).array();
                Mat& gx = t.gbuf(x);
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                  const double sum_d = dxhat.row(r).sum();
                  const double sum_dx = dxhat.row(r).dot(xhat->row(r));
                  gx.row(r).array() +=
                      ((*inv_std)(r) / static_cast<double>(d)) *
                      (static_cast<double>(d) * dxhat.row(r).array() - sum_d -
                       xhat->row(r).array() * sum_dx);
                }
              });
}

int Tape::causal_softmax(int scores) {
  const Mat& vs = val(scores);
  check(vs.rows() == vs.cols(), "causal_softmax expects square scores");
  Mat p = Mat::Zero(vs.rows(), vs.cols());
  for (Eigen::Index t = 0; t < vs.rows(); ++t) {
    const auto s = vs.row(t).head(t + 1);
    const double m = s.maxCoeff();
    Eigen::RowVectorXd e = (s.array() - m).exp();
    p.row(t).head(t + 1) = e / e.sum();
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(p), rg(scores), [out, scores](Tape& t) {
    if (!t.rg(scores)) return;
    const Mat& g = t.grad(out);
    const Mat& p = t.val(out);
    Mat& gs = t.gbuf(scores);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const auto pr = p.row(r).head(r + 1);
      const auto gr = g.row(r).head(r + 1);
      const double dot = gr.dot(pr);
      gs.row(r).head(r + 1).array() += pr.array() * (gr.array() - dot);
    }
  });
}

int Tape::dropout(int x, double rate, std::mt19937_64& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  check(rate < 1.0, "dropout rate must be < 1");
  const Mat& vx = val(x);
  auto mask = std::make_shared<Mat>(vx.rows(), vx.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < vx.rows(); ++r) {
    for (Eigen::Index c = 0; c < vx.cols(); ++c) {
      (*mask)(r, c) = u(rng) < rate ? 0.0 : keep_scale;
    }
  }
  const int out = static_cast<int>(nodes_.size());
  return push(vx.cwiseProduct(*mask), rg(x), [out, x, mask](Tape& t) {
    if (t.rg(x)) t.gbuf(x) += t.grad(out).cwiseProduct(*mask);
  });
}

int Tape::mean_rows(int x) {
  const Mat& vx = val(x);
  const double n = static_cast<double>(vx.rows());
  const int out = static_cast<int>(nodes_.size());
  return push(vx.colwise().mean(), rg(x), [out, x, n](Tape& t) {
    if (!t.rg(x)) return;
    const Mat& g = t.grad(out);
    t.gbuf(x).rowwise() += (g.row(0) / n).eval();
  });
}

int Tape::mean_rows_at(int x, std::vector<int> rows) {
  check(!rows.empty(), "mean_rows_at: empty row set");
  const Mat& vx = val(x);
  Mat value = Mat::Zero(1, vx.cols());
  for (int r : rows) {
    check(r >= 0 && r < vx.rows(), "mean_rows_at: row out of range");
    value.row(0) += vx.row(r);
  }
  const double n = static_cast<double>(rows.size());
  value /= n;
  const int out = static_cast<int>(nodes_.size());
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  return push(std::move(value), rg(x), [out, x, idx, n](Tape& t) {
    if (!t.rg(x)) return;
    const Eigen::RowVectorXd g = t.grad(out).row(0) / n;
    Mat& gx = t.gbuf(x);
    for (int r : *idx) gx.row(r) += g;
  });
}

int Tape::cross_entropy_sum(int logits, std::vector<int> targets) {
  const Mat& vl = val(logits);
  check(static_cast<Eigen::Index>(targets.size()) == vl.rows(),
        "cross_entropy_sum: one target per row required");
  auto probs = std::make_shared<Mat>(Mat::Zero(vl.rows(), vl.cols()));
  auto live = std::make_shared<std::vector<char>>(targets.size(), 0);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < vl.rows(); ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0) continue;
    check(tgt < vl.cols(), "cross_entropy_sum: target out of vocabulary");
    const double m = vl.row(r).maxCoeff();
    Eigen::RowVectorXd e = (vl.row(r).array() - m).exp();
    probs->row(r) = e / e.sum();
    const double p = (*probs)(r, tgt);
    // gradient is zero in the clamped regime
    (*live)[static_cast<std::size_t>(r)] = (p > kProbFloor && p < kProbCeil) ? 1 : 0;
    loss -= std::log(std::min(std::max(p, kProbFloor), kProbCeil));
  }
  Mat value(1, 1);
  value(0, 0) = loss;
  const int out = static_cast<int>(nodes_.size());
  auto tgts = std::make_shared<std::vector<int>>(std::move(targets));
  return push(std::move(value), rg(logits),
              [out, logits, probs, tgts, live](Tape& t) {
                if (!t.rg(logits)) return;
                const double g = t.grad(out)(0, 0);
                Mat& gl = t.gbuf(logits);
                for (Eigen::Index r = 0; r < gl.rows(); ++r) {
                  const int tgt = (*tgts)[static_cast<std::size_t>(r)];
                  if (tgt < 0 || !(*live)[static_cast<std::size_t>(r)]) continue;
                  gl.row(r) += g * probs->row(r);
                  gl(r, tgt) -= g;
                }
              });
}

int Tape::bce_pair(int pos_score, int neg_score) {
  check(val(pos_score).size() == 1 && val(neg_score).size() == 1,
        "bce_pair expects scalar scores");
  auto sig = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
  const double dp = sig(val(pos_score)(0, 0));
  const double dn = sig(val(neg_score)(0, 0));
  const bool live_p = dp > kProbFloor && dp < kProbCeil;
  const bool live_n = dn > kProbFloor && dn < kProbCeil;
  const double cp = std::min(std::max(dp, kProbFloor), kProbCeil);
  const double cn = std::min(std::max(dn, kProbFloor), kProbCeil);
  Mat value(1, 1);
  value(0, 0) = -std::log(cp) - std::log(1.0 - cn);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(value), rg(pos_score) || rg(neg_score),
              [out, pos_score, neg_score, dp, dn, live_p, live_n](Tape& t) {
                const double g = t.grad(out)(0, 0);
                if (t.rg(pos_score) && live_p) {
                  t.gbuf(pos_score)(0, 0) += g * (dp - 1.0);
                }
                if (t.rg(neg_score) && live_n) {
                  t.gbuf(neg_score)(0, 0) += g * dn;
                }
              });
}

void Tape::backward(int root) {
  check(val(root).rows() == 1 && val(root).cols() == 1, "backward root must be scalar");
  check(rg(root), "backward root does not require grad");
  gbuf(root)(0, 0) = 1.0;
  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this);
  }
}

}  // namespace cdsr::ad
