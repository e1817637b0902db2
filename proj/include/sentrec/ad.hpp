#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sentrec::ad {

// Dense row-major matrix of doubles. Vectors are 1 x n; scalars 1 x 1.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row_ptr(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return a.size(); }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// Reverse-mode tape over Mats. Build a graph forward, then call backward()
// on a scalar node; leaf gradients are accumulated (+=) into caller-owned
// sinks, so one tape per example composes into batched gradients.
//
// All arithmetic is double precision and sequential within an op, which keeps
// results bit-identical regardless of how many tapes run concurrently.
class Tape {
 public:
  using Id = int;

  // Constant value; no gradient flows into it.
  Id constant(Mat value);

  // Parameter leaf: `value` is read through the pointer (no copy) and the
  // node's gradient is added into `grad_sink` during backward. Pass a null
  // sink to treat the value as frozen.
  Id leaf(const Mat* value, Mat* grad_sink);

  // Row gather from an embedding table. Gradients scatter-add into the rows
  // of `grad_sink`; rows untouched by `rows` receive exactly zero.
  Id gather_rows(const Mat* table, Mat* grad_sink, std::vector<int> rows);

  Id matmul(Id a, Id b);     // [m,k]x[k,n]
  Id matmul_nt(Id a, Id b);  // [m,k]x[n,k]^T -> [m,n]
  Id add(Id a, Id b);        // same shape
  Id add_rowvec(Id a, Id row_bias);  // bias (1 x n) broadcast over rows
  Id scale(Id a, double s);
  Id mul_const(Id a, const Mat& mask);  // elementwise; used for dropout
  Id relu(Id a);
  Id slice_rows(Id a, int r0, int count);
  Id slice_cols(Id a, int c0, int count);
  Id concat_rows(const std::vector<Id>& parts);
  Id concat_cols(const std::vector<Id>& parts);

  // Softmax over each row restricted to the allowed prefix/causal pattern:
  // rows/cols of the score matrix correspond to sequence positions; position
  // q attends to k iff both are in the prefix (q,k < prefix_len) or q is in
  // the text and k is in the prefix or at/before q. Disallowed entries are
  // exactly zero in the output.
  Id attention_softmax(Id scores, int prefix_len);

  // Per-row layer norm with learned gain/bias (1 x n each).
  Id layer_norm(Id x, Id gain, Id bias, double eps = 1e-5);

  // Scalar losses (1 x 1 nodes).
  // Mean over rows of -log softmax(logits_row)[target_row].
  Id cross_entropy_rows(Id logits, std::vector<int> targets);
  // Mean over `words` of -log softmax(logits)[w]; logits is 1 x V.
  Id cross_entropy_bag(Id logits, std::vector<int> words);
  Id squared_error(Id scalar, double target);  // (x - target)^2
  // Mean over rows of (col_r - target_r)^2; col is m x 1.
  Id mean_squared_error_col(Id col, std::vector<double> targets);
  // weighted sum of scalar nodes
  Id weighted_sum(const std::vector<std::pair<Id, double>>& terms);

  const Mat& value(Id id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.ext != nullptr ? *n.ext : n.storage;
  }
  double scalar(Id id) const { return value(id).a[0]; }

  // Run the reverse sweep from a scalar node with seed gradient 1.
  void backward(Id loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat storage;               // owned value (computed nodes, constants)
    const Mat* ext = nullptr;  // external value (parameter leaves)
    Mat grad;
    std::function<void(Tape&, Node&)> back;  // empty for constants
    // leaf bookkeeping
    Mat* sink = nullptr;
    std::vector<int> gather;
    Id a = -1, b = -1;
  };

  Id push(Node n);
  Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
};

}  // namespace sentrec::ad
