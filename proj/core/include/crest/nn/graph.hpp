#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace crest::nn {

using Matrix = Eigen::MatrixXd;

// A named, trainable dense matrix. Parameters live outside any Graph so they
// survive across forward passes; Graph::param() wires one into the current
// tape and backward() accumulates into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name_, Matrix value_) : name(std::move(name_)), value(std::move(value_)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

using NodeId = std::int32_t;

// Reverse-mode tape over dense double matrices. One Graph is built per
// forward pass; backward(root) runs the recorded closures in reverse order
// and accumulates parameter gradients into the external Parameter objects.
//
// All shapes are plain 2-D matrices; row vectors (1 x h) stand in for
// single embeddings. Ops validate shapes eagerly and throw NumericError on
// mismatch so a wiring bug fails at construction, not inside backward.
class Graph {
 public:
  // Trainable leaf backed by external storage (no copy of the value).
  NodeId param(Parameter& p);
  // Non-trainable leaf (embedding inputs, masks, constants).
  NodeId input(Matrix value);

  const Matrix& value(NodeId id) const;
  const Matrix& grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // y = a + b (same shape)
  NodeId add(NodeId a, NodeId b);
  // y = m with `row` (1 x cols) added to every row
  NodeId add_rowwise(NodeId m, NodeId row);
  // y = factor * a
  NodeId scale(NodeId a, double factor);
  // y = a * b
  NodeId matmul(NodeId a, NodeId b);
  // y = a * b^T
  NodeId matmul_nt(NodeId a, NodeId b);
  // y = a(indices, :) — gather rows; duplicate indices accumulate gradient
  NodeId rows(NodeId a, std::vector<Eigen::Index> indices);
  // y = a(index, :) as a 1 x cols row vector
  NodeId row(NodeId a, Eigen::Index index);
  // y = a(:, start .. start+count-1)
  NodeId slice_cols(NodeId a, Eigen::Index start, Eigen::Index count);
  // y = [p0 | p1 | ...] — column-wise concatenation, equal row counts
  NodeId concat_cols(const std::vector<NodeId>& parts);
  // y_ij = exp(a_ij) / sum_k exp(a_ik), numerically shifted per row
  NodeId softmax_rows(NodeId a);
  // Per-row layer normalization with elementwise gain/bias (1 x cols each).
  NodeId layer_norm(NodeId a, NodeId gain, NodeId bias, double eps = 1e-5);
  // Tanh-approximation GELU, applied elementwise.
  NodeId gelu(NodeId a);
  // logits: 1 x d row vector; returns 1 x 1 loss = -log softmax(logits)[gold]
  NodeId cross_entropy(NodeId logits, int gold);

  // Seeds d(root)/d(root) = 1 (root must be 1 x 1) and sweeps the tape in
  // reverse, accumulating into Parameter::grad for every param leaf.
  void backward(NodeId root);

 private:
  struct Node {
    Matrix value;               // owned value (unused for param leaves)
    Matrix grad;                // allocated lazily by backward()
    Parameter* parameter = nullptr;  // set for param leaves
    std::function<void(Graph&)> back;  // accumulates into input grads
  };

  NodeId emplace(Matrix value, std::function<void(Graph&)> back);
  Matrix& grad_ref(NodeId id);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  NodeId current_ = -1;  // node whose back() is running, set by backward()
};

}  // namespace crest::nn
