#include "crest/nn/graph.hpp"

#include <cmath>
#include <utility>

#include "crest/errors.hpp"

namespace crest::nn {

namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

void Graph::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw NumericError("graph: node id out of range");
}

NodeId Graph::emplace(Matrix value, std::function<void(Graph&)> back) {
  Node node;
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::param(Parameter& p) {
  Node node;
  node.parameter = &p;
  node.back = [](Graph& g) {
    Node& self = g.nodes_[static_cast<std::size_t>(g.current_)];
    self.parameter->grad += self.grad;
  };
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Matrix value) { return emplace(std::move(value), nullptr); }

const Matrix& Graph::value(NodeId id) const {
  check(id);
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  return node.parameter ? node.parameter->value : node.value;
}

const Matrix& Graph::grad(NodeId id) const {
  check(id);
  return nodes_[static_cast<std::size_t>(id)].grad;
}

Matrix& Graph::grad_ref(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

NodeId Graph::add(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw NumericError("graph add: shape mismatch");
  return emplace(va + vb, [a, b](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    g.grad_ref(a) += go;
    g.grad_ref(b) += go;
  });
}

NodeId Graph::add_rowwise(NodeId m, NodeId row) {
  const Matrix& vm = value(m);
  const Matrix& vr = value(row);
  if (vr.rows() != 1 || vr.cols() != vm.cols())
    throw NumericError("graph add_rowwise: row must be 1 x cols of m");
  Matrix out = vm;
  out.rowwise() += vr.row(0);
  return emplace(std::move(out), [m, row](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    g.grad_ref(m) += go;
    g.grad_ref(row).row(0) += go.colwise().sum();
  });
}

NodeId Graph::scale(NodeId a, double factor) {
  return emplace(value(a) * factor,
                 [a, factor](Graph& g) { g.grad_ref(a) += factor * g.grad(g.current_); });
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.rows()) throw NumericError("graph matmul: inner dims disagree");
  return emplace(va * vb, [a, b](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    g.grad_ref(a) += go * g.value(b).transpose();
    g.grad_ref(b) += g.value(a).transpose() * go;
  });
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.cols()) throw NumericError("graph matmul_nt: trailing dims disagree");
  return emplace(va * vb.transpose(), [a, b](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    g.grad_ref(a) += go * g.value(b);
    g.grad_ref(b) += go.transpose() * g.value(a);
  });
}

NodeId Graph::rows(NodeId a, std::vector<Eigen::Index> indices) {
  const Matrix& va = value(a);
  Matrix out(static_cast<Eigen::Index>(indices.size()), va.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= va.rows())
      throw NumericError("graph rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = va.row(indices[i]);
  }
  return emplace(std::move(out), [a, idx = std::move(indices)](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    Matrix& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < idx.size(); ++i)
      ga.row(idx[i]) += go.row(static_cast<Eigen::Index>(i));
  });
}

NodeId Graph::row(NodeId a, Eigen::Index index) { return rows(a, {index}); }

NodeId Graph::slice_cols(NodeId a, Eigen::Index start, Eigen::Index count) {
  const Matrix& va = value(a);
  if (start < 0 || count < 0 || start + count > va.cols())
    throw NumericError("graph slice_cols: range out of bounds");
  return emplace(va.middleCols(start, count), [a, start, count](Graph& g) {
    g.grad_ref(a).middleCols(start, count) += g.grad(g.current_);
  });
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw NumericError("graph concat_cols: no parts");
  const Eigen::Index nrows = value(parts[0]).rows();
  Eigen::Index total = 0;
  for (NodeId p : parts) {
    if (value(p).rows() != nrows) throw NumericError("graph concat_cols: row counts disagree");
    total += value(p).cols();
  }
  Matrix out(nrows, total);
  Eigen::Index offset = 0;
  for (NodeId p : parts) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  return emplace(std::move(out), [parts](Graph& g) {
    const Matrix& go = g.grad(g.current_);
    Eigen::Index offset = 0;
    for (NodeId p : parts) {
      const Eigen::Index cols = g.value(p).cols();
      g.grad_ref(p) += go.middleCols(offset, cols);
      offset += cols;
    }
  });
}

NodeId Graph::softmax_rows(NodeId a) {
  const Matrix& va = value(a);
  Matrix out(va.rows(), va.cols());
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    const double peak = va.row(i).maxCoeff();
    out.row(i) = (va.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return emplace(std::move(out), [a](Graph& g) {
    const Matrix& s = g.value(g.current_);
    const Matrix& go = g.grad(g.current_);
    Matrix& ga = g.grad_ref(a);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double inner = go.row(i).dot(s.row(i));
      ga.row(i) += (s.row(i).array() * (go.row(i).array() - inner)).matrix();
    }
  });
}

NodeId Graph::layer_norm(NodeId a, NodeId gain, NodeId bias, double eps) {
  const Matrix& va = value(a);
  const Matrix& vgain = value(gain);
  const Matrix& vbias = value(bias);
  if (vgain.rows() != 1 || vbias.rows() != 1 || vgain.cols() != va.cols() ||
      vbias.cols() != va.cols())
    throw NumericError("graph layer_norm: gain/bias must be 1 x cols");
  const double n = static_cast<double>(va.cols());
  Matrix xhat(va.rows(), va.cols());
  Eigen::VectorXd inv_std(va.rows());
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    const double mean = va.row(i).mean();
    const double var = (va.row(i).array() - mean).square().sum() / n;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = ((va.row(i).array() - mean) * inv_std(i)).matrix();
  }
  Matrix out(va.rows(), va.cols());
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    out.row(i) =
        ((xhat.row(i).array() * vgain.row(0).array()) + vbias.row(0).array()).matrix();
  return emplace(
      std::move(out),
      [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g) {
        const Matrix& go = g.grad(g.current_);
        const Matrix& vgain = g.value(gain);
        Matrix& ga = g.grad_ref(a);
        Matrix& ggain = g.grad_ref(gain);
        Matrix& gbias = g.grad_ref(bias);
        const double n = static_cast<double>(go.cols());
        for (Eigen::Index i = 0; i < go.rows(); ++i) {
          ggain.row(0) += (go.row(i).array() * xhat.row(i).array()).matrix();
          gbias.row(0) += go.row(i);
          const Eigen::ArrayXXd gxh = go.row(i).array() * vgain.row(0).array();
          const double mean_g = gxh.sum() / n;
          const double mean_gx = (gxh * xhat.row(i).array()).sum() / n;
          ga.row(i) +=
              (inv_std(i) * (gxh - mean_g - xhat.row(i).array() * mean_gx)).matrix();
        }
      });
}

NodeId Graph::gelu(NodeId a) {
  Matrix out = value(a).unaryExpr([](double x) {
    const double u = kGeluScale * (x + kGeluCubic * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
  });
  return emplace(std::move(out), [a](Graph& g) {
    const Matrix& x = g.value(a);
    const Matrix& go = g.grad(g.current_);
    Matrix& ga = g.grad_ref(a);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double v = x(i, j);
        const double u = kGeluScale * (v + kGeluCubic * v * v * v);
        const double t = std::tanh(u);
        const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
        ga(i, j) += go(i, j) * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
      }
    }
  });
}

NodeId Graph::cross_entropy(NodeId logits, int gold) {
  const Matrix& vl = value(logits);
  if (vl.rows() != 1) throw NumericError("graph cross_entropy: logits must be a row vector");
  if (gold < 0 || gold >= vl.cols()) throw NumericError("graph cross_entropy: label out of range");
  const double peak = vl.row(0).maxCoeff();
  Eigen::RowVectorXd probs = (vl.row(0).array() - peak).exp().matrix();
  const double denom = probs.sum();
  probs /= denom;
  Matrix out(1, 1);
  out(0, 0) = std::log(denom) + peak - vl(0, gold);
  return emplace(std::move(out), [logits, gold, probs = std::move(probs)](Graph& g) {
    const double go = g.grad(g.current_)(0, 0);
    Matrix& gl = g.grad_ref(logits);
    gl.row(0) += go * probs;
    gl(0, gold) -= go;
  });
}

void Graph::backward(NodeId root) {
  check(root);
  if (value(root).rows() != 1 || value(root).cols() != 1)
    throw NumericError("graph backward: root must be 1 x 1");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Matrix& v = value(static_cast<NodeId>(i));
    nodes_[i].grad = Matrix::Zero(v.rows(), v.cols());
  }
  nodes_[static_cast<std::size_t>(root)].grad(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!nodes_[i].back) continue;
    current_ = static_cast<NodeId>(i);
    nodes_[i].back(*this);
  }
}

}  // namespace crest::nn
