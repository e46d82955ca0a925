#include "edd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edd/special.hpp"

namespace edd {

namespace {

std::string shape_str(const matrix_t& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Same shape, scalar, row vector of matching width or column of matching height.
bool broadcastable(const matrix_t& m, Eigen::Index rows, Eigen::Index cols) {
  return (m.rows() == rows && m.cols() == cols) || m.size() == 1 ||
         (m.rows() == 1 && m.cols() == cols) || (m.cols() == 1 && m.rows() == rows);
}

matrix_t expand(const matrix_t& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return matrix_t::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

// Sums a broadcast adjoint back down to the operand's shape.
matrix_t reduce_to(const matrix_t& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return matrix_t::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

vector_t row_logsumexp(const matrix_t& x) {
  const vector_t mx = x.rowwise().maxCoeff();
  const vector_t s = (x.colwise() - mx).array().exp().rowwise().sum().matrix();
  return mx.array() + s.array().log();
}

}  // namespace

void ParameterSet::add(std::string name, matrix_t value) {
  if (contains(name)) throw InputError("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

matrix_t& ParameterSet::at(const std::string& name) {
  for (auto& [n, v] : entries_)
    if (n == name) return v;
  throw InputError("unknown parameter '" + name + "'");
}

const matrix_t& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw InputError("unknown parameter '" + name + "'");
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [n, v] : entries_) out.add(n, matrix_t::Zero(v.rows(), v.cols()));
  return out;
}

Eigen::Index ParameterSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& [name, v] : entries_) n += v.size();
  return n;
}

NodeId Graph::push(Node node) {
  for (std::size_t a : node.args)
    if (a >= nodes_.size()) throw Error("graph: argument refers to a later node");
  nodes_.push_back(std::move(node));
  forwarded_ = false;
  return NodeId{nodes_.size() - 1};
}

void Graph::check(NodeId id) const {
  if (id.index >= nodes_.size()) throw Error("graph: invalid node id");
}

NodeId Graph::unary(Op op, NodeId a) {
  check(a);
  return push(Node{op, {a.index}});
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
  check(a);
  check(b);
  return push(Node{op, {a.index, b.index}});
}

NodeId Graph::input(std::string name) {
  Node n{Op::input, {}};
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Graph::parameter(std::string name) {
  Node n{Op::parameter, {}};
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Graph::constant(matrix_t value) {
  Node n{Op::constant, {}};
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary(Op::div, a, b); }
NodeId Graph::matmul(NodeId a, NodeId b) { return binary(Op::matmul, a, b); }

NodeId Graph::scale(NodeId a, scalar_t factor) {
  check(a);
  Node n{Op::scale, {a.index}};
  n.attr = factor;
  return push(std::move(n));
}

NodeId Graph::shift(NodeId a, scalar_t offset) {
  check(a);
  Node n{Op::shift, {a.index}};
  n.attr = offset;
  return push(std::move(n));
}

NodeId Graph::exp(NodeId a) { return unary(Op::exp, a); }
NodeId Graph::log(NodeId a) { return unary(Op::log, a); }
NodeId Graph::tanh(NodeId a) { return unary(Op::tanh, a); }
NodeId Graph::relu(NodeId a) { return unary(Op::relu, a); }
NodeId Graph::softplus(NodeId a) { return unary(Op::softplus, a); }
NodeId Graph::sigmoid(NodeId a) { return unary(Op::sigmoid, a); }
NodeId Graph::square(NodeId a) { return unary(Op::square, a); }
NodeId Graph::sqrt(NodeId a) { return unary(Op::sqrt, a); }
NodeId Graph::lgamma(NodeId a) { return unary(Op::lgamma, a); }

NodeId Graph::cols(NodeId a, Eigen::Index start, Eigen::Index count) {
  check(a);
  if (start < 0 || count < 1) throw ShapeError("graph: invalid column slice");
  Node n{Op::cols, {a.index}};
  n.start = start;
  n.count = count;
  return push(std::move(n));
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("graph: concat of zero nodes");
  Node n{Op::concat_cols, {}};
  for (NodeId p : parts) {
    check(p);
    n.args.push_back(p.index);
  }
  return push(std::move(n));
}

NodeId Graph::append_zero_col(NodeId a) { return unary(Op::append_zero_col, a); }
NodeId Graph::row_sum(NodeId a) { return unary(Op::row_sum, a); }
NodeId Graph::logsumexp_rows(NodeId a) { return unary(Op::logsumexp_rows, a); }
NodeId Graph::log_softmax_rows(NodeId a) { return unary(Op::log_softmax_rows, a); }
NodeId Graph::sum(NodeId a) { return unary(Op::sum, a); }
NodeId Graph::mean(NodeId a) { return unary(Op::mean, a); }

void Graph::set_output(NodeId id) {
  check(id);
  output_ = id.index;
  has_output_ = true;
}

NodeId Graph::output() const {
  if (nodes_.empty()) throw Error("graph: empty graph has no output");
  return NodeId{has_output_ ? output_ : nodes_.size() - 1};
}

const matrix_t& Graph::value(NodeId id) const {
  check(id);
  if (!forwarded_) throw Error("graph: value requested before forward");
  return nodes_[id.index].value;
}

std::string Graph::describe(std::size_t index) const {
  static constexpr const char* kNames[] = {
      "input", "parameter", "constant", "add",      "sub",          "mul",
      "div",   "matmul",    "scale",    "shift",    "exp",          "log",
      "tanh",  "relu",      "softplus", "sigmoid",  "square",       "sqrt",
      "lgamma", "cols",     "concat_cols", "append_zero_col", "row_sum",
      "logsumexp_rows", "log_softmax_rows", "sum", "mean"};
  const Node& n = nodes_[index];
  std::ostringstream os;
  os << "node " << index << " (" << kNames[static_cast<int>(n.op)];
  if (!n.name.empty()) os << " '" << n.name << "'";
  os << ")";
  return os.str();
}

const matrix_t& Graph::forward(const Bindings& inputs, const ParameterSet& params) {
  if (nodes_.empty()) throw Error("graph: forward on empty graph");
  forwarded_ = false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.op == Op::input) {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) throw Error(describe(i) + ": input not bound");
      n.value = it->second;
    } else if (n.op == Op::parameter) {
      if (!params.contains(n.name)) throw Error(describe(i) + ": parameter not bound");
      n.value = params.at(n.name);
    } else if (n.op != Op::constant) {
      evaluate(i);
    }
  }
  forwarded_ = true;
  return nodes_[output().index].value;
}

void Graph::evaluate(std::size_t index) {
  Node& n = nodes_[index];
  auto arg = [&](std::size_t k) -> const matrix_t& { return nodes_[n.args[k]].value; };

  switch (n.op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const matrix_t& a = arg(0);
      const matrix_t& b = arg(1);
      const Eigen::Index rows = std::max(a.rows(), b.rows());
      const Eigen::Index cols = std::max(a.cols(), b.cols());
      if (!broadcastable(a, rows, cols) || !broadcastable(b, rows, cols))
        throw ShapeError(describe(index) + ": cannot broadcast " + shape_str(a) + " with " +
                         shape_str(b));
      const matrix_t ea = expand(a, rows, cols);
      const matrix_t eb = expand(b, rows, cols);
      if (n.op == Op::add) n.value = ea + eb;
      else if (n.op == Op::sub) n.value = ea - eb;
      else if (n.op == Op::mul) n.value = ea.cwiseProduct(eb);
      else n.value = ea.cwiseQuotient(eb);
      break;
    }
    case Op::matmul:
      if (arg(0).cols() != arg(1).rows())
        throw ShapeError(describe(index) + ": cannot multiply " + shape_str(arg(0)) + " by " +
                         shape_str(arg(1)));
      n.value.noalias() = arg(0) * arg(1);
      break;
    case Op::scale: n.value = arg(0) * n.attr; break;
    case Op::shift: n.value = arg(0).array() + n.attr; break;
    case Op::exp: n.value = arg(0).array().exp(); break;
    case Op::log: n.value = arg(0).array().log(); break;
    case Op::tanh: n.value = arg(0).array().tanh(); break;
    case Op::relu: n.value = arg(0).cwiseMax(0.0); break;
    case Op::softplus: n.value = arg(0).unaryExpr([](scalar_t v) { return edd::softplus(v); }); break;
    case Op::sigmoid: n.value = arg(0).unaryExpr([](scalar_t v) { return edd::sigmoid(v); }); break;
    case Op::square: n.value = arg(0).array().square(); break;
    case Op::sqrt: n.value = arg(0).array().sqrt(); break;
    case Op::lgamma: n.value = arg(0).unaryExpr([](scalar_t v) { return log_gamma(v); }); break;
    case Op::cols:
      if (n.start + n.count > arg(0).cols())
        throw ShapeError(describe(index) + ": column slice out of range for " + shape_str(arg(0)));
      n.value = arg(0).middleCols(n.start, n.count);
      break;
    case Op::concat_cols: {
      Eigen::Index total = 0;
      const Eigen::Index rows = arg(0).rows();
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        if (arg(k).rows() != rows)
          throw ShapeError(describe(index) + ": row mismatch " + shape_str(arg(0)) + " vs " +
                           shape_str(arg(k)));
        total += arg(k).cols();
      }
      n.value.resize(rows, total);
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        n.value.middleCols(at, arg(k).cols()) = arg(k);
        at += arg(k).cols();
      }
      break;
    }
    case Op::append_zero_col:
      n.value.resize(arg(0).rows(), arg(0).cols() + 1);
      n.value.leftCols(arg(0).cols()) = arg(0);
      n.value.rightCols(1).setZero();
      break;
    case Op::row_sum: n.value = arg(0).rowwise().sum(); break;
    case Op::logsumexp_rows:
      if (arg(0).cols() < 1) throw ShapeError(describe(index) + ": no columns");
      n.value = row_logsumexp(arg(0));
      break;
    case Op::log_softmax_rows:
      if (arg(0).cols() < 1) throw ShapeError(describe(index) + ": no columns");
      n.value = arg(0).colwise() - row_logsumexp(arg(0));
      break;
    case Op::sum: n.value = matrix_t::Constant(1, 1, arg(0).sum()); break;
    case Op::mean:
      if (arg(0).size() == 0) throw ShapeError(describe(index) + ": mean of empty array");
      n.value = matrix_t::Constant(1, 1, arg(0).mean());
      break;
    case Op::input:
    case Op::parameter:
    case Op::constant: break;
  }
}

ParameterSet Graph::backward(const ParameterSet& params) {
  return backward(matrix_t::Ones(1, 1), params);
}

ParameterSet Graph::backward(const matrix_t& seed, const ParameterSet& params) {
  if (!forwarded_) throw Error("graph: backward called before forward");
  const std::size_t out = output().index;
  if (seed.rows() != nodes_[out].value.rows() || seed.cols() != nodes_[out].value.cols())
    throw ShapeError("graph: seed shape " + shape_str(seed) + " does not match output " +
                     shape_str(nodes_[out].value));
  for (Node& n : nodes_) n.adjoint.setZero(n.value.rows(), n.value.cols());
  nodes_[out].adjoint = seed;
  for (std::size_t i = out + 1; i-- > 0;) propagate(i);

  ParameterSet grads = params.zeros_like();
  for (Node& n : nodes_) {
    if (n.op == Op::parameter && grads.contains(n.name)) grads.at(n.name) += n.adjoint;
  }
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  return grads;
}

void Graph::propagate(std::size_t index) {
  Node& n = nodes_[index];
  if (n.args.empty()) return;
  const matrix_t& g = n.adjoint;
  auto arg = [&](std::size_t k) -> Node& { return nodes_[n.args[k]]; };

  switch (n.op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      Node& a = arg(0);
      Node& b = arg(1);
      const matrix_t ea = expand(a.value, g.rows(), g.cols());
      const matrix_t eb = expand(b.value, g.rows(), g.cols());
      matrix_t ga, gb;
      if (n.op == Op::add) {
        ga = g;
        gb = g;
      } else if (n.op == Op::sub) {
        ga = g;
        gb = -g;
      } else if (n.op == Op::mul) {
        ga = g.cwiseProduct(eb);
        gb = g.cwiseProduct(ea);
      } else {
        ga = g.cwiseQuotient(eb);
        gb = -(g.cwiseProduct(ea)).cwiseQuotient(eb.cwiseProduct(eb));
      }
      a.adjoint += reduce_to(ga, a.value.rows(), a.value.cols());
      b.adjoint += reduce_to(gb, b.value.rows(), b.value.cols());
      break;
    }
    case Op::matmul:
      arg(0).adjoint.noalias() += g * arg(1).value.transpose();
      arg(1).adjoint.noalias() += arg(0).value.transpose() * g;
      break;
    case Op::scale: arg(0).adjoint += g * n.attr; break;
    case Op::shift: arg(0).adjoint += g; break;
    case Op::exp: arg(0).adjoint += g.cwiseProduct(n.value); break;
    case Op::log: arg(0).adjoint += g.cwiseQuotient(arg(0).value); break;
    case Op::tanh:
      arg(0).adjoint.array() += g.array() * (1.0 - n.value.array().square());
      break;
    case Op::relu:
      arg(0).adjoint.array() += g.array() * (arg(0).value.array() > 0.0).cast<scalar_t>();
      break;
    case Op::softplus:
      arg(0).adjoint +=
          g.cwiseProduct(arg(0).value.unaryExpr([](scalar_t v) { return edd::sigmoid(v); }));
      break;
    case Op::sigmoid:
      arg(0).adjoint.array() += g.array() * n.value.array() * (1.0 - n.value.array());
      break;
    case Op::square: arg(0).adjoint.array() += 2.0 * g.array() * arg(0).value.array(); break;
    case Op::sqrt: arg(0).adjoint.array() += 0.5 * g.array() / n.value.array(); break;
    case Op::lgamma:
      arg(0).adjoint +=
          g.cwiseProduct(arg(0).value.unaryExpr([](scalar_t v) { return digamma(v); }));
      break;
    case Op::cols: arg(0).adjoint.middleCols(n.start, n.count) += g; break;
    case Op::concat_cols: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        Node& a = arg(k);
        a.adjoint += g.middleCols(at, a.value.cols());
        at += a.value.cols();
      }
      break;
    }
    case Op::append_zero_col: arg(0).adjoint += g.leftCols(arg(0).value.cols()); break;
    case Op::row_sum: arg(0).adjoint += g.replicate(1, arg(0).value.cols()); break;
    case Op::logsumexp_rows: {
      const matrix_t soft = (arg(0).value.colwise() - vector_t(n.value.col(0))).array().exp();
      arg(0).adjoint += soft.cwiseProduct(g.replicate(1, soft.cols()));
      break;
    }
    case Op::log_softmax_rows: {
      const matrix_t soft = n.value.array().exp();
      const vector_t gsum = g.rowwise().sum();
      arg(0).adjoint += g - soft.cwiseProduct(gsum.replicate(1, soft.cols()));
      break;
    }
    case Op::sum: arg(0).adjoint.array() += g(0, 0); break;
    case Op::mean:
      arg(0).adjoint.array() += g(0, 0) / static_cast<scalar_t>(arg(0).value.size());
      break;
    case Op::input:
    case Op::parameter:
    case Op::constant: break;
  }
}

}  // namespace edd
