#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edd/types.hpp"

namespace edd {

/// Raised on inconsistent operand shapes; the message names the node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Ordered collection of named dense arrays. Used for trainable parameters,
/// their gradients, and optimizer moments.
class ParameterSet {
 public:
  void add(std::string name, matrix_t value);

  bool contains(const std::string& name) const;
  matrix_t& at(const std::string& name);
  const matrix_t& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same names and shapes, every entry zero.
  ParameterSet zeros_like() const;

  /// Total number of scalars.
  Eigen::Index scalar_count() const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::pair<std::string, matrix_t>> entries_;
};

using Bindings = std::map<std::string, matrix_t>;

/// Strong handle to a node in a Graph.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Static computational graph over dense real matrices with reverse-mode
/// differentiation.
///
/// Nodes are appended in construction order and may only reference earlier
/// nodes, so insertion order is a topological order and the graph is acyclic
/// by construction. Input and parameter nodes are placeholders resolved by
/// name on each forward pass; shapes are only checked at that point, so one
/// graph serves any batch size.
///
/// Elementwise binary ops broadcast an operand of shape 1x1, 1xC or Rx1
/// against the other operand.
class Graph {
 public:
  NodeId input(std::string name);
  NodeId parameter(std::string name);
  NodeId constant(matrix_t value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId scale(NodeId a, scalar_t factor);
  NodeId shift(NodeId a, scalar_t offset);

  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId softplus(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId lgamma(NodeId a);

  /// Columns [start, start + count).
  NodeId cols(NodeId a, Eigen::Index start, Eigen::Index count);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  /// Appends a column of zeros (reference-class logit).
  NodeId append_zero_col(NodeId a);

  /// Row sums, N x C -> N x 1.
  NodeId row_sum(NodeId a);
  /// Row-wise log-sum-exp, N x C -> N x 1.
  NodeId logsumexp_rows(NodeId a);
  /// Row-wise log-softmax, N x C -> N x C.
  NodeId log_softmax_rows(NodeId a);
  /// Sum of all entries, -> 1 x 1.
  NodeId sum(NodeId a);
  /// Mean of all entries, -> 1 x 1.
  NodeId mean(NodeId a);

  /// Output node used by forward/backward; defaults to the last node added.
  void set_output(NodeId id);
  NodeId output() const;

  std::size_t size() const { return nodes_.size(); }

  /// Evaluates every node and returns the output value. Intermediate values
  /// are cached for backward.
  const matrix_t& forward(const Bindings& inputs, const ParameterSet& params);

  /// Reverse sweep from the output. `seed` must have the output's shape.
  /// Returns a gradient for every parameter named in `params` (zero for
  /// parameters the output does not depend on).
  ParameterSet backward(const matrix_t& seed, const ParameterSet& params);

  /// Convenience for scalar outputs: seed of one.
  ParameterSet backward(const ParameterSet& params);

  const matrix_t& value(NodeId id) const;

 private:
  enum class Op {
    input,
    parameter,
    constant,
    add,
    sub,
    mul,
    div,
    matmul,
    scale,
    shift,
    exp,
    log,
    tanh,
    relu,
    softplus,
    sigmoid,
    square,
    sqrt,
    lgamma,
    cols,
    concat_cols,
    append_zero_col,
    row_sum,
    logsumexp_rows,
    log_softmax_rows,
    sum,
    mean,
  };

  struct Node {
    Op op;
    std::vector<std::size_t> args{};
    std::string name{};
    scalar_t attr = 0;
    Eigen::Index start = 0;
    Eigen::Index count = 0;
    matrix_t value{};
    matrix_t adjoint{};
  };

  NodeId push(Node node);
  NodeId unary(Op op, NodeId a);
  NodeId binary(Op op, NodeId a, NodeId b);
  void check(NodeId id) const;
  std::string describe(std::size_t index) const;
  void evaluate(std::size_t index);
  void propagate(std::size_t index);

  std::vector<Node> nodes_;
  std::size_t output_ = 0;
  bool has_output_ = false;
  bool forwarded_ = false;
};

}  // namespace edd
