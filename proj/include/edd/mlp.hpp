#pragma once

#include <string_view>
#include <vector>

#include "edd/graph.hpp"

namespace edd {

enum class Activation { tanh, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct MlpSpec {
  Eigen::Index input_dim = 1;
  /// Hidden layer widths, at least one.
  std::vector<Eigen::Index> hidden{10};
  Activation activation = Activation::tanh;
  Eigen::Index output_dim = 1;
  seed_t seed = 0;

  void validate() const;
  /// Input, hidden and output widths in order.
  std::vector<Eigen::Index> widths() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Fully connected network. Layer l computes act(x W_l + b_l); the last
/// layer is affine. Parameters are named "W<l>" (fan_in x fan_out) and
/// "b<l>" (1 x fan_out).
class Mlp {
 public:
  /// Glorot-uniform weights, zero biases, drawn from `spec.seed`.
  explicit Mlp(MlpSpec spec);
  Mlp(MlpSpec spec, ParameterSet params);

  const MlpSpec& spec() const { return spec_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  /// Appends the network to `graph`, reading its input from `x`.
  NodeId build(Graph& graph, NodeId x) const;

  /// Direct evaluation without a graph; rows of `x` are samples.
  matrix_t predict(const matrix_t& x) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  MlpSpec spec_;
  ParameterSet params_;
};

}  // namespace edd
