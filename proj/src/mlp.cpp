#include "edd/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

namespace edd {

std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (input_dim < 1) throw InputError("mlp: input_dim must be positive");
  if (output_dim < 1) throw InputError("mlp: output_dim must be positive");
  if (hidden.empty()) throw InputError("mlp: at least one hidden layer is required");
  for (Eigen::Index w : hidden)
    if (w < 1) throw InputError("mlp: hidden widths must be positive");
}

std::vector<Eigen::Index> MlpSpec::widths() const {
  std::vector<Eigen::Index> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output_dim);
  return w;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(spec_.seed);
  const auto w = spec_.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    matrix_t weights(w[l], w[l + 1]);
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
      for (Eigen::Index j = 0; j < weights.cols(); ++j) weights(i, j) = dist(rng);
    params_.add("W" + std::to_string(l), std::move(weights));
    params_.add("b" + std::to_string(l), matrix_t::Zero(1, w[l + 1]));
  }
}

Mlp::Mlp(MlpSpec spec, ParameterSet params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const auto w = spec_.widths();
  if (params_.size() != 2 * (w.size() - 1))
    throw InputError("mlp: parameter count does not match layer widths");
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const matrix_t& weights = params_.at("W" + std::to_string(l));
    const matrix_t& bias = params_.at("b" + std::to_string(l));
    if (weights.rows() != w[l] || weights.cols() != w[l + 1] || bias.rows() != 1 ||
        bias.cols() != w[l + 1])
      throw InputError("mlp: layer " + std::to_string(l) + " has wrong parameter shapes");
  }
}

NodeId Mlp::build(Graph& graph, NodeId x) const {
  const std::size_t layers = spec_.hidden.size() + 1;
  NodeId h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const NodeId weights = graph.parameter("W" + std::to_string(l));
    const NodeId bias = graph.parameter("b" + std::to_string(l));
    h = graph.add(graph.matmul(h, weights), bias);
    if (l + 1 < layers) h = spec_.activation == Activation::tanh ? graph.tanh(h) : graph.relu(h);
  }
  return h;
}

matrix_t Mlp::predict(const matrix_t& x) const {
  if (x.cols() != spec_.input_dim)
    throw ShapeError("mlp: expected " + std::to_string(spec_.input_dim) + " input columns, got " +
                     std::to_string(x.cols()));
  const std::size_t layers = spec_.hidden.size() + 1;
  matrix_t h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const matrix_t& weights = params_.at("W" + std::to_string(l));
    const matrix_t& bias = params_.at("b" + std::to_string(l));
    matrix_t next = h * weights;
    next.rowwise() += bias.row(0);
    if (l + 1 < layers) {
      if (spec_.activation == Activation::tanh) next = next.array().tanh();
      else next = next.cwiseMax(0.0);
    }
    h = std::move(next);
  }
  return h;
}

}  // namespace edd
