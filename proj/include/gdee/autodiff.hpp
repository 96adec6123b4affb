#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gdee/net.hpp"

namespace gdee {

/// Number of network input dimensions (x, theta, t).
constexpr int kInputDims = 3;

/// Primal value plus one tangent per seeded input direction. Carries the
/// output together with its exact derivatives w.r.t. the raw inputs.
struct TangentBundle {
  double p = 0.0;
  std::array<double, kInputDims> t{0.0, 0.0, 0.0};
};

/// Expression tape over tangent bundles: forward mode over the 3 input
/// directions, reverse accumulation over parameter leaves. The program is
/// built once; forward() re-evaluates it for new parameters/inputs, and
/// reverse() produces exact gradients of any scalar on the tape (primal or
/// tangent component) with respect to all parameter leaves.
class ExprTape {
 public:
  using NodeId = uint32_t;

  NodeId constant(double v);
  /// Leaf bound to flat parameter index; tangents are identically zero.
  NodeId param_leaf(int flat_index);
  /// Leaf bound to raw input dimension; tangent seeded with e_dim.
  NodeId input_leaf(int dim);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// a*x + b with constant coefficients.
  NodeId axpb(NodeId x, double a, double b);
  NodeId activation(Activation act, NodeId x);
  /// sum_k w[k]*x[k] + bias (a fused affine neuron).
  NodeId dot(std::span<const NodeId> w, std::span<const NodeId> x, NodeId bias);

  size_t num_nodes() const { return nodes_.size(); }
  int num_param_leaves() const { return static_cast<int>(param_slots_.size()); }

  /// Evaluates all nodes. Throws on non-finite intermediates, naming the
  /// offending node.
  void forward(std::span<const double> params,
               const std::array<double, kInputDims>& input);

  const TangentBundle& value(NodeId id) const { return values_[id]; }

  /// Accumulates d(seed . bundle(root)) / d(params) into grad, where the dot
  /// product runs over the 1 + kInputDims bundle components. grad must be
  /// indexed by flat parameter index.
  void reverse(NodeId root, const TangentBundle& seed, std::span<double> grad);

 private:
  enum class Op : uint8_t { Const, Param, Input, Add, Sub, Mul, Axpb, Act, Dot };

  struct Node {
    Op op;
    uint32_t a = 0, b = 0;       // operand node ids
    double c0 = 0.0, c1 = 0.0;   // constants (value / scale / shift)
    Activation act = Activation::Tanh;
    uint32_t args_off = 0, args_len = 0;  // Dot: pairs (w, x), b = bias node
    int param_index = -1;
    int input_dim = -1;
  };

  NodeId push(Node n);

  std::vector<Node> nodes_;
  std::vector<uint32_t> args_;                 // operand pool for Dot nodes
  std::vector<std::pair<NodeId, int>> param_slots_;  // (node, flat index)
  std::vector<TangentBundle> values_;
  std::vector<TangentBundle> adjoints_;  // scratch for reverse()
  bool forward_done_ = false;
};

/// Gradient of a scalar root (primal component) w.r.t. all parameter leaves,
/// ordered by flat parameter index. forward() must have run.
std::vector<double> param_gradient(ExprTape& tape, ExprTape::NodeId root,
                                   int num_params);

/// The full network as a tape program: scaling layer, affine layers, hidden
/// activations, linear output. Reference engine; cross-checked against
/// MlpEvaluator.
class NetworkTape {
 public:
  NetworkTape(std::vector<int> layer_dims, Activation act, InputScaler scaler);

  ExprTape& tape() { return tape_; }
  ExprTape::NodeId output() const { return output_; }
  int num_params() const { return num_params_; }

  /// value and (dN/dx, dN/dtheta, dN/dt) in raw coordinates.
  TangentBundle eval(std::span<const double> params,
                     const std::array<double, kInputDims>& input);

  /// After eval(): accumulates d(seed . output bundle)/d(params) into grad.
  void accumulate_gradient(const TangentBundle& seed, std::span<double> grad);

 private:
  ExprTape tape_;
  ExprTape::NodeId output_ = 0;
  int num_params_ = 0;
};

/// Hand-fused forward-over-reverse evaluator for the MLP. Mathematically
/// identical to NetworkTape but with layer-granularity loops; this is the
/// training hot path.
class MlpEvaluator {
 public:
  MlpEvaluator(std::vector<int> layer_dims, Activation act, InputScaler scaler);

  int num_params() const { return num_params_; }
  const std::vector<int>& layer_dims() const { return dims_; }
  const InputScaler& scaler() const { return scaler_; }
  Activation activation() const { return act_; }

  /// Forward pass with input tangents; intermediates are retained for
  /// backward().
  TangentBundle forward(std::span<const double> params,
                        const std::array<double, kInputDims>& input);

  /// Accumulates d(seed . output bundle)/d(params) into grad, using the
  /// intermediates of the last forward() call.
  void backward(std::span<const double> params, const TangentBundle& seed,
                std::span<double> grad);

 private:
  std::vector<int> dims_;
  Activation act_;
  InputScaler scaler_;
  int num_params_ = 0;
  std::vector<int> layer_offset_;  // flat offset of each layer's weights

  // Retained per-layer state: pre-activation bundles z and activations h
  // (h[0] holds the scaled input bundle).
  std::vector<std::vector<TangentBundle>> z_, h_;
  std::vector<std::vector<TangentBundle>> zbar_, hbar_;  // reverse scratch
};

/// Convenience wrapper matching the "value + input gradient" contract.
struct ForwardResult {
  double value;
  std::array<double, kInputDims> input_grad;
};

ForwardResult forward_with_input_tangents(const NetworkParams& net,
                                          const InputScaler& scaler,
                                          const std::array<double, kInputDims>& input);

/// Central-difference gradient estimate; test oracle.
std::vector<double> finite_diff_probe(
    const std::function<double(const std::vector<double>&)>& fn,
    const std::vector<double>& point, double step);

}  // namespace gdee
