#include "gdee/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gdee {

ExprTape::NodeId ExprTape::push(Node n) {
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

ExprTape::NodeId ExprTape::constant(double v) {
  Node n{};
  n.op = Op::Const;
  n.c0 = v;
  return push(n);
}

ExprTape::NodeId ExprTape::param_leaf(int flat_index) {
  Node n{};
  n.op = Op::Param;
  n.param_index = flat_index;
  const NodeId id = push(n);
  param_slots_.emplace_back(id, flat_index);
  return id;
}

ExprTape::NodeId ExprTape::input_leaf(int dim) {
  if (dim < 0 || dim >= kInputDims)
    throw std::invalid_argument("input dim out of range");
  Node n{};
  n.op = Op::Input;
  n.input_dim = dim;
  return push(n);
}

ExprTape::NodeId ExprTape::add(NodeId a, NodeId b) {
  Node n{};
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  return push(n);
}

ExprTape::NodeId ExprTape::sub(NodeId a, NodeId b) {
  Node n{};
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  return push(n);
}

ExprTape::NodeId ExprTape::mul(NodeId a, NodeId b) {
  Node n{};
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  return push(n);
}

ExprTape::NodeId ExprTape::axpb(NodeId x, double a, double b) {
  Node n{};
  n.op = Op::Axpb;
  n.a = x;
  n.c0 = a;
  n.c1 = b;
  return push(n);
}

ExprTape::NodeId ExprTape::activation(Activation act, NodeId x) {
  Node n{};
  n.op = Op::Act;
  n.a = x;
  n.act = act;
  return push(n);
}

ExprTape::NodeId ExprTape::dot(std::span<const NodeId> w,
                               std::span<const NodeId> x, NodeId bias) {
  if (w.size() != x.size())
    throw std::invalid_argument("dot: operand length mismatch");
  Node n{};
  n.op = Op::Dot;
  n.b = bias;
  n.args_off = static_cast<uint32_t>(args_.size());
  n.args_len = static_cast<uint32_t>(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    args_.push_back(w[i]);
    args_.push_back(x[i]);
  }
  return push(n);
}

void ExprTape::forward(std::span<const double> params,
                       const std::array<double, kInputDims>& input) {
  values_.assign(nodes_.size(), TangentBundle{});
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    TangentBundle& v = values_[i];
    switch (n.op) {
      case Op::Const:
        v.p = n.c0;
        break;
      case Op::Param:
        v.p = params[n.param_index];
        break;
      case Op::Input:
        v.p = input[n.input_dim];
        v.t[n.input_dim] = 1.0;
        break;
      case Op::Add: {
        const TangentBundle& a = values_[n.a];
        const TangentBundle& b = values_[n.b];
        v.p = a.p + b.p;
        for (int d = 0; d < kInputDims; ++d) v.t[d] = a.t[d] + b.t[d];
        break;
      }
      case Op::Sub: {
        const TangentBundle& a = values_[n.a];
        const TangentBundle& b = values_[n.b];
        v.p = a.p - b.p;
        for (int d = 0; d < kInputDims; ++d) v.t[d] = a.t[d] - b.t[d];
        break;
      }
      case Op::Mul: {
        const TangentBundle& a = values_[n.a];
        const TangentBundle& b = values_[n.b];
        v.p = a.p * b.p;
        for (int d = 0; d < kInputDims; ++d)
          v.t[d] = a.t[d] * b.p + a.p * b.t[d];
        break;
      }
      case Op::Axpb: {
        const TangentBundle& a = values_[n.a];
        v.p = n.c0 * a.p + n.c1;
        for (int d = 0; d < kInputDims; ++d) v.t[d] = n.c0 * a.t[d];
        break;
      }
      case Op::Act: {
        const TangentBundle& a = values_[n.a];
        const double d1 = activate_d1(n.act, a.p);
        v.p = activate(n.act, a.p);
        for (int d = 0; d < kInputDims; ++d) v.t[d] = d1 * a.t[d];
        break;
      }
      case Op::Dot: {
        v = values_[n.b];  // bias
        const uint32_t* args = args_.data() + n.args_off;
        for (uint32_t k = 0; k < n.args_len; ++k) {
          const TangentBundle& w = values_[args[2 * k]];
          const TangentBundle& x = values_[args[2 * k + 1]];
          v.p += w.p * x.p;
          for (int d = 0; d < kInputDims; ++d)
            v.t[d] += w.t[d] * x.p + w.p * x.t[d];
        }
        break;
      }
    }
    if (!std::isfinite(v.p))
      throw std::runtime_error("non-finite value at tape node " +
                               std::to_string(i));
  }
  forward_done_ = true;
}

void ExprTape::reverse(NodeId root, const TangentBundle& seed,
                       std::span<double> grad) {
  if (!forward_done_) throw std::logic_error("reverse() before forward()");
  if (root >= nodes_.size()) throw std::invalid_argument("root not on tape");
  adjoints_.assign(nodes_.size(), TangentBundle{});
  adjoints_[root] = seed;

  const auto mul_adjoint = [this](TangentBundle& abar, const TangentBundle& cbar,
                                  const TangentBundle& bval,
                                  const TangentBundle& aval) {
    // c = a*b; contribution to abar given cbar and the other operand's value.
    double s = cbar.p * bval.p;
    for (int d = 0; d < kInputDims; ++d) s += cbar.t[d] * bval.t[d];
    abar.p += s;
    for (int d = 0; d < kInputDims; ++d) abar.t[d] += cbar.t[d] * bval.p;
    (void)aval;
  };

  for (size_t i = nodes_.size(); i-- > 0;) {
    const Node& n = nodes_[i];
    const TangentBundle& cbar = adjoints_[i];
    switch (n.op) {
      case Op::Const:
      case Op::Input:
        break;
      case Op::Param:
        grad[n.param_index] += cbar.p;
        break;
      case Op::Add: {
        TangentBundle& abar = adjoints_[n.a];
        TangentBundle& bbar = adjoints_[n.b];
        abar.p += cbar.p;
        bbar.p += cbar.p;
        for (int d = 0; d < kInputDims; ++d) {
          abar.t[d] += cbar.t[d];
          bbar.t[d] += cbar.t[d];
        }
        break;
      }
      case Op::Sub: {
        TangentBundle& abar = adjoints_[n.a];
        TangentBundle& bbar = adjoints_[n.b];
        abar.p += cbar.p;
        bbar.p -= cbar.p;
        for (int d = 0; d < kInputDims; ++d) {
          abar.t[d] += cbar.t[d];
          bbar.t[d] -= cbar.t[d];
        }
        break;
      }
      case Op::Mul: {
        mul_adjoint(adjoints_[n.a], cbar, values_[n.b], values_[n.a]);
        mul_adjoint(adjoints_[n.b], cbar, values_[n.a], values_[n.b]);
        break;
      }
      case Op::Axpb: {
        TangentBundle& abar = adjoints_[n.a];
        abar.p += n.c0 * cbar.p;
        for (int d = 0; d < kInputDims; ++d) abar.t[d] += n.c0 * cbar.t[d];
        break;
      }
      case Op::Act: {
        const TangentBundle& z = values_[n.a];
        const double d1 = activate_d1(n.act, z.p);
        const double d2 = activate_d2(n.act, z.p);
        double s = 0.0;
        for (int d = 0; d < kInputDims; ++d) s += cbar.t[d] * z.t[d];
        TangentBundle& zbar = adjoints_[n.a];
        zbar.p += cbar.p * d1 + d2 * s;
        for (int d = 0; d < kInputDims; ++d) zbar.t[d] += cbar.t[d] * d1;
        break;
      }
      case Op::Dot: {
        TangentBundle& bbar = adjoints_[n.b];
        bbar.p += cbar.p;
        for (int d = 0; d < kInputDims; ++d) bbar.t[d] += cbar.t[d];
        const uint32_t* args = args_.data() + n.args_off;
        for (uint32_t k = 0; k < n.args_len; ++k) {
          const uint32_t wi = args[2 * k];
          const uint32_t xi = args[2 * k + 1];
          mul_adjoint(adjoints_[wi], cbar, values_[xi], values_[wi]);
          mul_adjoint(adjoints_[xi], cbar, values_[wi], values_[xi]);
        }
        break;
      }
    }
  }
}

std::vector<double> param_gradient(ExprTape& tape, ExprTape::NodeId root,
                                   int num_params) {
  std::vector<double> grad(num_params, 0.0);
  TangentBundle seed;
  seed.p = 1.0;
  tape.reverse(root, seed, grad);
  return grad;
}

NetworkTape::NetworkTape(std::vector<int> layer_dims, Activation act,
                         InputScaler scaler) {
  validate_layer_dims(layer_dims);
  using NodeId = ExprTape::NodeId;

  std::vector<NodeId> prev(kInputDims);
  for (int d = 0; d < kInputDims; ++d) {
    const NodeId raw = tape_.input_leaf(d);
    const double k = scaler.jacobian(d);
    prev[d] = tape_.axpb(raw, k, -1.0 - k * scaler.lo[d]);
  }

  int flat = 0;
  const int num_layers = static_cast<int>(layer_dims.size()) - 1;
  for (int l = 0; l < num_layers; ++l) {
    const int ni = layer_dims[l];
    const int no = layer_dims[l + 1];
    std::vector<std::vector<NodeId>> rows(no);
    for (int j = 0; j < no; ++j) {
      rows[j].resize(ni);
      for (int k = 0; k < ni; ++k) rows[j][k] = tape_.param_leaf(flat++);
    }
    std::vector<NodeId> biases(no);
    for (int j = 0; j < no; ++j) biases[j] = tape_.param_leaf(flat++);

    std::vector<NodeId> next(no);
    for (int j = 0; j < no; ++j) {
      const NodeId z = tape_.dot(rows[j], prev, biases[j]);
      next[j] = (l + 1 < num_layers) ? tape_.activation(act, z) : z;
    }
    prev = std::move(next);
  }
  output_ = prev[0];
  num_params_ = flat;
}

TangentBundle NetworkTape::eval(std::span<const double> params,
                                const std::array<double, kInputDims>& input) {
  tape_.forward(params, input);
  return tape_.value(output_);
}

void NetworkTape::accumulate_gradient(const TangentBundle& seed,
                                      std::span<double> grad) {
  tape_.reverse(output_, seed, grad);
}

MlpEvaluator::MlpEvaluator(std::vector<int> layer_dims, Activation act,
                           InputScaler scaler)
    : dims_(std::move(layer_dims)), act_(act), scaler_(scaler) {
  validate_layer_dims(dims_);
  const int L = static_cast<int>(dims_.size()) - 1;
  layer_offset_.resize(L);
  int flat = 0;
  for (int l = 0; l < L; ++l) {
    layer_offset_[l] = flat;
    flat += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  num_params_ = flat;
  z_.resize(L);
  zbar_.resize(L);
  h_.resize(L + 1);
  hbar_.resize(L + 1);
  h_[0].resize(kInputDims);
  hbar_[0].resize(kInputDims);
  for (int l = 0; l < L; ++l) {
    z_[l].resize(dims_[l + 1]);
    zbar_[l].resize(dims_[l + 1]);
    h_[l + 1].resize(dims_[l + 1]);
    hbar_[l + 1].resize(dims_[l + 1]);
  }
}

TangentBundle MlpEvaluator::forward(std::span<const double> params,
                                    const std::array<double, kInputDims>& input) {
  for (int d = 0; d < kInputDims; ++d) {
    TangentBundle& b = h_[0][d];
    b.p = scaler_.scale(d, input[d]);
    b.t = {0.0, 0.0, 0.0};
    b.t[d] = scaler_.jacobian(d);
  }
  const int L = static_cast<int>(dims_.size()) - 1;
  for (int l = 0; l < L; ++l) {
    const int ni = dims_[l];
    const int no = dims_[l + 1];
    const double* w = params.data() + layer_offset_[l];
    const double* bias = w + static_cast<size_t>(no) * ni;
    const TangentBundle* hin = h_[l].data();
    for (int j = 0; j < no; ++j) {
      const double* wj = w + static_cast<size_t>(j) * ni;
      double p = bias[j], t0 = 0.0, t1 = 0.0, t2 = 0.0;
      for (int k = 0; k < ni; ++k) {
        const double wv = wj[k];
        p += wv * hin[k].p;
        t0 += wv * hin[k].t[0];
        t1 += wv * hin[k].t[1];
        t2 += wv * hin[k].t[2];
      }
      TangentBundle& z = z_[l][j];
      z.p = p;
      z.t = {t0, t1, t2};
      TangentBundle& hout = h_[l + 1][j];
      if (l + 1 < L) {
        const double d1 = activate_d1(act_, p);
        hout.p = activate(act_, p);
        hout.t = {d1 * t0, d1 * t1, d1 * t2};
      } else {
        hout = z;
      }
    }
  }
  const TangentBundle& out = h_[L][0];
  if (!std::isfinite(out.p) || !std::isfinite(out.t[0]) ||
      !std::isfinite(out.t[1]) || !std::isfinite(out.t[2]))
    throw std::runtime_error("non-finite network output");
  return out;
}

void MlpEvaluator::backward(std::span<const double> params,
                            const TangentBundle& seed, std::span<double> grad) {
  const int L = static_cast<int>(dims_.size()) - 1;
  zbar_[L - 1][0] = seed;
  for (int l = L - 1; l >= 0; --l) {
    const int ni = dims_[l];
    const int no = dims_[l + 1];
    const double* w = params.data() + layer_offset_[l];
    double* gw = grad.data() + layer_offset_[l];
    double* gb = gw + static_cast<size_t>(no) * ni;
    const TangentBundle* hin = h_[l].data();
    TangentBundle* hb = hbar_[l].data();
    for (int k = 0; k < ni; ++k) hb[k] = TangentBundle{};

    for (int j = 0; j < no; ++j) {
      const TangentBundle& zb = zbar_[l][j];
      const double* wj = w + static_cast<size_t>(j) * ni;
      double* gwj = gw + static_cast<size_t>(j) * ni;
      gb[j] += zb.p;
      for (int k = 0; k < ni; ++k) {
        const TangentBundle& hk = hin[k];
        gwj[k] += zb.p * hk.p + zb.t[0] * hk.t[0] + zb.t[1] * hk.t[1] +
                  zb.t[2] * hk.t[2];
        const double wv = wj[k];
        hb[k].p += wv * zb.p;
        hb[k].t[0] += wv * zb.t[0];
        hb[k].t[1] += wv * zb.t[1];
        hb[k].t[2] += wv * zb.t[2];
      }
    }

    if (l > 0) {
      // hbar of layer l's inputs -> zbar of layer l-1 through the activation.
      const int nprev = dims_[l];
      for (int j = 0; j < nprev; ++j) {
        const TangentBundle& z = z_[l - 1][j];
        const TangentBundle& hbj = hb[j];
        const double d1 = activate_d1(act_, z.p);
        const double d2 = activate_d2(act_, z.p);
        const double s =
            hbj.t[0] * z.t[0] + hbj.t[1] * z.t[1] + hbj.t[2] * z.t[2];
        TangentBundle& zb = zbar_[l - 1][j];
        zb.p = hbj.p * d1 + d2 * s;
        zb.t = {hbj.t[0] * d1, hbj.t[1] * d1, hbj.t[2] * d1};
      }
    }
  }
}

ForwardResult forward_with_input_tangents(
    const NetworkParams& net, const InputScaler& scaler,
    const std::array<double, kInputDims>& input) {
  MlpEvaluator eval(net.layer_dims, net.activation, scaler);
  const std::vector<double> flat = flatten_params(net);
  const TangentBundle out = eval.forward(flat, input);
  return {out.p, out.t};
}

std::vector<double> finite_diff_probe(
    const std::function<double(const std::vector<double>&)>& fn,
    const std::vector<double>& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  std::vector<double> grad(point.size());
  std::vector<double> p = point;
  for (size_t i = 0; i < point.size(); ++i) {
    p[i] = point[i] + step;
    const double fp = fn(p);
    p[i] = point[i] - step;
    const double fm = fn(p);
    p[i] = point[i];
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

}  // namespace gdee
