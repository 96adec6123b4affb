#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gdee {

enum class Activation { Tanh, Swish };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

/// Numerically stable logistic function (no exp of large positives).
inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation a, double z);
double activate_d1(Activation a, double z);
double activate_d2(Activation a, double z);

/// Per-dimension affine map of the (x, theta, t) training box onto [-1,1]^3.
struct InputScaler {
  std::array<double, 3> lo{-1.0, -1.0, -1.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  double scale(int d, double v) const {
    return 2.0 * (v - lo[d]) / (hi[d] - lo[d]) - 1.0;
  }
  /// d(scaled)/d(raw); constant per dimension.
  double jacobian(int d) const { return 2.0 / (hi[d] - lo[d]); }
};

/// MLP weights and biases. Input is always (x, theta, t), output scalar;
/// hidden layers share one activation, output layer is linear.
struct NetworkParams {
  std::vector<int> layer_dims;  // first == 3, last == 1
  std::vector<std::vector<double>> weights;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> biases;   // per layer
  Activation activation = Activation::Tanh;

  int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int num_params() const;
};

void validate_layer_dims(const std::vector<int>& dims);

/// Glorot-normal weights, zero biases. Reproducible for a given seed.
NetworkParams init_glorot(const std::vector<int>& layer_dims, Activation act,
                          uint64_t seed);

/// Flat ordering: layer-major, weights row-major, then bias.
std::vector<double> flatten_params(const NetworkParams& net);
NetworkParams unflatten_params(const std::vector<double>& flat,
                               const std::vector<int>& layer_dims,
                               Activation act);

/// Plain forward pass (scaled inputs), no derivatives.
double forward(const NetworkParams& net, const InputScaler& scaler,
               const std::array<double, 3>& input);

/// Line-oriented text checkpoint, 17 significant digits. Round trip is
/// bit-exact.
void save_net(const NetworkParams& net, const InputScaler& scaler,
              const std::string& path);
std::pair<NetworkParams, InputScaler> load_net(const std::string& path);

}  // namespace gdee
