#include "gdee/net.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gdee/rng.hpp"

namespace gdee {

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "swish") return Activation::Swish;
  throw std::invalid_argument("unsupported activation: " + name);
}

const char* activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "swish";
}

double activate(Activation a, double z) {
  if (a == Activation::Tanh) return std::tanh(z);
  return z * stable_sigmoid(z);
}

double activate_d1(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double th = std::tanh(z);
    return 1.0 - th * th;
  }
  const double s = stable_sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

double activate_d2(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double th = std::tanh(z);
    return -2.0 * th * (1.0 - th * th);
  }
  // swish'' = s'(1 + z(1-s)) + s((1-s) - z s'), s' = s(1-s)
  const double s = stable_sigmoid(z);
  const double sp = s * (1.0 - s);
  return sp * (1.0 + z * (1.0 - s)) + s * ((1.0 - s) - z * sp);
}

int NetworkParams::num_params() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l)
    n += layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1];
  return n;
}

void validate_layer_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("need at least two layer dims");
  if (dims.front() != 3)
    throw std::invalid_argument("input dimension must be 3 (x, theta, t)");
  if (dims.back() != 1) throw std::invalid_argument("output dimension must be 1");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("layer dims must be positive");
}

NetworkParams init_glorot(const std::vector<int>& layer_dims, Activation act,
                          uint64_t seed) {
  validate_layer_dims(layer_dims);
  NetworkParams net;
  net.layer_dims = layer_dims;
  net.activation = act;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (double& v : w) v = std_dev * rng.normal();
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

std::vector<double> flatten_params(const NetworkParams& net) {
  std::vector<double> flat;
  flat.reserve(net.num_params());
  for (int l = 0; l < net.num_layers(); ++l) {
    flat.insert(flat.end(), net.weights[l].begin(), net.weights[l].end());
    flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
  }
  return flat;
}

NetworkParams unflatten_params(const std::vector<double>& flat,
                               const std::vector<int>& layer_dims,
                               Activation act) {
  validate_layer_dims(layer_dims);
  NetworkParams net;
  net.layer_dims = layer_dims;
  net.activation = act;
  size_t pos = 0;
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const size_t nw = static_cast<size_t>(layer_dims[l + 1]) * layer_dims[l];
    const size_t nb = layer_dims[l + 1];
    if (pos + nw + nb > flat.size())
      throw std::invalid_argument("flat parameter vector too short");
    net.weights.emplace_back(flat.begin() + pos, flat.begin() + pos + nw);
    pos += nw;
    net.biases.emplace_back(flat.begin() + pos, flat.begin() + pos + nb);
    pos += nb;
  }
  if (pos != flat.size())
    throw std::invalid_argument("flat parameter vector length mismatch");
  return net;
}

double forward(const NetworkParams& net, const InputScaler& scaler,
               const std::array<double, 3>& input) {
  std::vector<double> h(3);
  for (int d = 0; d < 3; ++d) h[d] = scaler.scale(d, input[d]);
  for (int l = 0; l < net.num_layers(); ++l) {
    const int ni = net.layer_dims[l];
    const int no = net.layer_dims[l + 1];
    std::vector<double> z(no);
    for (int j = 0; j < no; ++j) {
      double s = net.biases[l][j];
      const double* w = &net.weights[l][static_cast<size_t>(j) * ni];
      for (int k = 0; k < ni; ++k) s += w[k] * h[k];
      z[j] = (l + 1 < net.num_layers()) ? activate(net.activation, s) : s;
    }
    h = std::move(z);
  }
  return h[0];
}

namespace {

constexpr char kMagic[] = "GDEE-PINN-NET v1";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void format_error(const std::string& path, int line,
                               const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void save_net(const NetworkParams& net, const InputScaler& scaler,
              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kMagic << "\n";
  out << "activation " << activation_name(net.activation) << "\n";
  out << "dims";
  for (int d : net.layer_dims) out << " " << d;
  out << "\n";
  out << "scaler";
  for (int d = 0; d < 3; ++d)
    out << " " << fmt17(scaler.lo[d]) << " " << fmt17(scaler.hi[d]);
  out << "\n";
  const std::vector<double> flat = flatten_params(net);
  out << "params " << flat.size() << "\n";
  for (double v : flat) out << fmt17(v) << "\n";
  if (!out) throw std::runtime_error("write failure: " + path);
}

std::pair<NetworkParams, InputScaler> load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != kMagic)
    format_error(path, lineno, "bad magic header");

  ++lineno;
  if (!std::getline(in, line)) format_error(path, lineno, "missing activation");
  std::istringstream act_ss(line);
  std::string key, act_name;
  if (!(act_ss >> key >> act_name) || key != "activation")
    format_error(path, lineno, "expected 'activation <name>'");
  Activation act;
  try {
    act = activation_from_name(act_name);
  } catch (const std::exception&) {
    format_error(path, lineno, "unsupported activation '" + act_name + "'");
  }

  ++lineno;
  if (!std::getline(in, line)) format_error(path, lineno, "missing dims");
  std::istringstream dims_ss(line);
  if (!(dims_ss >> key) || key != "dims")
    format_error(path, lineno, "expected 'dims ...'");
  std::vector<int> dims;
  for (int d; dims_ss >> d;) dims.push_back(d);
  try {
    validate_layer_dims(dims);
  } catch (const std::exception& e) {
    format_error(path, lineno, e.what());
  }

  ++lineno;
  if (!std::getline(in, line)) format_error(path, lineno, "missing scaler");
  std::istringstream sc_ss(line);
  if (!(sc_ss >> key) || key != "scaler")
    format_error(path, lineno, "expected 'scaler ...'");
  InputScaler scaler;
  for (int d = 0; d < 3; ++d) {
    if (!(sc_ss >> scaler.lo[d] >> scaler.hi[d]))
      format_error(path, lineno, "scaler needs 6 numbers");
    if (!(scaler.lo[d] < scaler.hi[d]))
      format_error(path, lineno, "scaler lo must be < hi");
  }

  ++lineno;
  if (!std::getline(in, line)) format_error(path, lineno, "missing params header");
  std::istringstream np_ss(line);
  size_t count = 0;
  if (!(np_ss >> key >> count) || key != "params")
    format_error(path, lineno, "expected 'params <count>'");

  std::vector<double> flat;
  flat.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    ++lineno;
    if (!std::getline(in, line))
      format_error(path, lineno,
                   "parameter count mismatch: expected " + std::to_string(count) +
                       ", got " + std::to_string(i));
    std::istringstream vs(line);
    double v;
    if (!(vs >> v) || !std::isfinite(v))
      format_error(path, lineno, "bad parameter value '" + line + "'");
    flat.push_back(v);
  }

  NetworkParams net;
  try {
    net = unflatten_params(flat, dims, act);
  } catch (const std::exception& e) {
    format_error(path, lineno, e.what());
  }
  return {std::move(net), scaler};
}

}  // namespace gdee
