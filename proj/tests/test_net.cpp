#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gdee/net.hpp"

using namespace gdee;

TEST_CASE("activation values") {
  CHECK(activate(Activation::Swish, 0.0) == 0.0);
  CHECK(activate(Activation::Swish, 1.0) == doctest::Approx(0.731059).epsilon(1e-5));
  CHECK(activate(Activation::Tanh, 0.0) == 0.0);
  CHECK(activate(Activation::Tanh, 1e3) == doctest::Approx(1.0));
  // Stable at large magnitudes (no overflow).
  CHECK(std::isfinite(activate(Activation::Swish, 800.0)));
  CHECK(std::isfinite(activate(Activation::Swish, -800.0)));
  CHECK(activate(Activation::Swish, -800.0) == doctest::Approx(0.0));
}

TEST_CASE("activation derivatives match finite differences") {
  for (Activation a : {Activation::Tanh, Activation::Swish}) {
    for (double z : {-3.0, -1.0, -0.2, 0.0, 0.4, 1.3, 2.7}) {
      const double eps = 1e-6;
      const double d1 = (activate(a, z + eps) - activate(a, z - eps)) / (2 * eps);
      const double d2 =
          (activate_d1(a, z + eps) - activate_d1(a, z - eps)) / (2 * eps);
      CHECK(activate_d1(a, z) == doctest::Approx(d1).epsilon(1e-8));
      CHECK(activate_d2(a, z) == doctest::Approx(d2).epsilon(1e-7));
    }
  }
}

TEST_CASE("glorot init statistics and determinism") {
  const std::vector<int> dims = {3, 20, 20, 20, 20, 1};
  const NetworkParams net = init_glorot(dims, Activation::Tanh, 42);

  // 20 -> 20 layer: sample std should target sqrt(2/40).
  const auto& w = net.weights[1];
  REQUIRE(w.size() == 400);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / w.size());
  const double target = std::sqrt(2.0 / 40.0);
  CHECK(sd > 0.8 * target);
  CHECK(sd < 1.2 * target);

  for (const auto& b : net.biases)
    for (double v : b) CHECK(v == 0.0);

  const NetworkParams again = init_glorot(dims, Activation::Tanh, 42);
  CHECK(flatten_params(net) == flatten_params(again));
  const NetworkParams other = init_glorot(dims, Activation::Tanh, 43);
  CHECK(flatten_params(net) != flatten_params(other));
}

TEST_CASE("layer dims validation") {
  CHECK_THROWS(validate_layer_dims({2, 20, 1}));
  CHECK_THROWS(validate_layer_dims({3, 20, 2}));
  CHECK_THROWS(validate_layer_dims({3}));
  CHECK_NOTHROW(validate_layer_dims({3, 20, 20, 20, 20, 1}));
}

TEST_CASE("flatten round trip and length") {
  const std::vector<int> dims = {3, 20, 20, 20, 20, 1};
  const NetworkParams net = init_glorot(dims, Activation::Swish, 7);
  const std::vector<double> flat = flatten_params(net);
  CHECK(flat.size() == 1361);
  CHECK(net.num_params() == 1361);

  const NetworkParams back = unflatten_params(flat, dims, Activation::Swish);
  CHECK(flatten_params(back) == flat);

  CHECK_THROWS(unflatten_params(std::vector<double>(1360, 0.0), dims,
                                Activation::Swish));

  const NetworkParams zero =
      unflatten_params(std::vector<double>(1361, 0.0), dims, Activation::Swish);
  InputScaler scaler;
  for (double x : {-0.7, 0.0, 0.9})
    CHECK(forward(zero, scaler, {x, 0.1, -0.3}) == 0.0);
}

TEST_CASE("input scaler maps the box onto [-1,1]") {
  InputScaler s;
  s.lo = {-0.1, 0.25, 0.9};
  s.hi = {0.1, 2.1, 1.1};
  for (int d = 0; d < 3; ++d) {
    CHECK(s.scale(d, s.lo[d]) == doctest::Approx(-1.0));
    CHECK(s.scale(d, s.hi[d]) == doctest::Approx(1.0));
    const double mid = 0.5 * (s.lo[d] + s.hi[d]);
    CHECK(s.scale(d, mid) == doctest::Approx(0.0));
    CHECK(s.jacobian(d) == doctest::Approx(2.0 / (s.hi[d] - s.lo[d])));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const std::vector<int> dims = {3, 8, 8, 1};
  const NetworkParams net = init_glorot(dims, Activation::Swish, 99);
  InputScaler scaler;
  scaler.lo = {-0.11, 0.7853981633974483, 0.9};
  scaler.hi = {0.11, 2.356194490192345, 1.1};

  const std::string path = "roundtrip.ckpt";
  save_net(net, scaler, path);
  const auto [loaded, ls] = load_net(path);
  CHECK(flatten_params(loaded) == flatten_params(net));
  CHECK(loaded.activation == net.activation);
  CHECK(loaded.layer_dims == net.layer_dims);
  for (int d = 0; d < 3; ++d) {
    CHECK(ls.lo[d] == scaler.lo[d]);
    CHECK(ls.hi[d] == scaler.hi[d]);
  }
  for (double x : {-0.05, 0.0, 0.1})
    CHECK(forward(loaded, ls, {x, 1.0, 1.0}) ==
          forward(net, scaler, {x, 1.0, 1.0}));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint format errors are rejected") {
  {
    std::ofstream out("badmagic.ckpt");
    out << "NOT-A-NET v1\n";
  }
  CHECK_THROWS(load_net("badmagic.ckpt"));
  std::remove("badmagic.ckpt");

  const std::vector<int> dims = {3, 4, 1};
  const NetworkParams net = init_glorot(dims, Activation::Tanh, 1);
  save_net(net, InputScaler{}, "trunc.ckpt");
  {
    // Drop the last few parameter lines.
    std::ifstream in("trunc.ckpt");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    std::ofstream out("trunc.ckpt");
    for (size_t i = 0; i + 3 < lines.size(); ++i) out << lines[i] << "\n";
  }
  CHECK_THROWS(load_net("trunc.ckpt"));
  std::remove("trunc.ckpt");

  CHECK_THROWS(load_net("no_such_file.ckpt"));
}
