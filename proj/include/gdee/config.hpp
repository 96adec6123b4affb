#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdee/net.hpp"
#include "gdee/problems.hpp"
#include "gdee/training.hpp"

namespace gdee {

/// Run configuration; every key is available both as `key = value` in a
/// config file and as a `--key value` flag (flags win).
struct RunConfig {
  std::string case_name = "sdof";
  double theta_min = 0.0;  // 0/0 means per-case default window
  double theta_max = 0.0;
  double t_min = 0.9;
  double t_max = 1.1;
  double x_pad = 0.1;
  double h_mollify = 0.02;  // bandwidth as a fraction of the x-range
  int depth = 4;
  int width = 20;
  std::string activation = "tanh";
  std::string optimizer = "adam";
  double lr0 = 0.0015;
  bool plain_adam = false;  // disable the rectified warmup schedule
  int epochs = 50000;
  int n_interior = 2500;
  int n_ic = 500;
  double sampling_fraction = 0.0;
  int resample_every = 100;
  int n_quad = 32;
  uint64_t seed = 1;
  std::string out_dir = "out";
  int checkpoint_every = 5000;

  /// Applies one key/value pair; throws std::invalid_argument naming the key
  /// on unknown keys, unparsable values, or violated ranges.
  void apply(const std::string& key, const std::string& value);

  /// Cross-field validation (ranges that involve several keys).
  void validate() const;

  GdeeProblem problem() const;
  TrainOptions train_options() const;
  std::vector<int> layer_dims() const;

  /// Serialized `key = value` form (the config.resolved echo).
  std::string resolved() const;
};

/// Parses a line-oriented `key = value` file with `#` comments.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path);

/// defaults -> file (optional) -> overrides, with validation.
RunConfig parse_config(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides);

/// Full CLI entry point (subcommand dispatch). Returns the process exit
/// code: 0 success, 1 validation, 2 numerical failure, 3 I/O.
int run_cli(int argc, const char* const* argv);

}  // namespace gdee
