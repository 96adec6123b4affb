#include "gdee/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gdee {

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    bad_key(key, "cannot parse '" + v + "' as a number");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(d);
  } catch (const std::exception&) {
    bad_key(key, "cannot parse '" + v + "' as an integer");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    bad_key(key, "cannot parse '" + v + "' as an unsigned integer");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_key(key, "cannot parse '" + v + "' as a boolean");
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "case") {
    case_from_name(value);  // throws on unknown
    case_name = value;
  } else if (key == "theta_min") {
    theta_min = parse_double(key, value);
  } else if (key == "theta_max") {
    theta_max = parse_double(key, value);
  } else if (key == "t_min") {
    t_min = parse_double(key, value);
  } else if (key == "t_max") {
    t_max = parse_double(key, value);
  } else if (key == "x_pad") {
    x_pad = parse_double(key, value);
    if (x_pad < 0.0) bad_key(key, "must be >= 0");
  } else if (key == "h_mollify") {
    h_mollify = parse_double(key, value);
    if (!(h_mollify > 0.0)) bad_key(key, "must be > 0");
  } else if (key == "depth") {
    depth = parse_int(key, value);
    if (depth < 1 || depth > 64) bad_key(key, "must be in [1, 64]");
  } else if (key == "width") {
    width = parse_int(key, value);
    if (width < 1 || width > 4096) bad_key(key, "must be in [1, 4096]");
  } else if (key == "activation") {
    activation_from_name(value);  // throws on unsupported
    activation = value;
  } else if (key == "optimizer") {
    if (value != "adam" && value != "lbfgs")
      bad_key(key, "must be 'adam' or 'lbfgs'");
    optimizer = value;
  } else if (key == "lr0") {
    lr0 = parse_double(key, value);
    if (!(lr0 > 0.0)) bad_key(key, "must be > 0");
  } else if (key == "plain_adam") {
    plain_adam = parse_bool(key, value);
  } else if (key == "epochs") {
    epochs = parse_int(key, value);
    if (epochs < 0) bad_key(key, "must be >= 0");
  } else if (key == "n_interior") {
    n_interior = parse_int(key, value);
    if (n_interior < 1) bad_key(key, "must be >= 1");
  } else if (key == "n_ic") {
    n_ic = parse_int(key, value);
    if (n_ic < 0) bad_key(key, "must be >= 0");
  } else if (key == "sampling_fraction") {
    sampling_fraction = parse_double(key, value);
    if (sampling_fraction < 0.0 || sampling_fraction >= 1.0)
      bad_key(key, "must be in [0, 1)");
  } else if (key == "resample_every") {
    resample_every = parse_int(key, value);
    if (resample_every < 0) bad_key(key, "must be >= 0");
  } else if (key == "n_quad") {
    n_quad = parse_int(key, value);
    if (n_quad < 1) bad_key(key, "must be >= 1");
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "out_dir") {
    if (value.empty()) bad_key(key, "must not be empty");
    out_dir = value;
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_int(key, value);
    if (checkpoint_every < 0) bad_key(key, "must be >= 0");
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (!(t_min < t_max))
    throw std::invalid_argument("config: t_min must be < t_max");
  const bool theta_default = theta_min == 0.0 && theta_max == 0.0;
  if (!theta_default && !(theta_min < theta_max))
    throw std::invalid_argument("config: theta_min must be < theta_max");
}

GdeeProblem RunConfig::problem() const {
  ProblemConfig cfg;
  cfg.id = case_from_name(case_name);
  cfg.theta_min = theta_min;
  cfg.theta_max = theta_max;
  cfg.t_min = t_min;
  cfg.t_max = t_max;
  cfg.x_pad = x_pad;
  cfg.h_rel = h_mollify;
  return make_problem(cfg);
}

std::vector<int> RunConfig::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(3);
  for (int i = 0; i < depth; ++i) dims.push_back(width);
  dims.push_back(1);
  return dims;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opts;
  opts.layer_dims = layer_dims();
  opts.activation = activation_from_name(activation);
  opts.optimizer =
      optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Lbfgs;
  opts.lr0 = lr0;
  opts.rectified = !plain_adam;
  opts.epochs = epochs;
  opts.n_interior = n_interior;
  opts.n_anchor = n_ic;
  opts.fraction = sampling_fraction;
  opts.resample_every = resample_every;
  opts.seed = seed;
  opts.checkpoint_every = checkpoint_every;
  opts.out_dir = out_dir;
  return opts;
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "case = " << case_name << "\n";
  out << "theta_min = " << num(theta_min) << "\n";
  out << "theta_max = " << num(theta_max) << "\n";
  out << "t_min = " << num(t_min) << "\n";
  out << "t_max = " << num(t_max) << "\n";
  out << "x_pad = " << num(x_pad) << "\n";
  out << "h_mollify = " << num(h_mollify) << "\n";
  out << "depth = " << depth << "\n";
  out << "width = " << width << "\n";
  out << "activation = " << activation << "\n";
  out << "optimizer = " << optimizer << "\n";
  out << "lr0 = " << num(lr0) << "\n";
  out << "plain_adam = " << (plain_adam ? "true" : "false") << "\n";
  out << "epochs = " << epochs << "\n";
  out << "n_interior = " << n_interior << "\n";
  out << "n_ic = " << n_ic << "\n";
  out << "sampling_fraction = " << num(sampling_fraction) << "\n";
  out << "resample_every = " << resample_every << "\n";
  out << "n_quad = " << n_quad << "\n";
  out << "seed = " << seed << "\n";
  out << "out_dir = " << out_dir << "\n";
  out << "checkpoint_every = " << checkpoint_every << "\n";
  return out.str();
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kvs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    kvs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kvs;
}

RunConfig parse_config(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!config_path.empty())
    for (const auto& [k, v] : read_config_file(config_path)) cfg.apply(k, v);
  for (const auto& [k, v] : overrides) cfg.apply(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace gdee
