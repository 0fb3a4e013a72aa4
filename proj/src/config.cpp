#include "focus/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "focus/error.hpp"

namespace focus {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.values_ = {
      // segmentation and clustering
      {"p", "16"},
      {"k", "16"},
      {"alpha", "0.2"},
      {"cluster_lr", "0.01"},
      {"max_iters", "500"},
      {"tol", "1e-5"},
      // forecaster
      {"d", "64"},
      {"m", "6"},
      {"lookback", "512"},
      {"horizon", "96"},
      // data split
      {"ratio_train", "0.7"},
      {"ratio_val", "0.1"},
      {"ratio_test", "0.2"},
      // optimizer
      {"lr", "1e-3"},
      {"beta1", "0.9"},
      {"beta2", "0.999"},
      {"eps", "1e-8"},
      {"weight_decay", "1e-4"},
      {"max_epochs", "100"},
      {"batch_size", "32"},
      {"patience", "5"},
      {"max_train_windows", "0"},
      {"max_val_windows", "0"},
      // synthetic data
      {"entities", "4"},
      {"steps", "2048"},
      {"k_true", "4"},
      {"sigma", "0.05"},
      {"seed", "0"},
  };
  return c;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path);
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto& s = get(key);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "' expects a real number, got '" + s + "'");
  return v;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  const auto& s = get(key);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

std::uint64_t RunConfig::seed() const {
  const auto v = integer("seed");
  if (v < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

SplitRatio RunConfig::ratio() const {
  return {real("ratio_train"), real("ratio_val"), real("ratio_test")};
}

OptimizerConfig RunConfig::optimizer() const {
  OptimizerConfig o;
  o.lr = real("lr");
  o.beta1 = real("beta1");
  o.beta2 = real("beta2");
  o.eps = real("eps");
  o.weight_decay = real("weight_decay");
  o.max_epochs = static_cast<int>(integer("max_epochs"));
  o.batch_size = static_cast<int>(integer("batch_size"));
  o.patience = static_cast<int>(integer("patience"));
  o.seed = seed();
  o.validate();
  return o;
}

ClusterOptions RunConfig::cluster() const {
  ClusterOptions c;
  c.k = integer("k");
  c.alpha = real("alpha");
  c.opt = OptimizerConfig::for_clustering();
  c.opt.lr = real("cluster_lr");
  c.opt.seed = seed();
  c.opt.validate();
  c.max_iters = static_cast<int>(integer("max_iters"));
  c.tol = real("tol");
  c.seed = seed();
  if (c.k < 1) throw ConfigError("k must be at least 1");
  if (c.alpha < 0) throw ConfigError("alpha must be non-negative");
  if (c.max_iters < 0) throw ConfigError("max_iters must be non-negative");
  return c;
}

SyntheticOptions RunConfig::synthetic() const {
  SyntheticOptions s;
  s.entities = integer("entities");
  s.steps = integer("steps");
  s.k_true = integer("k_true");
  s.noise_sigma = real("sigma");
  s.seed = seed();
  s.p = integer("p");
  return s;
}

}  // namespace focus
