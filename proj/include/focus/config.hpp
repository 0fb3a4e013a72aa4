#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "focus/clustering.hpp"
#include "focus/data.hpp"
#include "focus/model.hpp"
#include "focus/optimizer.hpp"

namespace focus {

/// Flat key=value run configuration. Layers apply in call order, so the
/// usual sequence defaults() -> load_file() -> set() from flags gives
/// flag > file > default.
class RunConfig {
 public:
  static RunConfig defaults();

  /// Lines are key=value; blank lines and '#' comments are skipped.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);

  bool known(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t seed() const;

  std::vector<std::string> keys() const;

  SplitRatio ratio() const;
  OptimizerConfig optimizer() const;
  ClusterOptions cluster() const;
  SyntheticOptions synthetic() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace focus
