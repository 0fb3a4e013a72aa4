#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "focus/clustering.hpp"
#include "focus/data.hpp"
#include "focus/model.hpp"

namespace focus {

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1, kI64 = 2 };

/// One named tensor. Exactly one of the payload vectors is used, chosen by dtype.
struct ContainerEntry {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;
  std::vector<float> f32;
  std::vector<std::int64_t> i64;

  std::uint64_t element_count() const;
};

/// "FOCS" file: magic, u32 version (1), u32 entry count, then per entry
/// name (u32 length + UTF-8), dtype (u8), rank (u32), dims (u64 each) and a
/// row-major little-endian payload. All integers little-endian.
class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put_matrix(const std::string& name, const MatrixXd& m, DType dtype = DType::kF64);
  void put_scalar(const std::string& name, double v);
  void put_integer(const std::string& name, std::int64_t v);
  void put(ContainerEntry entry);

  bool contains(const std::string& name) const;
  const ContainerEntry& at(const std::string& name) const;
  MatrixXd matrix(const std::string& name) const;
  double scalar(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;

  const std::vector<ContainerEntry>& entries() const { return entries_; }

  std::string serialize() const;
  static Container parse(std::string_view bytes);

  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  std::vector<ContainerEntry> entries_;
};

/// Writes "prototypes", "alpha", "p", "k", "seed" (plus fit metadata) under prefix.
void put_prototypes(Container& c, const PrototypeSet& protos, const std::string& prefix = "");
PrototypeSet get_prototypes(const Container& c, const std::string& prefix = "");

void save_prototypes(const std::string& path, const PrototypeSet& protos);
PrototypeSet load_prototypes(const std::string& path);

/// Self-contained model file: every tensor, hyperparameters under "hyper/",
/// prototypes under "protos/", train statistics under "norm/".
struct ModelBundle {
  ModelParams params;
  PrototypeSet protos;
  std::optional<NormStats> norm;
  SplitRatio ratio;
};

Container bundle_to_container(const ModelBundle& bundle, DType dtype = DType::kF64);
ModelBundle bundle_from_container(const Container& c);

void save_model(const std::string& path, const ModelBundle& bundle, DType dtype = DType::kF64);
ModelBundle load_model(const std::string& path);

}  // namespace focus
