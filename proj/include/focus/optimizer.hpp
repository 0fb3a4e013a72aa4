#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace focus {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  int max_epochs = 100;
  int batch_size = 32;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;

  /// Defaults used for prototype refinement: larger step, no decay.
  static OptimizerConfig for_clustering();
};

/// Decoupled weight decay Adam. Moment buffers are keyed by the position of
/// each tensor in the list passed to step(), so callers must pass tensors in
/// a stable order.
class AdamW {
 public:
  explicit AdamW(OptimizerConfig cfg);

  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<const Eigen::MatrixXd*>& grads);

  long steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

}  // namespace focus
