#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "focus/clustering.hpp"
#include "focus/data.hpp"
#include "focus/model.hpp"
#include "focus/optimizer.hpp"

namespace focus {

double mse(const MatrixXd& pred, const MatrixXd& target);
double mae(const MatrixXd& pred, const MatrixXd& target);

struct ErrorMetrics {
  double mse = 0.0;
  double mae = 0.0;
  Index windows = 0;
};

/// MSE of one instance plus its parameter gradients, accumulated into `grads`
/// after scaling by `weight`.
double loss_and_gradient(const MatrixXd& lookback, const MatrixXd& target,
                         const ModelParams& params, const PrototypeSet& protos, ModelGrads& grads,
                         double weight = 1.0);

/// Gradients of MSE(forward(x), target) with respect to every tensor.
ModelGrads compute_gradients(const MatrixXd& lookback, const MatrixXd& target,
                             const ModelParams& params, const PrototypeSet& protos);

/// Throws NumericalError naming the first tensor with a non-finite entry.
void check_finite(const ModelParams& tensors, const std::string& what);

/// Average error over every window of a partition (normalized space).
ErrorMetrics evaluate(const TimeSeriesDataset& ds, Partition part, const ModelParams& params,
                      const PrototypeSet& protos);

/// Error of repeating the last observed value over the horizon.
ErrorMetrics persistence_baseline(const TimeSeriesDataset& ds, Partition part, Index lookback,
                                  Index horizon);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double wall_seconds = 0.0;
  double test_mse = 0.0;
  double test_mae = 0.0;

  /// One "epoch=.. train_mse=.. val_mse=.." line per epoch.
  void write_records(std::ostream& out) const;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

struct TrainOptions {
  OptimizerConfig opt;
  // Caps the windows visited per epoch (0 = all); the subset is reshuffled each epoch.
  Index max_train_windows = 0;
  // Caps validation windows (0 = all); a fixed evenly spaced subset.
  Index max_val_windows = 0;
  std::ostream* progress = nullptr;
};

/// Mini-batch AdamW on MSE with early stopping on validation MSE; returns the
/// best-validation parameters. Prototypes stay frozen.
TrainResult train(const TimeSeriesDataset& ds, const PrototypeSet& protos, const ModelHyper& hyper,
                  const TrainOptions& options);

struct GradCheckConfig {
  Index entities = 3;
  Index segments = 4;
  Index k = 4;
  Index d = 8;
  Index m = 2;
  Index horizon = 4;
  Index p = 4;
  double h = 1e-4;
  std::uint64_t seed = 0;
};

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  Index entries = 0;
};

/// Relative error of an analytic entry against its finite-difference value,
/// with a 1e-6 magnitude floor for entries that are numerically zero.
double relative_error(double analytic, double numeric);

/// Central finite differences against backward() on a seeded toy problem.
std::vector<TensorCheck> gradient_check(const GradCheckConfig& cfg);

}  // namespace focus
