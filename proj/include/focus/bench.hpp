#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "focus/attention.hpp"
#include "focus/clustering.hpp"
#include "focus/data.hpp"
#include "focus/model.hpp"
#include "focus/training.hpp"

namespace focus {

enum class SweepMode { kProtoAttn, kFullAttn, kEndToEnd };

SweepMode parse_sweep_mode(const std::string& name);
std::string to_string(SweepMode mode);

struct SweepFixed {
  Index k = 16;
  Index d = 64;
  Index p = 16;
  Index m = 6;
  Index entities = 7;   // end_to_end only
  Index horizon = 96;   // end_to_end only
};

struct TimingOptions {
  int warmups = 2;
  int repeats = 7;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string experiment;
  Index size = 0;
  double median_ns = 0.0;
  std::int64_t flops = 0;
  std::int64_t peak_bytes = 0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log-log residuals
};

/// Least-squares fit of log(y) against log(x); needs at least three points.
SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Relative deviation of three points from a common line (0 when collinear).
double collinearity_deviation(double x0, double y0, double x1, double y1, double x2, double y2);

struct BenchReport {
  std::vector<BenchRow> rows;
  SlopeFit time_fit;
  SlopeFit flop_fit;

  /// CSV with header experiment,size,median_ns,flops,peak_bytes,slope; the
  /// wall-clock slope is printed on the last row only.
  void write_csv(std::ostream& out, bool header = true) const;
};

/// Times forward passes over ascending sizes (segments l), sizes interleaved
/// within each repetition, median over repeats after warmups.
BenchReport scaling_sweep(SweepMode mode, const std::vector<Index>& sizes, const SweepFixed& fixed,
                          const TimingOptions& timing = {});

struct LowRankProbe {
  Index l = 512;
  Index p = 32;
  Index r = 8;
  Index k = 4;
  int trials = 50;
  double alpha = 0.2;
  int max_iters = 200;
};

/// ||P~ w - P w|| / ||P w|| where P~ replaces each row of P by its prototype.
double approximation_error(const MatrixXd& rows, const PrototypeSet& protos, const VectorXd& w);

/// Per-trial errors: P = U V with orthonormal U (l x r) and Gaussian V
/// (r x p), prototypes fitted to P's rows, w Gaussian.
std::vector<double> lowrank_probe(const LowRankProbe& cfg, std::uint64_t seed);

double median(std::vector<double> values);

/// Mean over templates of the best Pearson correlation with any prototype.
double template_correlation(const MatrixXd& prototypes, const MatrixXd& templates);

/// Planted data whose templates share a zero mean but differ in shape, with
/// per-block level offsets at a scale where the correlation term matters.
SyntheticData separating_dataset(std::uint64_t seed, Index entities = 4, Index steps = 1024);

struct AblationConfig {
  Index p = 16;
  Index k = 4;
  double alpha = 0.2;
  int max_iters = 500;
  std::uint64_t seed = 0;
  bool train_models = false;
  ModelHyper hyper;          // used when train_models is set
  TrainOptions train;
};

struct AblationRow {
  std::string label;   // "rec_only" or "rec_corr"
  double alpha = 0.0;
  PrototypeSet protos;
  std::optional<double> template_corr;
  std::optional<double> test_mse;
  std::optional<double> test_mae;
};

/// Fits prototypes on the train partition with alpha = 0 and alpha = cfg.alpha
/// (everything else equal) and compares them; optionally trains a model on each.
std::vector<AblationRow> offline_ablation(const TimeSeriesDataset& ds, const AblationConfig& cfg,
                                          const MatrixXd* templates = nullptr);

}  // namespace focus
