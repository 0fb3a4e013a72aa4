#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace focus {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Time indices [0, train_end) train, [train_end, val_end) validation,
/// [val_end, T) test.
struct SplitIndices {
  Index train_end = 0;
  Index val_end = 0;
};

struct SplitRatio {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct NormStats {
  VectorXd mean;  // per entity
  VectorXd std;   // per entity, floored to 1 when the raw value is < 1e-8
};

enum class Partition { kTrain, kVal, kTest };

Partition parse_partition(const std::string& name);

/// T x N series, rows in time order.
struct TimeSeriesDataset {
  MatrixXd values;
  std::vector<std::string> entity_names;
  std::string frequency;
  std::optional<SplitIndices> split;
  std::optional<NormStats> norm_stats;

  Index steps() const { return values.rows(); }
  Index entities() const { return values.cols(); }

  /// [begin, end) time range of a partition; requires a split.
  std::pair<Index, Index> partition_range(Partition part) const;
};

struct WindowedInstance {
  MatrixXd lookback;  // L x N
  MatrixXd target;    // L_f x N
  Index origin = 0;   // time index of lookback row 0
};

enum class SegmentAxis { kTemporal, kEntity };

struct SegmentProvenance {
  Index entity = 0;
  Index window = 0;
};

/// n x p matrix of non-overlapping segments.
struct SegmentMatrix {
  MatrixXd segments;
  std::vector<SegmentProvenance> provenance;

  Index count() const { return segments.rows(); }
  Index length() const { return segments.cols(); }
};

/// Reads a headered CSV (first row entity names, one time step per row).
TimeSeriesDataset load_csv(const std::string& path);
TimeSeriesDataset parse_csv(const std::string& text);

/// Writes the same format load_csv reads; values printed round-trip exact.
void save_csv(const std::string& path, const MatrixXd& values,
              const std::vector<std::string>& names);

SplitIndices compute_split(Index steps, const SplitRatio& ratio);

/// Sets the split by floor(ratio * T), z-scores every entity with
/// train-partition statistics, and keeps the statistics.
TimeSeriesDataset split_and_normalize(TimeSeriesDataset ds,
                                      const SplitRatio& ratio);

NormStats train_statistics(const MatrixXd& train_rows);
MatrixXd normalize(const MatrixXd& values, const NormStats& stats);
MatrixXd denormalize(const MatrixXd& values, const NormStats& stats);

/// Number of steps kept when `length` is cut to a multiple of p
/// (the oldest steps are dropped).
inline Index usable_length(Index length, Index p) { return p * (length / p); }

/// Non-overlapping segmentation of an L x N block. Temporal rows are ordered
/// entity-major (entity 0 windows 0..l-1, then entity 1, ...). Entity rows
/// are ordered window-major (window 0 entities 0..N-1, then window 1, ...).
/// When p does not divide L the oldest L mod p steps are dropped.
SegmentMatrix segment(const MatrixXd& x, Index p,
                      SegmentAxis axis = SegmentAxis::kTemporal);

/// Inverse of temporal segmentation for an exact multiple of p.
MatrixXd reassemble(const SegmentMatrix& segs, Index entities);

/// Origins of every window of length L + L_f that fits inside the partition,
/// strided by one step.
std::vector<Index> window_origins(const TimeSeriesDataset& ds, Partition part,
                                  Index lookback, Index horizon);

WindowedInstance make_instance(const MatrixXd& values, Index origin,
                               Index lookback, Index horizon);

struct SyntheticOptions {
  Index entities = 4;
  Index steps = 2048;
  Index k_true = 4;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  Index p = 16;
  // Probability that the next block continues the cyclic template order
  // instead of jumping to a random template.
  double cycle_prob = 0.8;
  double amplitude = 1.0;
  // Half-width of a uniform level offset added to each block (0 = none).
  double level_spread = 0.0;
};

struct SyntheticData {
  TimeSeriesDataset dataset;
  MatrixXd templates;  // k_true x p
};

/// The fixed smooth templates: k rows of length p, zero mean, distinct shapes.
MatrixXd synthetic_templates(Index k, Index p);

/// Concatenates length-p templates (chosen by a seeded Markov chain per
/// entity) and adds i.i.d. Gaussian noise.
SyntheticData generate_synthetic(const SyntheticOptions& opt);

}  // namespace focus
