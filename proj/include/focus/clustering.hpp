#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "focus/data.hpp"
#include "focus/optimizer.hpp"

namespace focus {

/// Centered norms below this are treated as constant vectors.
inline constexpr double kConstantNormFloor = 1e-12;

/// Pearson correlation of two equal-length vectors; 0 when either is constant.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson_corr(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const auto ca = (a.array() - a.mean()).matrix().eval();
  const auto cb = (b.array() - b.mean()).matrix().eval();
  const Scalar na = ca.norm();
  const Scalar nb = cb.norm();
  if (na < Scalar(kConstantNormFloor) || nb < Scalar(kConstantNormFloor)) return Scalar(0);
  const Scalar r = ca.cwiseProduct(cb).sum() / (na * nb);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Composite distance ||seg - proto||^2 + alpha * (1 - corr(seg, proto)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar segment_distance(const Eigen::MatrixBase<DerivedA>& seg,
                                           const Eigen::MatrixBase<DerivedB>& proto,
                                           typename DerivedA::Scalar alpha) {
  using Scalar = typename DerivedA::Scalar;
  return (seg - proto).squaredNorm() + alpha * (Scalar(1) - pearson_corr(seg, proto));
}

struct FitMeta {
  int iterations = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

/// k prototypes of length p plus the correlation weight used to fit them.
struct PrototypeSet {
  MatrixXd prototypes;  // k x p
  double alpha = 0.2;
  FitMeta fit_meta;

  Index k() const { return prototypes.rows(); }
  Index p() const { return prototypes.cols(); }

  /// Throws ConfigError when k < 1, p < 2, alpha < 0 or any entry is non-finite.
  void validate() const;
};

struct BucketState {
  std::vector<Index> assignment;    // per segment
  std::vector<Index> bucket_sizes;  // per prototype
};

struct ClusteringLoss {
  double total = 0.0;
  double rec = 0.0;
  double corr = 0.0;
};

/// Nearest prototype under segment_distance for each row; ties go to the
/// lowest prototype index.
BucketState assign(const MatrixXd& segments, const MatrixXd& prototypes, double alpha);
inline BucketState assign(const SegmentMatrix& segs, const PrototypeSet& protos) {
  return assign(segs.segments, protos.prototypes, protos.alpha);
}

/// Per-bucket mean segments (k x p). Rows of empty buckets are zero.
MatrixXd bucket_means(const MatrixXd& segments, const BucketState& buckets, Index k);

/// rec = sum_j ||c_j - mean(B_j)||^2, corr = -sum_j mean_{s in B_j} corr(s, c_j),
/// total = rec + alpha * corr. Empty buckets contribute nothing.
ClusteringLoss clustering_loss(const MatrixXd& segments, const MatrixXd& prototypes,
                               double alpha, const BucketState& buckets);

/// Gradient of clustering_loss().total with respect to the prototypes, with
/// the assignment and the bucket means held fixed.
MatrixXd clustering_gradient(const MatrixXd& segments, const MatrixXd& prototypes,
                             double alpha, const BucketState& buckets);

struct ClusterOptions {
  Index k = 16;
  double alpha = 0.2;
  OptimizerConfig opt = OptimizerConfig::for_clustering();
  int max_iters = 500;
  double tol = 1e-5;
  int tol_window = 10;
  std::uint64_t seed = 0;
};

/// k rows drawn uniformly without replacement, skipping rows whose values
/// duplicate an earlier pick while enough distinct rows remain.
MatrixXd initial_prototypes(const MatrixXd& segments, Index k, std::uint64_t seed);

/// Alternates assignment with one AdamW step on the prototypes. Returns the
/// prototypes with the lowest refreshed-assignment loss seen during the run.
PrototypeSet fit(const MatrixXd& segments, const ClusterOptions& opt);
inline PrototypeSet fit(const SegmentMatrix& segs, const ClusterOptions& opt) {
  return fit(segs.segments, opt);
}

/// Total loss with assignments recomputed for the given prototypes.
double refreshed_loss(const MatrixXd& segments, const MatrixXd& prototypes, double alpha);

}  // namespace focus
