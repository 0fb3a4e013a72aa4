#include "focus/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "focus/error.hpp"
#include "focus/rng.hpp"

namespace focus {

namespace {

// Centered, unit-norm copies of each row; rows whose centered norm falls under
// the floor are flagged constant and left zero.
struct CenteredRows {
  MatrixXd unit;
  VectorXd norm;
  std::vector<bool> constant;
};

CenteredRows center_rows(const MatrixXd& x) {
  CenteredRows c;
  c.unit = x.colwise() - x.rowwise().mean();
  c.norm = c.unit.rowwise().norm();
  c.constant.resize(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    const bool flat = c.norm(i) < kConstantNormFloor;
    c.constant[static_cast<std::size_t>(i)] = flat;
    if (flat)
      c.unit.row(i).setZero();
    else
      c.unit.row(i) /= c.norm(i);
  }
  return c;
}

double unit_corr(const CenteredRows& a, Index i, const CenteredRows& b, Index j) {
  if (a.constant[static_cast<std::size_t>(i)] || b.constant[static_cast<std::size_t>(j)])
    return 0.0;
  return std::clamp(a.unit.row(i).dot(b.unit.row(j)), -1.0, 1.0);
}

void check_shapes(const MatrixXd& segments, const MatrixXd& prototypes) {
  if (segments.cols() != prototypes.cols())
    throw ContractError("segment length " + std::to_string(segments.cols()) +
                        " does not match prototype length " +
                        std::to_string(prototypes.cols()));
}

}  // namespace

void PrototypeSet::validate() const {
  if (k() < 1) throw ConfigError("prototype set needs k >= 1");
  if (p() < 2) throw ConfigError("prototype set needs p >= 2");
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (!prototypes.allFinite()) throw NumericalError("prototype set has non-finite entries");
}

BucketState assign(const MatrixXd& segments, const MatrixXd& prototypes, double alpha) {
  check_shapes(segments, prototypes);
  const Index n = segments.rows();
  const Index k = prototypes.rows();
  const auto cs = center_rows(segments);
  const auto cp = center_rows(prototypes);

  BucketState b;
  b.assignment.resize(static_cast<std::size_t>(n));
  b.bucket_sizes.assign(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) {
      const double d = (segments.row(i) - prototypes.row(j)).squaredNorm() +
                       alpha * (1.0 - unit_corr(cs, i, cp, j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    b.assignment[static_cast<std::size_t>(i)] = best;
    ++b.bucket_sizes[static_cast<std::size_t>(best)];
  }
  return b;
}

MatrixXd bucket_means(const MatrixXd& segments, const BucketState& buckets, Index k) {
  MatrixXd means = MatrixXd::Zero(k, segments.cols());
  for (Index i = 0; i < segments.rows(); ++i)
    means.row(buckets.assignment[static_cast<std::size_t>(i)]) += segments.row(i);
  for (Index j = 0; j < k; ++j) {
    const auto size = buckets.bucket_sizes[static_cast<std::size_t>(j)];
    if (size > 0) means.row(j) /= static_cast<double>(size);
  }
  return means;
}

ClusteringLoss clustering_loss(const MatrixXd& segments, const MatrixXd& prototypes,
                               double alpha, const BucketState& buckets) {
  check_shapes(segments, prototypes);
  const Index k = prototypes.rows();
  const auto means = bucket_means(segments, buckets, k);
  const auto cs = center_rows(segments);
  const auto cp = center_rows(prototypes);

  ClusteringLoss loss;
  VectorXd corr_sum = VectorXd::Zero(k);
  for (Index i = 0; i < segments.rows(); ++i) {
    const Index j = buckets.assignment[static_cast<std::size_t>(i)];
    corr_sum(j) += unit_corr(cs, i, cp, j);
  }
  for (Index j = 0; j < k; ++j) {
    const auto size = buckets.bucket_sizes[static_cast<std::size_t>(j)];
    if (size == 0) continue;
    loss.rec += (prototypes.row(j) - means.row(j)).squaredNorm();
    loss.corr -= corr_sum(j) / static_cast<double>(size);
  }
  loss.total = loss.rec + alpha * loss.corr;
  return loss;
}

MatrixXd clustering_gradient(const MatrixXd& segments, const MatrixXd& prototypes,
                             double alpha, const BucketState& buckets) {
  check_shapes(segments, prototypes);
  const Index k = prototypes.rows();
  const auto means = bucket_means(segments, buckets, k);
  const auto cs = center_rows(segments);
  const auto cp = center_rows(prototypes);

  // d corr(s, c) / dc = (s_hat - r * c_hat) / ||c - mean(c)||
  MatrixXd corr_grad = MatrixXd::Zero(k, prototypes.cols());
  for (Index i = 0; i < segments.rows(); ++i) {
    const Index j = buckets.assignment[static_cast<std::size_t>(i)];
    if (cs.constant[static_cast<std::size_t>(i)] || cp.constant[static_cast<std::size_t>(j)])
      continue;
    const double r = cs.unit.row(i).dot(cp.unit.row(j));
    corr_grad.row(j) += (cs.unit.row(i) - r * cp.unit.row(j)) / cp.norm(j);
  }

  MatrixXd grad = MatrixXd::Zero(k, prototypes.cols());
  for (Index j = 0; j < k; ++j) {
    const auto size = buckets.bucket_sizes[static_cast<std::size_t>(j)];
    if (size == 0) continue;
    grad.row(j) = 2.0 * (prototypes.row(j) - means.row(j)) -
                  alpha * corr_grad.row(j) / static_cast<double>(size);
  }
  return grad;
}

double refreshed_loss(const MatrixXd& segments, const MatrixXd& prototypes, double alpha) {
  return clustering_loss(segments, prototypes, alpha, assign(segments, prototypes, alpha)).total;
}

MatrixXd initial_prototypes(const MatrixXd& segments, Index k, std::uint64_t seed) {
  const Index n = segments.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto rng = stage_rng(seed, "init");
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Index> picked;
  std::vector<Index> duplicates;
  for (Index idx : order) {
    if (static_cast<Index>(picked.size()) == k) break;
    const bool seen = std::any_of(picked.begin(), picked.end(), [&](Index q) {
      return segments.row(q) == segments.row(idx);
    });
    (seen ? duplicates : picked).push_back(idx);
  }
  for (std::size_t i = 0; static_cast<Index>(picked.size()) < k; ++i)
    picked.push_back(duplicates[i]);

  MatrixXd protos(k, segments.cols());
  for (Index j = 0; j < k; ++j) protos.row(j) = segments.row(picked[static_cast<std::size_t>(j)]);
  return protos;
}

namespace {

// Moves each empty prototype onto the segment currently farthest from its
// own prototype, taking segments only from buckets that keep a member.
bool reseed_empty(const MatrixXd& segments, MatrixXd& protos, double alpha,
                  BucketState& buckets) {
  bool changed = false;
  const Index k = protos.rows();
  std::vector<bool> used(static_cast<std::size_t>(segments.rows()), false);
  for (Index j = 0; j < k; ++j) {
    if (buckets.bucket_sizes[static_cast<std::size_t>(j)] > 0) continue;
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < segments.rows(); ++i) {
      const auto owner = buckets.assignment[static_cast<std::size_t>(i)];
      if (used[static_cast<std::size_t>(i)] || buckets.bucket_sizes[static_cast<std::size_t>(owner)] < 2)
        continue;
      const double d = segment_distance(segments.row(i), protos.row(owner), alpha);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) break;
    const auto owner = buckets.assignment[static_cast<std::size_t>(far)];
    protos.row(j) = segments.row(far);
    used[static_cast<std::size_t>(far)] = true;
    --buckets.bucket_sizes[static_cast<std::size_t>(owner)];
    ++buckets.bucket_sizes[static_cast<std::size_t>(j)];
    buckets.assignment[static_cast<std::size_t>(far)] = j;
    changed = true;
  }
  return changed;
}

}  // namespace

PrototypeSet fit(const MatrixXd& segments, const ClusterOptions& opt) {
  if (opt.k < 1) throw ConfigError("k must be at least 1");
  if (segments.cols() < 2) throw ConfigError("segment length p must be at least 2");
  if (opt.k > segments.rows())
    throw ConfigError("k=" + std::to_string(opt.k) + " exceeds the segment count " +
                      std::to_string(segments.rows()));
  if (!(opt.alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (opt.max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (!segments.allFinite()) throw NumericalError("segments contain non-finite values");

  MatrixXd protos = initial_prototypes(segments, opt.k, opt.seed);
  PrototypeSet best{protos, opt.alpha, {0, refreshed_loss(segments, protos, opt.alpha), opt.seed}};
  if (opt.max_iters == 0) return best;

  AdamW adam(opt.opt);
  std::vector<double> history;
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    auto buckets = assign(segments, protos, opt.alpha);
    if (reseed_empty(segments, protos, opt.alpha, buckets))
      buckets = assign(segments, protos, opt.alpha);

    const double loss = clustering_loss(segments, protos, opt.alpha, buckets).total;
    if (!std::isfinite(loss)) throw NumericalError("clustering loss became non-finite");
    if (loss < best.fit_meta.final_loss) {
      best.prototypes = protos;
      best.fit_meta.final_loss = loss;
    }
    // The loss is not monotone across reassignments, so convergence compares
    // the mean loss of the latest window with the window before it and stops
    // once the two agree to within tol.
    history.push_back(loss);
    const auto w = static_cast<std::size_t>(opt.tol_window);
    if (history.size() >= 2 * w) {
      const auto end = history.end();
      const double recent = std::accumulate(end - w, end, 0.0) / static_cast<double>(w);
      const double before = std::accumulate(end - 2 * w, end - w, 0.0) / static_cast<double>(w);
      const double change = std::abs(before - recent) / std::max(std::abs(before), 1e-300);
      if (change < opt.tol) break;
    }

    const MatrixXd grad = clustering_gradient(segments, protos, opt.alpha, buckets);
    adam.step({&protos}, {&grad});
  }

  const double last = refreshed_loss(segments, protos, opt.alpha);
  if (last < best.fit_meta.final_loss) {
    best.prototypes = protos;
    best.fit_meta.final_loss = last;
  }
  best.fit_meta.iterations = static_cast<int>(adam.steps_taken());
  return best;
}

}  // namespace focus
