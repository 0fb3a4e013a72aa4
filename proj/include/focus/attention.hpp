#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "focus/clustering.hpp"
#include "focus/error.hpp"
#include "focus/kernels.hpp"
#include "focus/rng.hpp"

namespace focus {

/// Hard one-hot map from l segments to k prototype buckets.
struct AssignmentMatrix {
  std::vector<Index> indices;
  Index k = 0;

  Index rows() const { return static_cast<Index>(indices.size()); }
  Index operator[](Index i) const { return indices[static_cast<std::size_t>(i)]; }

  MatrixXd one_hot() const {
    MatrixXd a = MatrixXd::Zero(rows(), k);
    for (Index i = 0; i < rows(); ++i) a(i, (*this)[i]) = 1.0;
    return a;
  }
};

/// Assignment of raw (un-embedded) segments to their nearest prototype.
AssignmentMatrix build_assignment(const MatrixXd& raw_segments, const PrototypeSet& protos);

template <typename Scalar>
struct ProtoAttnWeights {
  Mat<Scalar> w_query;   // W_E, applied to prototype tokens
  Mat<Scalar> w_key;     // W_K
  Mat<Scalar> w_value;   // W_V
  Mat<Scalar> w_output;  // W_O

  Index input_dim() const { return w_key.rows(); }
  Index dim() const { return w_key.cols(); }
  Scalar scale() const { return Scalar(1) / std::sqrt(static_cast<Scalar>(dim())); }

  void check() const {
    const Index din = input_dim();
    const Index d = dim();
    if (d < 1) throw ContractError("attention dimension must be >= 1");
    if (w_query.rows() != din || w_query.cols() != d || w_value.rows() != din ||
        w_value.cols() != d || w_output.rows() != d || w_output.cols() != d)
      throw ContractError("ProtoAttn weights have inconsistent shapes");
  }

  /// Fan-in uniform initialization.
  static ProtoAttnWeights random(Index input_dim, Index dim, Rng& rng) {
    const Scalar in_bound = Scalar(1) / std::sqrt(static_cast<Scalar>(input_dim));
    const Scalar out_bound = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
    ProtoAttnWeights w;
    w.w_query = uniform_matrix<Scalar>(input_dim, dim, rng, in_bound);
    w.w_key = uniform_matrix<Scalar>(input_dim, dim, rng, in_bound);
    w.w_value = uniform_matrix<Scalar>(input_dim, dim, rng, in_bound);
    w.w_output = uniform_matrix<Scalar>(dim, dim, rng, out_bound);
    return w;
  }
};

/// Intermediates of one ProtoAttn call.
template <typename Scalar>
struct ProtoAttnCache {
  Mat<Scalar> keys;     // l x d
  Mat<Scalar> values;   // l x d
  Mat<Scalar> weights;  // k x l, rows sum to 1
  Mat<Scalar> bucket;   // k x d, weights * values
};

/// ProtoAttn with precomputed prototype queries (k x d):
///   out = A * softmax(Q K^T / sqrt(d)) * V * W_O.
/// Bucket outputs are projected once and gathered, so tokens that share a
/// bucket receive the same row bit for bit.
template <typename Scalar>
Mat<Scalar> proto_attention_with_queries(const Mat<Scalar>& tokens,
                                         const AssignmentMatrix& assignment,
                                         const Mat<Scalar>& queries,
                                         const ProtoAttnWeights<Scalar>& w,
                                         ProtoAttnCache<Scalar>* cache = nullptr) {
  if (tokens.cols() != w.input_dim())
    throw ContractError("ProtoAttn: token width " + std::to_string(tokens.cols()) +
                        " != weight input dim " + std::to_string(w.input_dim()));
  if (assignment.rows() != tokens.rows())
    throw ContractError("ProtoAttn: assignment rows do not match token count");
  if (queries.rows() != assignment.k || queries.cols() != w.dim())
    throw ContractError("ProtoAttn: prototype query shape mismatch");

  Mat<Scalar> keys = tokens * w.w_key;
  Mat<Scalar> values = tokens * w.w_value;
  Mat<Scalar> weights = softmax_rows((queries * keys.transpose()) * w.scale());
  Mat<Scalar> bucket = weights * values;
  const Mat<Scalar> projected = bucket * w.w_output;

  Mat<Scalar> out(tokens.rows(), w.dim());
  for (Index i = 0; i < tokens.rows(); ++i) out.row(i) = projected.row(assignment[i]);

  if (cache) {
    cache->keys = std::move(keys);
    cache->values = std::move(values);
    cache->weights = std::move(weights);
    cache->bucket = std::move(bucket);
  }
  return out;
}

/// ProtoAttn over tokens (l x d_in) with prototype tokens (k x d_in) in the
/// same input space; queries are prototype_tokens * W_E.
template <typename Scalar>
Mat<Scalar> proto_attention(const Mat<Scalar>& tokens, const AssignmentMatrix& assignment,
                            const Mat<Scalar>& prototype_tokens,
                            const ProtoAttnWeights<Scalar>& w) {
  w.check();
  if (prototype_tokens.cols() != w.input_dim())
    throw ContractError("ProtoAttn: prototype width does not match weight input dim");
  return proto_attention_with_queries<Scalar>(tokens, assignment,
                                              Mat<Scalar>(prototype_tokens * w.w_query), w);
}

template <typename Scalar>
struct ProtoAttnGrads {
  Mat<Scalar> d_tokens;   // l x d_in
  Mat<Scalar> d_queries;  // k x d
  Mat<Scalar> d_key, d_value, d_output;
};

/// Reverse pass of proto_attention_with_queries; the assignment is constant.
template <typename Scalar>
ProtoAttnGrads<Scalar> proto_attention_backward(const Mat<Scalar>& tokens,
                                                const AssignmentMatrix& assignment,
                                                const Mat<Scalar>& queries,
                                                const ProtoAttnWeights<Scalar>& w,
                                                const ProtoAttnCache<Scalar>& cache,
                                                const Mat<Scalar>& d_out) {
  const Index k = queries.rows();
  Mat<Scalar> d_projected = Mat<Scalar>::Zero(k, w.dim());
  for (Index i = 0; i < d_out.rows(); ++i) d_projected.row(assignment[i]) += d_out.row(i);

  ProtoAttnGrads<Scalar> g;
  g.d_output = cache.bucket.transpose() * d_projected;
  const Mat<Scalar> d_bucket = d_projected * w.w_output.transpose();
  const Mat<Scalar> d_weights = d_bucket * cache.values.transpose();
  const Mat<Scalar> d_values = cache.weights.transpose() * d_bucket;
  const Mat<Scalar> d_scores = softmax_rows_backward(cache.weights, d_weights) * w.scale();
  g.d_queries = d_scores * cache.keys;
  const Mat<Scalar> d_keys = d_scores.transpose() * queries;
  g.d_key = tokens.transpose() * d_keys;
  g.d_value = tokens.transpose() * d_values;
  g.d_tokens = d_keys * w.w_key.transpose() + d_values * w.w_value.transpose();
  return g;
}

/// Quadratic reference: every token is its own query (tokens * W_E).
template <typename Scalar>
Mat<Scalar> full_attention(const Mat<Scalar>& tokens, const ProtoAttnWeights<Scalar>& w) {
  w.check();
  if (tokens.cols() != w.input_dim()) throw ContractError("full attention: width mismatch");
  const Mat<Scalar> q = tokens * w.w_query;
  const Mat<Scalar> keys = tokens * w.w_key;
  const Mat<Scalar> values = tokens * w.w_value;
  const Mat<Scalar> weights = softmax_rows((q * keys.transpose()) * w.scale());
  return (weights * values) * w.w_output;
}

/// Multiply-accumulate counts of one ProtoAttn call, itemized by stage.
struct FlopCount {
  std::int64_t assignment = 0;   // composite distance of every segment/prototype pair
  std::int64_t projections = 0;  // C W_E, P W_K, P W_V and the output projection
  std::int64_t attention = 0;    // scores and weights * V
  std::int64_t scatter = 0;      // A * bucket outputs as a dense product
  std::int64_t layer = 0;        // residual / normalization / fusion terms (model counts only)

  std::int64_t total() const { return assignment + projections + attention + scatter + layer; }
};

/// Closed-form count for ProtoAttn over l segments of raw length p with k
/// prototypes and width d. Prototype-only terms: k*p (centering), 2*k*d^2.
FlopCount count_flops(std::int64_t l, std::int64_t k, std::int64_t d, std::int64_t p);

/// The same itemization for full softmax self-attention over l tokens.
FlopCount count_full_attention_flops(std::int64_t l, std::int64_t d);

/// Bytes of the live intermediates of one call (keys, values, weights, buckets, output).
std::int64_t proto_attention_peak_bytes(std::int64_t l, std::int64_t k, std::int64_t d);
std::int64_t full_attention_peak_bytes(std::int64_t l, std::int64_t d);

}  // namespace focus
