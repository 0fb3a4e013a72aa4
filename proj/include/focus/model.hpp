#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "focus/attention.hpp"
#include "focus/clustering.hpp"
#include "focus/data.hpp"

namespace focus {

struct ModelHyper {
  Index p = 16;         // segment length
  Index d = 64;         // embedding width
  Index m = 6;          // readout queries
  Index k = 16;         // prototype count (recorded; weights do not depend on it)
  Index lookback = 512;
  Index horizon = 96;
  Index entities = 7;

  Index segments() const { return lookback / p; }
  void validate() const;
};

/// Every trainable tensor of the dual-branch forecaster. Row vectors are kept
/// as 1 x n matrices so all tensors share one type.
struct ModelParams {
  ModelHyper hyper;
  MatrixXd w_in;                       // p x d, shared segment embedding
  ProtoAttnWeights<double> temporal;   // d -> d
  ProtoAttnWeights<double> entity;     // d -> d
  MatrixXd ln_t_gain, ln_t_bias;       // 1 x d
  MatrixXd ln_e_gain, ln_e_bias;       // 1 x d
  MatrixXd q_read;                     // m x d
  MatrixXd gate_w;                     // 2d x d
  MatrixXd gate_b;                     // 1 x d
  MatrixXd head_w;                     // (m d) x horizon
  MatrixXd head_b;                     // 1 x horizon

  /// Fan-in uniform weights, unit gains, zero layer-norm and gate biases.
  static ModelParams init(const ModelHyper& hyper, std::uint64_t seed);
  /// Same shapes, all zeros (gradient accumulators).
  static ModelParams zeros(const ModelHyper& hyper);

  /// Named tensors in a fixed order.
  std::vector<std::pair<std::string, MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const MatrixXd*>> tensors() const;

  Index parameter_count() const;
  void check_shapes() const;
};

using ModelGrads = ModelParams;

struct ForecastBatch {
  MatrixXd prediction;   // horizon x N, normalized space
  MatrixXd denormalized; // horizon x N
};

/// Forward intermediates kept for the reverse pass.
struct ForwardTape {
  Index segments = 0;
  std::vector<MatrixXd> raw;                  // N x (l x p)
  std::vector<AssignmentMatrix> temporal_assign;  // N, over the l windows
  std::vector<AssignmentMatrix> entity_assign;    // l, over the N entities
  MatrixXd proto_tokens;                      // k x d
  MatrixXd queries_t, queries_e;              // k x d
  std::vector<MatrixXd> embed;                // N x (l x d)

  std::vector<ProtoAttnCache<double>> attn_t;   // N
  std::vector<LayerNormCache<double>> norm_t;   // N
  std::vector<MatrixXd> h_t;                    // N x (l x d)

  std::vector<MatrixXd> entity_tokens;          // l x (N x d)
  std::vector<ProtoAttnCache<double>> attn_e;   // l
  std::vector<LayerNormCache<double>> norm_e;   // l
  std::vector<MatrixXd> h_e;                    // l x (N x d)

  // Fusion, per entity.
  std::vector<MatrixXd> h_e_by_entity;          // N x (l x d)
  std::vector<MatrixXd> read_t, read_e;         // N x (m x l)
  std::vector<MatrixXd> fused_t, fused_e;       // N x (m x d)
  std::vector<MatrixXd> gate;                   // N x (m x d)
  std::vector<MatrixXd> blended;                // N x (m x d)

  MatrixXd prediction;                          // horizon x N
};

/// Raw segments of the most recent p * floor(L / p) steps, one l x p block per entity.
std::vector<MatrixXd> entity_segments(const MatrixXd& lookback, Index p);

/// Temporal features, one l x d block per entity.
std::vector<MatrixXd> extract_temporal(const MatrixXd& lookback, const ModelParams& params,
                                       const PrototypeSet& protos);

/// Entity features, one N x d block per time window.
std::vector<MatrixXd> extract_entity(const MatrixXd& lookback, const ModelParams& params,
                                     const PrototypeSet& protos);

/// Readout-query fusion and the per-entity head; returns horizon x N.
MatrixXd fuse_and_forecast(const std::vector<MatrixXd>& h_t, const std::vector<MatrixXd>& h_e,
                           const ModelParams& params);

/// Full forward pass in normalized space; fills the tape when given.
MatrixXd forward(const MatrixXd& lookback, const ModelParams& params,
                 const PrototypeSet& protos, ForwardTape* tape = nullptr);

/// Forward plus denormalization with the given train statistics.
ForecastBatch forecast(const MatrixXd& lookback, const ModelParams& params,
                       const PrototypeSet& protos, const NormStats& stats);

/// Accumulates parameter gradients for an upstream gradient on the prediction.
void backward(const ForwardTape& tape, const ModelParams& params, const PrototypeSet& protos,
              const MatrixXd& d_prediction, ModelGrads& grads);

/// Per-instance multiply-accumulate count of forward(): affine in l and in N.
FlopCount count_model_flops(const ModelHyper& hyper, Index segments, Index entities);

/// Bytes of fusion intermediates per entity (m*l weights plus m*d features, per branch).
std::int64_t fusion_intermediate_bytes(Index m, Index segments, Index d);

/// Sum of forward intermediate sizes on one instance.
std::int64_t model_peak_bytes(const ModelHyper& hyper, Index segments, Index entities);

}  // namespace focus
