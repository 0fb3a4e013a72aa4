#include "focus/model.hpp"

#include <cmath>

#include "focus/error.hpp"
#include "focus/rng.hpp"

namespace focus {

void ModelHyper::validate() const {
  if (p < 2) throw ConfigError("p must be at least 2");
  if (d < 1) throw ConfigError("d must be at least 1");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (entities < 1) throw ConfigError("entity count must be at least 1");
  if (lookback < p)
    throw ConfigError("lookback " + std::to_string(lookback) + " is shorter than p=" +
                      std::to_string(p));
}

namespace {

MatrixXd fan_in_uniform(Index rows, Index cols, Index fan_in, Rng& rng) {
  return uniform_matrix<double>(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace

ModelParams ModelParams::init(const ModelHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  auto rng = stage_rng(seed, "init");
  const Index d = hyper.d;
  ModelParams w;
  w.hyper = hyper;
  w.w_in = fan_in_uniform(hyper.p, d, hyper.p, rng);
  w.temporal = ProtoAttnWeights<double>::random(d, d, rng);
  w.entity = ProtoAttnWeights<double>::random(d, d, rng);
  w.ln_t_gain = MatrixXd::Ones(1, d);
  w.ln_t_bias = MatrixXd::Zero(1, d);
  w.ln_e_gain = MatrixXd::Ones(1, d);
  w.ln_e_bias = MatrixXd::Zero(1, d);
  w.q_read = fan_in_uniform(hyper.m, d, d, rng);
  w.gate_w = fan_in_uniform(2 * d, d, 2 * d, rng);
  w.gate_b = MatrixXd::Zero(1, d);
  w.head_w = fan_in_uniform(hyper.m * d, hyper.horizon, hyper.m * d, rng);
  w.head_b = fan_in_uniform(1, hyper.horizon, hyper.m * d, rng);
  return w;
}

ModelParams ModelParams::zeros(const ModelHyper& hyper) {
  const Index d = hyper.d;
  ModelParams w;
  w.hyper = hyper;
  w.w_in = MatrixXd::Zero(hyper.p, d);
  for (auto* a : {&w.temporal, &w.entity}) {
    a->w_query = MatrixXd::Zero(d, d);
    a->w_key = MatrixXd::Zero(d, d);
    a->w_value = MatrixXd::Zero(d, d);
    a->w_output = MatrixXd::Zero(d, d);
  }
  w.ln_t_gain = MatrixXd::Zero(1, d);
  w.ln_t_bias = MatrixXd::Zero(1, d);
  w.ln_e_gain = MatrixXd::Zero(1, d);
  w.ln_e_bias = MatrixXd::Zero(1, d);
  w.q_read = MatrixXd::Zero(hyper.m, d);
  w.gate_w = MatrixXd::Zero(2 * d, d);
  w.gate_b = MatrixXd::Zero(1, d);
  w.head_w = MatrixXd::Zero(hyper.m * d, hyper.horizon);
  w.head_b = MatrixXd::Zero(1, hyper.horizon);
  return w;
}

std::vector<std::pair<std::string, MatrixXd*>> ModelParams::tensors() {
  return {{"w_in", &w_in},
          {"temporal/w_query", &temporal.w_query},
          {"temporal/w_key", &temporal.w_key},
          {"temporal/w_value", &temporal.w_value},
          {"temporal/w_output", &temporal.w_output},
          {"entity/w_query", &entity.w_query},
          {"entity/w_key", &entity.w_key},
          {"entity/w_value", &entity.w_value},
          {"entity/w_output", &entity.w_output},
          {"ln_t/gain", &ln_t_gain},
          {"ln_t/bias", &ln_t_bias},
          {"ln_e/gain", &ln_e_gain},
          {"ln_e/bias", &ln_e_bias},
          {"q_read", &q_read},
          {"gate_w", &gate_w},
          {"gate_b", &gate_b},
          {"head_w", &head_w},
          {"head_b", &head_b}};
}

std::vector<std::pair<std::string, const MatrixXd*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const MatrixXd*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->tensors()) out.emplace_back(name, t);
  return out;
}

Index ModelParams::parameter_count() const {
  Index n = 0;
  for (const auto& [name, t] : tensors()) n += t->size();
  return n;
}

void ModelParams::check_shapes() const {
  const auto ref = zeros(hyper);
  auto mine = tensors();
  auto theirs = ref.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const auto* a = mine[i].second;
    const auto* b = theirs[i].second;
    if (a->rows() != b->rows() || a->cols() != b->cols())
      throw ConfigError("tensor '" + mine[i].first + "' has shape " + std::to_string(a->rows()) +
                        "x" + std::to_string(a->cols()) + ", expected " +
                        std::to_string(b->rows()) + "x" + std::to_string(b->cols()));
    if (!a->allFinite()) throw NumericalError("tensor '" + mine[i].first + "' is not finite");
  }
}

std::vector<MatrixXd> entity_segments(const MatrixXd& lookback, Index p) {
  if (lookback.rows() < p)
    throw ContractError("lookback of " + std::to_string(lookback.rows()) +
                        " steps is shorter than p=" + std::to_string(p));
  const Index l = lookback.rows() / p;
  const Index offset = lookback.rows() - l * p;
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(lookback.cols()));
  for (Index e = 0; e < lookback.cols(); ++e) {
    // Column e, most recent l*p steps, reshaped so row w is window w.
    MatrixXd seg(l, p);
    for (Index w = 0; w < l; ++w)
      seg.row(w) = lookback.col(e).segment(offset + w * p, p).transpose();
    out.push_back(std::move(seg));
  }
  return out;
}

namespace {

void embed_stage(ForwardTape& tape, const MatrixXd& lookback, const ModelParams& params,
                 const PrototypeSet& protos) {
  const Index p = params.hyper.p;
  if (protos.p() != p)
    throw ContractError("prototype length " + std::to_string(protos.p()) +
                        " does not match model p=" + std::to_string(p));
  if (params.w_in.rows() != p || params.w_in.cols() != params.hyper.d)
    throw ContractError("w_in shape does not match hyperparameters");
  tape.raw = entity_segments(lookback, p);
  tape.segments = tape.raw.front().rows();
  const Index n = lookback.cols();
  const Index l = tape.segments;

  tape.temporal_assign.clear();
  tape.embed.clear();
  for (Index e = 0; e < n; ++e) {
    tape.temporal_assign.push_back(build_assignment(tape.raw[e], protos));
    tape.embed.push_back(tape.raw[e] * params.w_in);
  }
  // A segment is the same raw vector in both branches, so the entity-axis
  // assignment is a transpose of the temporal one.
  tape.entity_assign.assign(static_cast<std::size_t>(l), AssignmentMatrix{});
  for (Index w = 0; w < l; ++w) {
    auto& a = tape.entity_assign[static_cast<std::size_t>(w)];
    a.k = protos.k();
    a.indices.resize(static_cast<std::size_t>(n));
    for (Index e = 0; e < n; ++e) a.indices[static_cast<std::size_t>(e)] = tape.temporal_assign[e][w];
  }
  tape.proto_tokens = protos.prototypes * params.w_in;
}

void temporal_stage(ForwardTape& tape, const ModelParams& params) {
  const auto n = tape.embed.size();
  tape.queries_t = tape.proto_tokens * params.temporal.w_query;
  tape.attn_t.assign(n, {});
  tape.norm_t.assign(n, {});
  tape.h_t.assign(n, {});
  for (std::size_t e = 0; e < n; ++e) {
    const MatrixXd attn = proto_attention_with_queries<double>(
        tape.embed[e], tape.temporal_assign[e], tape.queries_t, params.temporal, &tape.attn_t[e]);
    tape.h_t[e] = layer_norm(attn + tape.embed[e], params.ln_t_gain, params.ln_t_bias, &tape.norm_t[e]);
  }
}

void entity_stage(ForwardTape& tape, const ModelParams& params) {
  const auto n = static_cast<Index>(tape.embed.size());
  const auto l = static_cast<std::size_t>(tape.segments);
  const Index d = params.hyper.d;
  tape.queries_e = tape.proto_tokens * params.entity.w_query;
  tape.entity_tokens.assign(l, {});
  tape.attn_e.assign(l, {});
  tape.norm_e.assign(l, {});
  tape.h_e.assign(l, {});
  for (std::size_t w = 0; w < l; ++w) {
    MatrixXd tokens(n, d);
    for (Index e = 0; e < n; ++e) tokens.row(e) = tape.embed[e].row(static_cast<Index>(w));
    const MatrixXd attn = proto_attention_with_queries<double>(
        tokens, tape.entity_assign[w], tape.queries_e, params.entity, &tape.attn_e[w]);
    tape.h_e[w] = layer_norm(attn + tokens, params.ln_e_gain, params.ln_e_bias, &tape.norm_e[w]);
    tape.entity_tokens[w] = std::move(tokens);
  }
}

void fusion_stage(ForwardTape& tape, const ModelParams& params) {
  const auto& hp = params.hyper;
  const Index d = hp.d;
  const Index m = hp.m;
  if (params.q_read.rows() != m || params.q_read.cols() != d)
    throw ContractError("readout query shape does not match hyperparameters");
  if (tape.h_e.empty() || tape.h_t.empty()) throw ContractError("fusion: empty feature tensors");
  const auto n = tape.h_t.size();
  const Index l = tape.h_t.front().rows();
  if (static_cast<Index>(tape.h_e.size()) != l)
    throw ContractError("fusion: temporal and entity features disagree on the window count");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  for (auto* v : {&tape.h_e_by_entity, &tape.read_t, &tape.read_e, &tape.fused_t, &tape.fused_e,
                  &tape.gate, &tape.blended})
    v->assign(n, {});
  tape.prediction.resize(hp.horizon, static_cast<Index>(n));

  for (std::size_t e = 0; e < n; ++e) {
    const MatrixXd& ht = tape.h_t[e];
    MatrixXd he(l, d);
    for (Index w = 0; w < l; ++w) {
      if (tape.h_e[static_cast<std::size_t>(w)].rows() != static_cast<Index>(n))
        throw ContractError("fusion: entity features disagree on the entity count");
      he.row(w) = tape.h_e[static_cast<std::size_t>(w)].row(static_cast<Index>(e));
    }

    tape.read_t[e] = softmax_rows((params.q_read * ht.transpose()) * scale);
    tape.read_e[e] = softmax_rows((params.q_read * he.transpose()) * scale);
    tape.fused_t[e] = tape.read_t[e] * ht;
    tape.fused_e[e] = tape.read_e[e] * he;

    MatrixXd joined(m, 2 * d);
    joined << tape.fused_t[e], tape.fused_e[e];
    MatrixXd logits = joined * params.gate_w;
    logits.rowwise() += params.gate_b.row(0);
    tape.gate[e] = logits.unaryExpr([](double x) { return sigmoid(x); });
    tape.blended[e] = tape.gate[e].cwiseProduct(tape.fused_t[e]) +
                      (1.0 - tape.gate[e].array()).matrix().cwiseProduct(tape.fused_e[e]);

    // Row-major flatten of the m x d block.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major =
        tape.blended[e];
    const Eigen::Map<const Eigen::RowVectorXd> flat_o(row_major.data(), m * d);
    tape.prediction.col(static_cast<Index>(e)) =
        (flat_o * params.head_w + params.head_b.row(0)).transpose();
    tape.h_e_by_entity[e] = std::move(he);
  }
}

}  // namespace

std::vector<MatrixXd> extract_temporal(const MatrixXd& lookback, const ModelParams& params,
                                       const PrototypeSet& protos) {
  ForwardTape tape;
  embed_stage(tape, lookback, params, protos);
  temporal_stage(tape, params);
  return tape.h_t;
}

std::vector<MatrixXd> extract_entity(const MatrixXd& lookback, const ModelParams& params,
                                     const PrototypeSet& protos) {
  ForwardTape tape;
  embed_stage(tape, lookback, params, protos);
  entity_stage(tape, params);
  return tape.h_e;
}

MatrixXd fuse_and_forecast(const std::vector<MatrixXd>& h_t, const std::vector<MatrixXd>& h_e,
                           const ModelParams& params) {
  ForwardTape tape;
  tape.h_t = h_t;
  tape.h_e = h_e;
  fusion_stage(tape, params);
  return tape.prediction;
}

MatrixXd forward(const MatrixXd& lookback, const ModelParams& params, const PrototypeSet& protos,
                 ForwardTape* tape) {
  ForwardTape local;
  ForwardTape& t = tape ? *tape : local;
  embed_stage(t, lookback, params, protos);
  temporal_stage(t, params);
  entity_stage(t, params);
  fusion_stage(t, params);
  return t.prediction;
}

ForecastBatch forecast(const MatrixXd& lookback, const ModelParams& params,
                       const PrototypeSet& protos, const NormStats& stats) {
  ForecastBatch out;
  out.prediction = forward(lookback, params, protos);
  out.denormalized = denormalize(out.prediction, stats);
  return out;
}

void backward(const ForwardTape& tape, const ModelParams& params, const PrototypeSet& protos,
              const MatrixXd& d_prediction, ModelGrads& grads) {
  const auto& hp = params.hyper;
  const Index d = hp.d;
  const Index m = hp.m;
  const auto n = tape.h_t.size();
  const Index l = tape.segments;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  if (d_prediction.rows() != tape.prediction.rows() || d_prediction.cols() != tape.prediction.cols())
    throw ContractError("backward: upstream gradient shape mismatch");

  std::vector<MatrixXd> d_ht(n);
  std::vector<MatrixXd> d_he(static_cast<std::size_t>(l), MatrixXd::Zero(static_cast<Index>(n), d));

  // Fusion and head, per entity.
  for (std::size_t e = 0; e < n; ++e) {
    const Eigen::RowVectorXd dy = d_prediction.col(static_cast<Index>(e)).transpose();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = tape.blended[e];
    const Eigen::Map<const Eigen::RowVectorXd> flat_o(row_major.data(), m * d);
    grads.head_w.noalias() += flat_o.transpose() * dy;
    grads.head_b.row(0) += dy;
    const Eigen::RowVectorXd d_flat = dy * params.head_w.transpose();
    const MatrixXd d_blend = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                            Eigen::RowMajor>>(d_flat.data(), m, d);

    const MatrixXd& g = tape.gate[e];
    const MatrixXd& ft = tape.fused_t[e];
    const MatrixXd& fe = tape.fused_e[e];
    MatrixXd d_ft = d_blend.cwiseProduct(g);
    MatrixXd d_fe = d_blend.cwiseProduct((1.0 - g.array()).matrix());
    const MatrixXd d_gate = d_blend.cwiseProduct(ft - fe);
    const MatrixXd d_logits = d_gate.array() * g.array() * (1.0 - g.array());
    MatrixXd joined(m, 2 * d);
    joined << ft, fe;
    grads.gate_w.noalias() += joined.transpose() * d_logits;
    grads.gate_b.row(0) += d_logits.colwise().sum();
    const MatrixXd d_joined = d_logits * params.gate_w.transpose();
    d_ft += d_joined.leftCols(d);
    d_fe += d_joined.rightCols(d);

    auto readout_backward = [&](const MatrixXd& h, const MatrixXd& weights, const MatrixXd& d_f) {
      MatrixXd d_h = weights.transpose() * d_f;
      const MatrixXd d_weights = d_f * h.transpose();
      const MatrixXd d_scores = softmax_rows_backward(weights, d_weights) * scale;
      grads.q_read.noalias() += d_scores * h;
      d_h.noalias() += d_scores.transpose() * params.q_read;
      return d_h;
    };
    d_ht[e] = readout_backward(tape.h_t[e], tape.read_t[e], d_ft);
    const MatrixXd d_he_e = readout_backward(tape.h_e_by_entity[e], tape.read_e[e], d_fe);
    for (Index w = 0; w < l; ++w) d_he[static_cast<std::size_t>(w)].row(static_cast<Index>(e)) = d_he_e.row(w);
  }

  std::vector<MatrixXd> d_embed(n, MatrixXd::Zero(l, d));
  MatrixXd d_queries_t = MatrixXd::Zero(protos.k(), d);
  MatrixXd d_queries_e = MatrixXd::Zero(protos.k(), d);

  for (std::size_t e = 0; e < n; ++e) {
    const MatrixXd d_sum =
        layer_norm_backward(tape.norm_t[e], params.ln_t_gain, d_ht[e], grads.ln_t_gain, grads.ln_t_bias);
    const auto g = proto_attention_backward<double>(tape.embed[e], tape.temporal_assign[e],
                                                    tape.queries_t, params.temporal, tape.attn_t[e], d_sum);
    d_embed[e] += d_sum + g.d_tokens;
    d_queries_t += g.d_queries;
    grads.temporal.w_key += g.d_key;
    grads.temporal.w_value += g.d_value;
    grads.temporal.w_output += g.d_output;
  }

  for (Index w = 0; w < l; ++w) {
    const auto wi = static_cast<std::size_t>(w);
    const MatrixXd d_sum =
        layer_norm_backward(tape.norm_e[wi], params.ln_e_gain, d_he[wi], grads.ln_e_gain, grads.ln_e_bias);
    const auto g = proto_attention_backward<double>(tape.entity_tokens[wi], tape.entity_assign[wi],
                                                    tape.queries_e, params.entity, tape.attn_e[wi], d_sum);
    const MatrixXd d_tokens = d_sum + g.d_tokens;
    for (std::size_t e = 0; e < n; ++e) d_embed[e].row(w) += d_tokens.row(static_cast<Index>(e));
    d_queries_e += g.d_queries;
    grads.entity.w_key += g.d_key;
    grads.entity.w_value += g.d_value;
    grads.entity.w_output += g.d_output;
  }

  grads.temporal.w_query.noalias() += tape.proto_tokens.transpose() * d_queries_t;
  grads.entity.w_query.noalias() += tape.proto_tokens.transpose() * d_queries_e;
  const MatrixXd d_proto_tokens = d_queries_t * params.temporal.w_query.transpose() +
                                  d_queries_e * params.entity.w_query.transpose();
  grads.w_in.noalias() += protos.prototypes.transpose() * d_proto_tokens;
  for (std::size_t e = 0; e < n; ++e) grads.w_in.noalias() += tape.raw[e].transpose() * d_embed[e];
}

FlopCount count_model_flops(const ModelHyper& hp, Index segments, Index entities) {
  const std::int64_t l = segments, n = entities, k = hp.k, d = hp.d, p = hp.p, m = hp.m,
                     h = hp.horizon;
  FlopCount f;
  // Raw segments are assigned once and shared by both branches.
  f.assignment = n * l * k * 2 * p + (n * l + k) * p;
  f.projections = n * l * p * d + k * p * d;  // segment and prototype embedding
  // Each branch: prototype queries and bucket output projection (k-only),
  // keys and values per token, attention and the scatter.
  for (int branch = 0; branch < 2; ++branch) {
    f.projections += 2 * k * d * d + 2 * n * l * d * d;
    f.attention += 2 * k * n * l * d;
    f.scatter += n * l * k * d;
  }
  // Layer norms (two per token and branch), readout scores and aggregation
  // for both branches, gate, blend and head.
  f.layer = 2 * 2 * n * l * d + n * (4 * m * l * d + 2 * m * d * d + m * d + m * d * h);
  return f;
}

std::int64_t fusion_intermediate_bytes(Index m, Index segments, Index d) {
  return 8 * 2 * (static_cast<std::int64_t>(m) * segments + static_cast<std::int64_t>(m) * d);
}

std::int64_t model_peak_bytes(const ModelHyper& hp, Index segments, Index entities) {
  const std::int64_t l = segments, n = entities, k = hp.k, d = hp.d, p = hp.p;
  std::int64_t doubles = n * l * p + n * l * d + 3 * k * d;
  // Temporal branch tape: keys, values, weights, buckets, normalized output, features.
  doubles += n * (4 * l * d + k * l + k * d);
  doubles += l * (5 * n * d + k * n + k * d);
  doubles += n * (l * d) + n * (fusion_intermediate_bytes(hp.m, segments, hp.d) / 8 + 3 * hp.m * d);
  doubles += hp.horizon * n;
  return 8 * doubles;
}

}  // namespace focus
