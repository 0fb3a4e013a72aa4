#include "focus/attention.hpp"

namespace focus {

AssignmentMatrix build_assignment(const MatrixXd& raw_segments, const PrototypeSet& protos) {
  if (raw_segments.cols() != protos.p())
    throw ContractError("build_assignment: segment length " +
                        std::to_string(raw_segments.cols()) + " != prototype length " +
                        std::to_string(protos.p()));
  auto buckets = assign(raw_segments, protos.prototypes, protos.alpha);
  return {std::move(buckets.assignment), protos.k()};
}

FlopCount count_flops(std::int64_t l, std::int64_t k, std::int64_t d, std::int64_t p) {
  FlopCount f;
  // p MACs for the squared difference and p for the centered dot per pair,
  // plus one centering pass over every segment and prototype.
  f.assignment = l * k * 2 * p + (l + k) * p;
  f.projections = k * d * d + 2 * l * d * d + k * d * d;
  f.attention = k * l * d + k * l * d;
  f.scatter = l * k * d;
  return f;
}

FlopCount count_full_attention_flops(std::int64_t l, std::int64_t d) {
  FlopCount f;
  f.projections = 3 * l * d * d + l * d * d;
  f.attention = l * l * d + l * l * d;
  return f;
}

std::int64_t proto_attention_peak_bytes(std::int64_t l, std::int64_t k, std::int64_t d) {
  return 8 * (2 * l * d + k * d + k * l + 2 * k * d + l * d);
}

std::int64_t full_attention_peak_bytes(std::int64_t l, std::int64_t d) {
  return 8 * (3 * l * d + l * l + 2 * l * d);
}

}  // namespace focus
