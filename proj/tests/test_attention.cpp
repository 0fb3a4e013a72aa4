#include <gtest/gtest.h>

#include "focus/attention.hpp"
#include "focus/rng.hpp"

using namespace focus;

namespace {

// Direct per-token evaluation: each token reads the attention row of its prototype.
MatrixXd brute_proto_attention(const MatrixXd& tokens, const AssignmentMatrix& a,
                               const MatrixXd& queries, const ProtoAttnWeights<double>& w) {
  const Index l = tokens.rows();
  const Index d = w.dim();
  MatrixXd out(l, d);
  for (Index i = 0; i < l; ++i) {
    const RowVectorXd q = queries.row(a[i]);
    VectorXd s(l);
    for (Index j = 0; j < l; ++j) s(j) = q.dot(tokens.row(j) * w.w_key) / std::sqrt(double(d));
    s = (s.array() - s.maxCoeff()).exp();
    s /= s.sum();
    RowVectorXd acc = RowVectorXd::Zero(d);
    for (Index j = 0; j < l; ++j) acc += s(j) * (tokens.row(j) * w.w_value);
    out.row(i) = acc * w.w_output;
  }
  return out;
}

}  // namespace

TEST(Assignment, TripleGivesOneHotFirst) {
  PrototypeSet protos;
  protos.prototypes.resize(2, 3);
  protos.prototypes << 7, 10, 13, 11, 10, 9;
  MatrixXd seg(1, 3);
  seg << 9, 10, 11;
  const auto a = build_assignment(seg, protos);
  EXPECT_EQ(a.one_hot(), (MatrixXd(1, 2) << 1, 0).finished());
}

TEST(Assignment, PrototypeRowsSelectThemselves) {
  PrototypeSet protos;
  protos.prototypes = MatrixXd::Random(4, 5);
  const auto a = build_assignment(protos.prototypes.colwise().reverse(), protos);
  const MatrixXd oh = a.one_hot();
  EXPECT_EQ(oh.rowwise().sum(), VectorXd::Ones(4));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(a[i], 3 - i);
}

TEST(Assignment, EqualSegmentsShareAColumn) {
  PrototypeSet protos;
  protos.prototypes = MatrixXd::Random(3, 4);
  const MatrixXd segs = MatrixXd::Constant(6, 4, 0.25);
  const MatrixXd oh = build_assignment(segs, protos).one_hot();
  EXPECT_EQ(oh.colwise().sum().maxCoeff(), 6.0);
}

TEST(ProtoAttn, MatchesPerTokenEvaluation) {
  auto rng = stage_rng(5, "test");
  const auto w = ProtoAttnWeights<double>::random(6, 6, rng);
  const MatrixXd tokens = gaussian_matrix(9, 6, rng);
  const MatrixXd protos = gaussian_matrix(3, 6, rng);
  AssignmentMatrix a{{0, 1, 2, 2, 1, 0, 0, 1, 2}, 3};
  const MatrixXd out = proto_attention<double>(tokens, a, protos, w);
  const MatrixXd ref = brute_proto_attention(tokens, a, protos * w.w_query, w);
  EXPECT_LT((out - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProtoAttn, SharedBucketRowsAreIdentical) {
  auto rng = stage_rng(6, "test");
  const auto w = ProtoAttnWeights<double>::random(4, 4, rng);
  const MatrixXd tokens = gaussian_matrix(7, 4, rng);
  const MatrixXd protos = gaussian_matrix(2, 4, rng);
  AssignmentMatrix a{{1, 0, 1, 1, 0, 0, 1}, 2};
  const MatrixXd out = proto_attention<double>(tokens, a, protos, w);
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 7; ++j)
      if (a[i] == a[j]) EXPECT_TRUE((out.row(i).array() == out.row(j).array()).all());
}

TEST(ProtoAttn, SingleBucketIsOneConvexCombination) {
  auto rng = stage_rng(7, "test");
  const auto w = ProtoAttnWeights<double>::random(3, 3, rng);
  const MatrixXd tokens = gaussian_matrix(5, 3, rng);
  const MatrixXd protos = gaussian_matrix(1, 3, rng);
  AssignmentMatrix a{{0, 0, 0, 0, 0}, 1};
  ProtoAttnCache<double> cache;
  const MatrixXd out =
      proto_attention_with_queries<double>(tokens, a, protos * w.w_query, w, &cache);
  EXPECT_NEAR(cache.weights.sum(), 1.0, 1e-12);
  EXPECT_TRUE((cache.weights.array() > 0).all());
  for (Index i = 1; i < 5; ++i) EXPECT_EQ(out.row(i), out.row(0));
}

TEST(ProtoAttn, SoftmaxRowsSumToOne) {
  auto rng = stage_rng(8, "test");
  const auto w = ProtoAttnWeights<double>::random(8, 8, rng);
  const MatrixXd tokens = gaussian_matrix(50, 8, rng, 10.0);
  AssignmentMatrix a{std::vector<Index>(50, 0), 4};
  ProtoAttnCache<double> cache;
  proto_attention_with_queries<double>(tokens, a, gaussian_matrix(4, 8, rng, 10.0), w, &cache);
  EXPECT_LT((cache.weights.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(ProtoAttn, PermutationEquivariance) {
  auto rng = stage_rng(9, "test");
  const auto w = ProtoAttnWeights<double>::random(5, 5, rng);
  const MatrixXd tokens = gaussian_matrix(6, 5, rng);
  const MatrixXd protos = gaussian_matrix(3, 5, rng);
  AssignmentMatrix a{{0, 2, 1, 1, 0, 2}, 3};
  const std::vector<Index> perm{3, 0, 5, 1, 4, 2};
  MatrixXd ptok(6, 5);
  AssignmentMatrix pa{std::vector<Index>(6), 3};
  for (Index i = 0; i < 6; ++i) {
    ptok.row(i) = tokens.row(perm[i]);
    pa.indices[i] = a[perm[i]];
  }
  const MatrixXd out = proto_attention<double>(tokens, a, protos, w);
  const MatrixXd pout = proto_attention<double>(ptok, pa, protos, w);
  for (Index i = 0; i < 6; ++i) EXPECT_LT((pout.row(i) - out.row(perm[i])).norm(), 1e-12);
}

TEST(ProtoAttn, EqualsFullAttentionWhenTokensArePrototypes) {
  auto rng = stage_rng(10, "test");
  const auto w = ProtoAttnWeights<double>::random(4, 4, rng);
  PrototypeSet protos;
  protos.prototypes = gaussian_matrix(4, 4, rng);
  const MatrixXd tokens = protos.prototypes;
  const auto a = build_assignment(tokens, protos);
  const MatrixXd out = proto_attention<double>(tokens, a, protos.prototypes, w);
  EXPECT_LT((out - full_attention<double>(tokens, w)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ProtoAttn, ShapeMismatchIsContractError) {
  auto rng = stage_rng(11, "test");
  const auto w = ProtoAttnWeights<double>::random(4, 4, rng);
  AssignmentMatrix a{{0, 0}, 1};
  EXPECT_THROW(proto_attention<double>(MatrixXd::Zero(3, 4), a, MatrixXd::Zero(1, 4), w),
               ContractError);
  EXPECT_THROW(proto_attention<double>(MatrixXd::Zero(2, 5), a, MatrixXd::Zero(1, 4), w),
               ContractError);
}

TEST(ProtoAttn, WorksInSinglePrecision) {
  auto rng = stage_rng(12, "test");
  const auto w = ProtoAttnWeights<float>::random(4, 4, rng);
  const Mat<float> tokens = gaussian_matrix<float>(5, 4, rng);
  AssignmentMatrix a{{0, 1, 0, 1, 1}, 2};
  const Mat<float> out = proto_attention<float>(tokens, a, gaussian_matrix<float>(2, 4, rng), w);
  EXPECT_TRUE(out.allFinite());
}

TEST(Flops, DoublingRatio) {
  const std::int64_t k = 16, d = 64, p = 16;
  const auto at = [&](std::int64_t l) { return static_cast<double>(count_flops(l, k, d, p).total()); };
  const double a = at(0);
  const double b = at(100) - a;
  EXPECT_DOUBLE_EQ(at(200) / at(100), (a + 2 * b) / (a + b));
  EXPECT_NEAR(at(1 << 24) / at(1 << 23), 2.0, 1e-3);
}

TEST(Flops, ZeroSegmentsLeavesPrototypeTerms) {
  const auto f = count_flops(0, 16, 64, 16);
  EXPECT_EQ(f.attention, 0);
  EXPECT_EQ(f.scatter, 0);
  EXPECT_EQ(f.assignment, 16 * 16);
  EXPECT_EQ(f.projections, 2 * 16 * 64 * 64);
}

TEST(Flops, FullAttentionQuadraticStage) {
  const auto r = static_cast<double>(count_full_attention_flops(4096, 64).attention) /
                 static_cast<double>(count_full_attention_flops(2048, 64).attention);
  EXPECT_DOUBLE_EQ(r, 4.0);
}

TEST(Flops, AffineInL) {
  for (std::int64_t k : {1, 4, 32}) {
    const auto f0 = count_flops(100, k, 32, 8).total();
    const auto f1 = count_flops(300, k, 32, 8).total();
    const auto f2 = count_flops(1000, k, 32, 8).total();
    EXPECT_EQ((f1 - f0) * 900, (f2 - f0) * 200);
  }
}
