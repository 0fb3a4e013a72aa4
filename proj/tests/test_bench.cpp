#include <sstream>

#include <gtest/gtest.h>

#include "focus/bench.hpp"
#include "focus/error.hpp"
#include "focus/rng.hpp"

using namespace focus;

TEST(Slope, RecoversPowerLaw) {
  const std::vector<double> x{2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  const auto f = loglog_slope(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.residual, 0.0, 1e-12);
  EXPECT_THROW(loglog_slope({1, 2}, {1, 2}), ConfigError);
}

TEST(Slope, Collinearity) {
  EXPECT_EQ(collinearity_deviation(1, 3, 2, 5, 10, 21), 0.0);
  EXPECT_GT(collinearity_deviation(1, 1, 2, 4, 3, 9), 0.1);
}

TEST(Sweep, ProtoAttnFlopSlopeIsOne) {
  TimingOptions t;
  t.warmups = 0;
  t.repeats = 1;
  const auto r = scaling_sweep(SweepMode::kProtoAttn, {256, 512, 1024, 2048}, {}, t);
  ASSERT_EQ(r.rows.size(), 4u);
  // Prototype-only terms bend the fit slightly below one.
  EXPECT_NEAR(r.flop_fit.slope, 1.0, 0.02);
  const auto& rw = r.rows;
  EXPECT_EQ(collinearity_deviation(256, rw[0].flops, 512, rw[1].flops, 2048, rw[3].flops), 0.0);
}

TEST(Sweep, FullAttentionFlopSlopeApproachesTwo) {
  TimingOptions t;
  t.warmups = 0;
  t.repeats = 1;
  const auto r = scaling_sweep(SweepMode::kFullAttn, {256, 512, 1024}, {}, t);
  EXPECT_GT(r.flop_fit.slope, 1.5);
  const auto big = loglog_slope({1e5, 2e5, 4e5}, {double(count_full_attention_flops(100000, 64).total()),
                                                  double(count_full_attention_flops(200000, 64).total()),
                                                  double(count_full_attention_flops(400000, 64).total())});
  EXPECT_NEAR(big.slope, 2.0, 1e-2);
}

TEST(Sweep, RejectsSinglePointAndUnsortedSizes) {
  EXPECT_THROW(scaling_sweep(SweepMode::kProtoAttn, {256}, {}), ConfigError);
  EXPECT_THROW(scaling_sweep(SweepMode::kProtoAttn, {512, 256, 1024}, {}), ConfigError);
  EXPECT_THROW(parse_sweep_mode("nope"), ConfigError);
}

TEST(Sweep, CsvLayout) {
  TimingOptions t;
  t.warmups = 0;
  t.repeats = 1;
  ModelHyper hp;
  SweepFixed fx;
  fx.entities = 2;
  fx.horizon = 8;
  fx.d = 16;
  const auto r = scaling_sweep(SweepMode::kEndToEnd, {2, 4, 8}, fx, t);
  std::ostringstream out;
  r.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "experiment,size,median_ns,flops,peak_bytes,slope");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 11), "end_to_end,");
  EXPECT_EQ(line.back(), ',');
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_NE(line.back(), ',');
}

TEST(LowRank, DistinctRowsCornerIsExact) {
  auto rng = stage_rng(1, "test");
  const MatrixXd distinct = gaussian_matrix(4, 8, rng);
  MatrixXd rows(40, 8);
  for (Index i = 0; i < 40; ++i) rows.row(i) = distinct.row(i % 4);
  PrototypeSet protos;
  protos.prototypes = distinct;
  const VectorXd w = gaussian_matrix(8, 1, rng);
  EXPECT_LE(approximation_error(rows, protos, w), 1e-9);
}

TEST(LowRank, OnePrototypePerRowIsExact) {
  LowRankProbe cfg;
  cfg.l = 16;
  cfg.p = 8;
  cfg.r = 4;
  cfg.k = 16;
  cfg.trials = 3;
  cfg.max_iters = 0;
  for (double e : lowrank_probe(cfg, 2)) EXPECT_LE(e, 1e-9);
}

TEST(LowRank, Validation) {
  LowRankProbe cfg;
  cfg.r = 64;
  EXPECT_THROW(lowrank_probe(cfg, 0), ConfigError);
}

TEST(Ablation, AlphaZeroRowMatchesDirectFit) {
  auto data = separating_dataset(3, 2, 512);
  auto ds = split_and_normalize(data.dataset, {0.7, 0.1, 0.2});
  AblationConfig cfg;
  cfg.seed = 3;
  cfg.max_iters = 50;
  const auto rows = offline_ablation(ds, cfg, &data.templates);
  ASSERT_EQ(rows.size(), 2u);
  ClusterOptions opt;
  opt.k = cfg.k;
  opt.alpha = 0.0;
  opt.max_iters = 50;
  opt.seed = 3;
  const auto direct = fit(segment(ds.values.topRows(ds.split->train_end), cfg.p), opt);
  EXPECT_EQ(rows[0].protos.prototypes, direct.prototypes);
  EXPECT_EQ(rows[1].alpha, 0.2);
  EXPECT_TRUE(rows[0].template_corr.has_value());
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
}
