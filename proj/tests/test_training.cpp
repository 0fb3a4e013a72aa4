#include <sstream>

#include <gtest/gtest.h>

#include "focus/error.hpp"
#include "focus/rng.hpp"
#include "focus/training.hpp"

using namespace focus;

TEST(Metrics, Identical) {
  const MatrixXd a = MatrixXd::Random(3, 4);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mae(a, a), 0.0);
}

TEST(Metrics, ConstantOffset) {
  const MatrixXd a = MatrixXd::Random(5, 2);
  const MatrixXd b = (a.array() - 2.0).matrix();
  EXPECT_DOUBLE_EQ(mse(a, b), 4.0);
  EXPECT_DOUBLE_EQ(mae(a, b), 2.0);
}

TEST(Metrics, HandArithmetic) {
  MatrixXd p(1, 2), t(1, 2);
  p << 0, 3;
  t << 0, 1;
  EXPECT_DOUBLE_EQ(mse(p, t), 2.0);
  EXPECT_DOUBLE_EQ(mae(p, t), 1.0);
  EXPECT_THROW(mse(p, MatrixXd::Zero(2, 1)), ContractError);
}

namespace {

struct Toy {
  ModelHyper hp;
  ModelParams params;
  PrototypeSet protos;
  MatrixXd x;
};

Toy toy(std::uint64_t seed) {
  Toy t;
  t.hp.p = 4;
  t.hp.d = 8;
  t.hp.m = 2;
  t.hp.k = 4;
  t.hp.lookback = 16;
  t.hp.horizon = 4;
  t.hp.entities = 3;
  t.params = ModelParams::init(t.hp, seed);
  auto rng = stage_rng(seed, "test");
  t.protos.prototypes = gaussian_matrix(4, 4, rng);
  t.x = gaussian_matrix(16, 3, rng);
  return t;
}

}  // namespace

TEST(Backward, ZeroErrorGivesZeroGradient) {
  auto t = toy(1);
  const MatrixXd target = forward(t.x, t.params, t.protos);
  const auto g = compute_gradients(t.x, target, t.params, t.protos);
  for (const auto& [name, tensor] : g.tensors()) EXPECT_TRUE(tensor->isZero(0.0)) << name;
}

TEST(Backward, HeadBiasIsColumnMeanOfResidual) {
  auto t = toy(2);
  auto rng = stage_rng(2, "target");
  const MatrixXd target = gaussian_matrix(4, 3, rng);
  const MatrixXd pred = forward(t.x, t.params, t.protos);
  const auto g = compute_gradients(t.x, target, t.params, t.protos);
  // d/db_h of mean((pred - y)^2) sums 2 (pred - y) / count over entities.
  const MatrixXd expected = (2.0 * (pred - target) / static_cast<double>(pred.size())).rowwise().sum().transpose();
  EXPECT_LT((g.head_b - expected).norm(), 1e-12);
}

TEST(Backward, FiniteDifferenceEveryTensor) {
  for (std::uint64_t seed : {0, 1, 2}) {
    GradCheckConfig cfg;
    cfg.seed = seed;
    const auto checks = gradient_check(cfg);
    EXPECT_EQ(checks.size(), 18u);
    for (const auto& c : checks) EXPECT_LT(c.max_rel_error, 1e-4) << c.name << " seed " << seed;
  }
}

TEST(Backward, StepDoesNotFlipAssignments) {
  auto t = toy(3);
  const auto raw = entity_segments(t.x, 4);
  for (const auto& block : raw) {
    const auto base = build_assignment(block, t.protos);
    for (Index i = 0; i < block.size(); ++i) {
      for (double h : {1e-4, -1e-4}) {
        MatrixXd moved = block;
        moved.data()[i] += h;
        EXPECT_EQ(build_assignment(moved, t.protos).indices, base.indices);
      }
    }
  }
}

TEST(Backward, NonFiniteGradientNamesTensor) {
  auto t = toy(4);
  t.params.head_w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    compute_gradients(t.x, MatrixXd::Zero(4, 3), t.params, t.protos);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("gradient"), std::string::npos);
  }
}

TEST(AdamW, SingleStepMatchesHandUpdate) {
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  MatrixXd w(1, 2);
  w << 1.0, -2.0;
  MatrixXd g(1, 2);
  g << 0.5, -3.0;
  opt.step({&w}, {&g});
  // First bias-corrected step is lr * g / (|g| + eps').
  const double eps_hat = 1e-8;
  EXPECT_NEAR(w(0), 1.0 - 0.1 * 0.5 / (0.5 + eps_hat), 1e-15);
  EXPECT_NEAR(w(1), -2.0 + 0.1 * 3.0 / (3.0 + eps_hat), 1e-15);
}

TEST(AdamW, DecoupledDecay) {
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt(cfg);
  MatrixXd w = MatrixXd::Constant(1, 1, 2.0);
  const MatrixXd g = MatrixXd::Zero(1, 1);
  opt.step({&w}, {&g});
  EXPECT_NEAR(w(0), 2.0 * (1 - 0.1 * 0.5), 1e-15);
}

namespace {

TimeSeriesDataset toy_dataset(std::uint64_t seed) {
  SyntheticOptions so;
  so.entities = 2;
  so.steps = 400;
  so.p = 4;
  so.seed = seed;
  return split_and_normalize(generate_synthetic(so).dataset, {0.7, 0.1, 0.2});
}

ModelHyper toy_hyper() {
  ModelHyper hp;
  hp.p = 4;
  hp.d = 8;
  hp.m = 2;
  hp.k = 4;
  hp.lookback = 16;
  hp.horizon = 4;
  hp.entities = 2;
  return hp;
}

PrototypeSet toy_protos(const TimeSeriesDataset& ds) {
  ClusterOptions co;
  co.k = 4;
  co.max_iters = 50;
  return fit(segment(ds.values.topRows(ds.split->train_end), 4), co);
}

}  // namespace

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto ds = toy_dataset(1);
  TrainOptions to;
  to.opt.lr = 0.0;
  to.opt.weight_decay = 0.0;
  to.opt.max_epochs = 3;
  to.opt.patience = 10;
  const auto res = train(ds, toy_protos(ds), toy_hyper(), to);
  const auto init = ModelParams::init(toy_hyper(), 0);
  EXPECT_EQ(res.params.head_w, init.head_w);
  EXPECT_EQ(res.params.w_in, init.w_in);
  ASSERT_EQ(res.report.epochs.size(), 3u);
  EXPECT_EQ(res.report.epochs[0].train_mse, res.report.epochs[2].train_mse);
}

TEST(Train, DeterministicAndBestCheckpointReproduces) {
  const auto ds = toy_dataset(2);
  const auto protos = toy_protos(ds);
  TrainOptions to;
  to.opt.max_epochs = 4;
  to.opt.seed = 5;
  const auto a = train(ds, protos, toy_hyper(), to);
  const auto b = train(ds, protos, toy_hyper(), to);
  std::ostringstream ra, rb;
  a.report.write_records(ra);
  b.report.write_records(rb);
  EXPECT_EQ(ra.str(), rb.str());
  EXPECT_EQ(a.report.test_mse, b.report.test_mse);
  double best = 1e300;
  for (const auto& r : a.report.epochs) best = std::min(best, r.val_mse);
  EXPECT_EQ(a.report.best_val_mse, best);
  EXPECT_DOUBLE_EQ(evaluate(ds, Partition::kVal, a.params, protos).mse, a.report.best_val_mse);
  EXPECT_NE(ra.str().find("epoch=1 train_mse="), std::string::npos);
}

TEST(Train, RejectsEntityMismatchAndShortPartitions) {
  const auto ds = toy_dataset(3);
  const auto protos = toy_protos(ds);
  auto hp = toy_hyper();
  hp.entities = 5;
  EXPECT_THROW(train(ds, protos, hp, {}), ConfigError);
  hp = toy_hyper();
  hp.lookback = 64;
  EXPECT_THROW(train(ds, protos, hp, {}), ConfigError);
}

TEST(Persistence, RepeatsLastValue) {
  TimeSeriesDataset ds;
  ds.values = MatrixXd::Zero(100, 1);
  ds.values.col(0).setLinSpaced(100, 0, 99);
  ds.split = SplitIndices{70, 80};
  const auto m = persistence_baseline(ds, Partition::kTest, 4, 2);
  // Errors are 1 and 2 at every window.
  EXPECT_DOUBLE_EQ(m.mse, 2.5);
  EXPECT_DOUBLE_EQ(m.mae, 1.5);
}
