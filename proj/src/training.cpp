#include "focus/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "focus/error.hpp"
#include "focus/rng.hpp"

namespace focus {

namespace {

void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

}  // namespace

double mse(const MatrixXd& pred, const MatrixXd& target) {
  check_same_shape(pred, target, "mse");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double mae(const MatrixXd& pred, const MatrixXd& target) {
  check_same_shape(pred, target, "mae");
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

double loss_and_gradient(const MatrixXd& lookback, const MatrixXd& target,
                         const ModelParams& params, const PrototypeSet& protos, ModelGrads& grads,
                         double weight) {
  ForwardTape tape;
  const MatrixXd pred = forward(lookback, params, protos, &tape);
  check_same_shape(pred, target, "loss");
  const MatrixXd d_pred = (2.0 * weight / static_cast<double>(pred.size())) * (pred - target);
  backward(tape, params, protos, d_pred, grads);
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

ModelGrads compute_gradients(const MatrixXd& lookback, const MatrixXd& target,
                             const ModelParams& params, const PrototypeSet& protos) {
  auto grads = ModelParams::zeros(params.hyper);
  loss_and_gradient(lookback, target, params, protos, grads);
  check_finite(grads, "gradient");
  return grads;
}

void check_finite(const ModelParams& tensors, const std::string& what) {
  for (const auto& [name, t] : tensors.tensors())
    if (!t->allFinite()) throw NumericalError(what + " of '" + name + "' is not finite");
}

ErrorMetrics evaluate(const TimeSeriesDataset& ds, Partition part, const ModelParams& params,
                      const PrototypeSet& protos) {
  const auto& hp = params.hyper;
  const auto origins = window_origins(ds, part, hp.lookback, hp.horizon);
  ErrorMetrics m;
  if (origins.empty()) throw ConfigError("partition has no complete window for this lookback/horizon");
  for (Index t : origins) {
    const auto inst = make_instance(ds.values, t, hp.lookback, hp.horizon);
    const MatrixXd pred = forward(inst.lookback, params, protos);
    m.mse += (pred - inst.target).squaredNorm();
    m.mae += (pred - inst.target).cwiseAbs().sum();
  }
  const double count = static_cast<double>(origins.size()) * hp.horizon * ds.entities();
  m.mse /= count;
  m.mae /= count;
  m.windows = static_cast<Index>(origins.size());
  return m;
}

ErrorMetrics persistence_baseline(const TimeSeriesDataset& ds, Partition part, Index lookback,
                                  Index horizon) {
  const auto origins = window_origins(ds, part, lookback, horizon);
  if (origins.empty()) throw ConfigError("partition has no complete window for this lookback/horizon");
  ErrorMetrics m;
  for (Index t : origins) {
    const auto inst = make_instance(ds.values, t, lookback, horizon);
    const MatrixXd pred = inst.lookback.row(lookback - 1).replicate(horizon, 1);
    m.mse += (pred - inst.target).squaredNorm();
    m.mae += (pred - inst.target).cwiseAbs().sum();
  }
  const double count = static_cast<double>(origins.size()) * horizon * ds.entities();
  m.mse /= count;
  m.mae /= count;
  m.windows = static_cast<Index>(origins.size());
  return m;
}

void TrainReport::write_records(std::ostream& out) const {
  const auto old = out.precision(10);
  for (const auto& r : epochs)
    out << "epoch=" << r.epoch << " train_mse=" << r.train_mse << " val_mse=" << r.val_mse << '\n';
  out.precision(old);
}

namespace {

double validation_mse(const TimeSeriesDataset& ds, const std::vector<Index>& origins,
                      const ModelParams& params, const PrototypeSet& protos) {
  const auto& hp = params.hyper;
  double total = 0.0;
  for (Index t : origins) {
    const auto inst = make_instance(ds.values, t, hp.lookback, hp.horizon);
    total += (forward(inst.lookback, params, protos) - inst.target).squaredNorm();
  }
  return total / (static_cast<double>(origins.size()) * hp.horizon * ds.entities());
}

std::vector<Index> evenly_spaced(const std::vector<Index>& all, Index cap) {
  if (cap <= 0 || static_cast<Index>(all.size()) <= cap) return all;
  std::vector<Index> out;
  const double stride = static_cast<double>(all.size()) / static_cast<double>(cap);
  for (Index i = 0; i < cap; ++i)
    out.push_back(all[static_cast<std::size_t>(std::floor(stride * static_cast<double>(i)))]);
  return out;
}

}  // namespace

TrainResult train(const TimeSeriesDataset& ds, const PrototypeSet& protos, const ModelHyper& hyper,
                  const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  hyper.validate();
  options.opt.validate();
  protos.validate();
  if (hyper.p != protos.p())
    throw ConfigError("model p=" + std::to_string(hyper.p) + " but prototypes have p=" +
                      std::to_string(protos.p()));
  if (hyper.entities != ds.entities())
    throw ConfigError("model expects " + std::to_string(hyper.entities) + " entities, data has " +
                      std::to_string(ds.entities()));

  const auto train_origins = window_origins(ds, Partition::kTrain, hyper.lookback, hyper.horizon);
  const auto val_all = window_origins(ds, Partition::kVal, hyper.lookback, hyper.horizon);
  const auto test_origins = window_origins(ds, Partition::kTest, hyper.lookback, hyper.horizon);
  if (train_origins.empty() || val_all.empty() || test_origins.empty())
    throw ConfigError("every partition needs at least one window of lookback + horizon = " +
                      std::to_string(hyper.lookback + hyper.horizon) + " steps");
  const auto val_origins = evenly_spaced(val_all, options.max_val_windows);

  const auto& opt = options.opt;
  TrainResult result{ModelParams::init(hyper, opt.seed), {}};
  ModelParams params = result.params;
  AdamW adam(opt);
  auto shuffle_rng = stage_rng(opt.seed, "shuffle");

  std::vector<std::size_t> order(train_origins.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> instance_loss(train_origins.size(), 0.0);

  auto& report = result.report;
  report.best_val_mse = std::numeric_limits<double>::infinity();
  report.best_epoch = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t visit = order.size();
    if (options.max_train_windows > 0)
      visit = std::min(visit, static_cast<std::size_t>(options.max_train_windows));
    std::fill(instance_loss.begin(), instance_loss.end(), 0.0);

    for (std::size_t b = 0; b < visit; b += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(visit, b + static_cast<std::size_t>(opt.batch_size));
      const double weight = 1.0 / static_cast<double>(end - b);
      auto grads = ModelParams::zeros(hyper);
      for (std::size_t i = b; i < end; ++i) {
        const auto idx = order[i];
        const auto inst = make_instance(ds.values, train_origins[idx], hyper.lookback, hyper.horizon);
        instance_loss[idx] = loss_and_gradient(inst.lookback, inst.target, params, protos, grads, weight);
      }
      check_finite(grads, "gradient");
      std::vector<MatrixXd*> ps;
      std::vector<const MatrixXd*> gs;
      for (auto& [name, t] : params.tensors()) ps.push_back(t);
      for (const auto& [name, t] : std::as_const(grads).tensors()) gs.push_back(t);
      adam.step(ps, gs);
    }
    check_finite(params, "parameter");

    // Summed in index order so the figure does not depend on the shuffle.
    const double train_mse =
        std::accumulate(instance_loss.begin(), instance_loss.end(), 0.0) / static_cast<double>(visit);
    const double val_mse = validation_mse(ds, val_origins, params, protos);
    report.epochs.push_back({epoch, train_mse, val_mse});
    if (options.progress) {
      *options.progress << "epoch " << epoch << " train_mse " << train_mse << " val_mse " << val_mse
                        << std::endl;
    }

    if (val_mse < report.best_val_mse) {
      report.best_val_mse = val_mse;
      report.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }

  const auto test = evaluate(ds, Partition::kTest, result.params, protos);
  report.test_mse = test.mse;
  report.test_mae = test.mae;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

std::vector<TensorCheck> gradient_check(const GradCheckConfig& cfg) {
  ModelHyper hp;
  hp.p = cfg.p;
  hp.d = cfg.d;
  hp.m = cfg.m;
  hp.k = cfg.k;
  hp.lookback = cfg.p * cfg.segments;
  hp.horizon = cfg.horizon;
  hp.entities = cfg.entities;

  auto rng = stage_rng(cfg.seed, "gradcheck");
  const MatrixXd x = gaussian_matrix(hp.lookback, cfg.entities, rng);
  const MatrixXd target = gaussian_matrix(cfg.horizon, cfg.entities, rng);
  PrototypeSet protos;
  protos.prototypes = gaussian_matrix(cfg.k, cfg.p, rng);
  protos.alpha = 0.2;

  ModelParams params = ModelParams::init(hp, cfg.seed);
  // Move gains and biases off their initial values so their gradients are exercised.
  params.ln_t_gain.array() += gaussian_matrix(1, hp.d, rng, 0.3).array();
  params.ln_e_gain.array() += gaussian_matrix(1, hp.d, rng, 0.3).array();
  params.ln_t_bias = gaussian_matrix(1, hp.d, rng, 0.3);
  params.ln_e_bias = gaussian_matrix(1, hp.d, rng, 0.3);
  params.gate_b = gaussian_matrix(1, hp.d, rng, 0.3);

  const auto analytic = compute_gradients(x, target, params, protos);
  auto loss_at = [&](const ModelParams& w) { return mse(forward(x, w, protos), target); };

  std::vector<TensorCheck> out;
  auto probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.tensors();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    auto& tensor = *probe_tensors[t].second;
    const auto& grad = *grad_tensors[t].second;
    TensorCheck check{probe_tensors[t].first, 0.0, tensor.size()};
    for (Index i = 0; i < tensor.size(); ++i) {
      const double saved = tensor.data()[i];
      tensor.data()[i] = saved + cfg.h;
      const double up = loss_at(probe);
      tensor.data()[i] = saved - cfg.h;
      const double down = loss_at(probe);
      tensor.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * cfg.h);
      check.max_rel_error = std::max(check.max_rel_error, relative_error(grad.data()[i], numeric));
    }
    out.push_back(check);
  }
  return out;
}

}  // namespace focus
