#include "focus/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>

#include "focus/error.hpp"
#include "focus/rng.hpp"

namespace focus {

SweepMode parse_sweep_mode(const std::string& name) {
  if (name == "protoattn") return SweepMode::kProtoAttn;
  if (name == "full_attn") return SweepMode::kFullAttn;
  if (name == "end_to_end") return SweepMode::kEndToEnd;
  throw ConfigError("unknown bench mode '" + name + "' (expected protoattn|full_attn|end_to_end)");
}

std::string to_string(SweepMode mode) {
  switch (mode) {
    case SweepMode::kProtoAttn: return "protoattn";
    case SweepMode::kFullAttn: return "full_attn";
    case SweepMode::kEndToEnd: return "end_to_end";
  }
  return "unknown";
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractError("loglog_slope: size mismatch");
  if (x.size() < 3) throw ConfigError("a log-log slope needs at least three size points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

double collinearity_deviation(double x0, double y0, double x1, double y1, double x2, double y2) {
  // Compare the slope of (0,1) with the slope of (0,2) via cross multiplication.
  const double lhs = (y1 - y0) * (x2 - x0);
  const double rhs = (y2 - y0) * (x1 - x0);
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

void BenchReport::write_csv(std::ostream& out, bool header) const {
  if (header) out << "experiment,size,median_ns,flops,peak_bytes,slope\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << r.experiment << ',' << r.size << ',' << static_cast<std::int64_t>(std::llround(r.median_ns))
        << ',' << r.flops << ',' << r.peak_bytes << ',';
    if (i + 1 == rows.size()) out << time_fit.slope;
    out << '\n';
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

// One timed workload per size; the closure owns its inputs.
struct Workload {
  Index size = 0;
  std::function<double()> run;  // returns a value so the work cannot be elided
  std::int64_t flops = 0;
  std::int64_t peak_bytes = 0;
};

Workload make_workload(SweepMode mode, Index l, const SweepFixed& fx, std::uint64_t seed) {
  auto rng = stage_rng(seed + static_cast<std::uint64_t>(l), "bench");
  Workload w;
  w.size = l;
  switch (mode) {
    case SweepMode::kProtoAttn: {
      auto raw = std::make_shared<MatrixXd>(gaussian_matrix(l, fx.p, rng));
      auto protos = std::make_shared<PrototypeSet>();
      protos->prototypes = gaussian_matrix(fx.k, fx.p, rng);
      auto w_in = gaussian_matrix(fx.p, fx.d, rng, 1.0 / std::sqrt(static_cast<double>(fx.p)));
      auto tokens = std::make_shared<MatrixXd>(*raw * w_in);
      auto proto_tokens = std::make_shared<MatrixXd>(protos->prototypes * w_in);
      auto weights = std::make_shared<ProtoAttnWeights<double>>(
          ProtoAttnWeights<double>::random(fx.d, fx.d, rng));
      w.run = [=] {
        const auto a = build_assignment(*raw, *protos);
        return proto_attention<double>(*tokens, a, *proto_tokens, *weights)(0, 0);
      };
      w.flops = count_flops(l, fx.k, fx.d, fx.p).total();
      w.peak_bytes = proto_attention_peak_bytes(l, fx.k, fx.d);
      break;
    }
    case SweepMode::kFullAttn: {
      auto tokens = std::make_shared<MatrixXd>(gaussian_matrix(l, fx.d, rng));
      auto weights = std::make_shared<ProtoAttnWeights<double>>(
          ProtoAttnWeights<double>::random(fx.d, fx.d, rng));
      w.run = [=] { return full_attention<double>(*tokens, *weights)(0, 0); };
      w.flops = count_full_attention_flops(l, fx.d).total();
      w.peak_bytes = full_attention_peak_bytes(l, fx.d);
      break;
    }
    case SweepMode::kEndToEnd: {
      ModelHyper hp;
      hp.p = fx.p;
      hp.d = fx.d;
      hp.m = fx.m;
      hp.k = fx.k;
      hp.lookback = l * fx.p;
      hp.horizon = fx.horizon;
      hp.entities = fx.entities;
      auto params = std::make_shared<ModelParams>(ModelParams::init(hp, seed));
      auto protos = std::make_shared<PrototypeSet>();
      protos->prototypes = gaussian_matrix(fx.k, fx.p, rng);
      auto x = std::make_shared<MatrixXd>(gaussian_matrix(hp.lookback, fx.entities, rng));
      w.run = [=] { return forward(*x, *params, *protos)(0, 0); };
      w.flops = count_model_flops(hp, l, fx.entities).total();
      w.peak_bytes = model_peak_bytes(hp, l, fx.entities);
      break;
    }
  }
  return w;
}

}  // namespace

BenchReport scaling_sweep(SweepMode mode, const std::vector<Index>& sizes, const SweepFixed& fixed,
                          const TimingOptions& timing) {
  if (sizes.size() < 3) throw ConfigError("scaling sweep needs at least three sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("sweep sizes must be strictly ascending");
  if (sizes.front() < 1) throw ConfigError("sweep sizes must be positive");
  if (timing.repeats < 1 || timing.warmups < 0) throw ConfigError("invalid timing options");

  std::vector<Workload> loads;
  for (Index s : sizes) loads.push_back(make_workload(mode, s, fixed, timing.seed));

  std::vector<std::vector<double>> samples(loads.size());
  volatile double sink = 0.0;
  for (int rep = 0; rep < timing.warmups + timing.repeats; ++rep) {
    for (std::size_t i = 0; i < loads.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      sink = sink + loads[i].run();
      const auto t1 = std::chrono::steady_clock::now();
      if (rep >= timing.warmups)
        samples[i].push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
  }

  BenchReport report;
  std::vector<double> xs, ts, fs;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    BenchRow row{to_string(mode), loads[i].size, median(samples[i]), loads[i].flops,
                 loads[i].peak_bytes};
    xs.push_back(static_cast<double>(row.size));
    ts.push_back(row.median_ns);
    fs.push_back(static_cast<double>(row.flops));
    report.rows.push_back(row);
  }
  report.time_fit = loglog_slope(xs, ts);
  report.flop_fit = loglog_slope(xs, fs);
  return report;
}

double approximation_error(const MatrixXd& rows, const PrototypeSet& protos, const VectorXd& w) {
  const auto a = build_assignment(rows, protos);
  const VectorXd exact = rows * w;
  const VectorXd proto_scores = protos.prototypes * w;
  VectorXd approx(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) approx(i) = proto_scores(a[i]);
  const double denom = exact.norm();
  if (denom == 0.0) return (approx - exact).norm() == 0.0 ? 0.0 : INFINITY;
  return (approx - exact).norm() / denom;
}

std::vector<double> lowrank_probe(const LowRankProbe& cfg, std::uint64_t seed) {
  if (cfg.r > std::min(cfg.l, cfg.p)) throw ConfigError("probe rank r must be <= min(l, p)");
  if (cfg.k < 1 || cfg.k > cfg.l) throw ConfigError("probe k must lie in [1, l]");
  if (cfg.trials < 1) throw ConfigError("probe needs at least one trial");
  std::vector<double> errors;
  for (int t = 0; t < cfg.trials; ++t) {
    auto rng = stage_rng(seed + static_cast<std::uint64_t>(t), "lowrank");
    const MatrixXd gauss = gaussian_matrix(cfg.l, cfg.r, rng);
    const MatrixXd u = Eigen::HouseholderQR<MatrixXd>(gauss).householderQ() *
                       MatrixXd::Identity(cfg.l, cfg.r);
    const MatrixXd v = gaussian_matrix(cfg.r, cfg.p, rng);
    const MatrixXd rows = u * v;
    const VectorXd w = gaussian_matrix(cfg.p, 1, rng);

    ClusterOptions opt;
    opt.k = cfg.k;
    opt.alpha = cfg.alpha;
    opt.max_iters = cfg.max_iters;
    opt.seed = seed + static_cast<std::uint64_t>(t);
    errors.push_back(approximation_error(rows, fit(rows, opt), w));
  }
  return errors;
}

double template_correlation(const MatrixXd& prototypes, const MatrixXd& templates) {
  double total = 0.0;
  for (Index t = 0; t < templates.rows(); ++t) {
    double best = -1.0;
    for (Index j = 0; j < prototypes.rows(); ++j)
      best = std::max(best, pearson_corr(templates.row(t), prototypes.row(j)));
    total += best;
  }
  return total / static_cast<double>(templates.rows());
}

SyntheticData separating_dataset(std::uint64_t seed, Index entities, Index steps) {
  SyntheticOptions opt;
  opt.entities = entities;
  opt.steps = steps;
  opt.k_true = 4;
  opt.p = 16;
  opt.seed = seed;
  opt.amplitude = 0.1;
  opt.level_spread = 0.15;
  opt.noise_sigma = 0.01;
  opt.cycle_prob = 0.0;
  return generate_synthetic(opt);
}

std::vector<AblationRow> offline_ablation(const TimeSeriesDataset& ds, const AblationConfig& cfg,
                                          const MatrixXd* templates) {
  const auto [begin, end] = ds.partition_range(Partition::kTrain);
  const auto segs = segment(ds.values.middleRows(begin, end - begin), cfg.p);

  std::vector<AblationRow> rows;
  for (double alpha : {0.0, cfg.alpha}) {
    ClusterOptions opt;
    opt.k = cfg.k;
    opt.alpha = alpha;
    opt.max_iters = cfg.max_iters;
    opt.seed = cfg.seed;
    AblationRow row;
    row.label = alpha == 0.0 ? "rec_only" : "rec_corr";
    row.alpha = alpha;
    row.protos = fit(segs, opt);
    if (templates) row.template_corr = template_correlation(row.protos.prototypes, *templates);
    if (cfg.train_models) {
      auto hyper = cfg.hyper;
      hyper.p = cfg.p;
      hyper.k = cfg.k;
      hyper.entities = ds.entities();
      const auto result = train(ds, row.protos, hyper, cfg.train);
      row.test_mse = result.report.test_mse;
      row.test_mae = result.report.test_mae;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace focus
