#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "focus/bench.hpp"
#include "focus/config.hpp"
#include "focus/container.hpp"
#include "focus/data.hpp"
#include "focus/error.hpp"
#include "focus/training.hpp"

using namespace focus;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

// Flags bound to config keys. Only flags given on the command line override
// the config file, so precedence is flag > file > default.
class Overrides {
 public:
  void bind(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = values_[key];
    options_.emplace_back(cmd->add_option(flag, slot, help), key);
  }

  void apply(RunConfig& cfg) const {
    for (const auto& [opt, key] : options_)
      if (opt->count() > 0) cfg.set(key, values_.at(key));
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> options_;
};

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
};

RunConfig build_config(const Common& common, const Overrides& flags) {
  auto cfg = RunConfig::defaults();
  if (!common.config_path.empty()) cfg.load_file(common.config_path);
  for (const auto& kv : common.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  flags.apply(cfg);
  return cfg;
}

ModelHyper hyper_from(const RunConfig& cfg, Index entities) {
  ModelHyper hp;
  hp.p = cfg.integer("p");
  hp.d = cfg.integer("d");
  hp.m = cfg.integer("m");
  hp.k = cfg.integer("k");
  hp.lookback = cfg.integer("lookback");
  hp.horizon = cfg.integer("horizon");
  hp.entities = entities;
  hp.validate();
  return hp;
}

std::vector<Index> parse_sizes(const std::string& text) {
  std::vector<Index> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    Index v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 1)
      throw ConfigError("--sizes expects comma-separated positive integers, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

TimeSeriesDataset prepared_for_model(const std::string& data_path, const ModelBundle& bundle) {
  auto ds = load_csv(data_path);
  const auto& hp = bundle.params.hyper;
  if (ds.entities() != hp.entities)
    throw ConfigError("entity count mismatch: model was trained on " + std::to_string(hp.entities) +
                      " entities but '" + data_path + "' has " + std::to_string(ds.entities()));
  ds.split = compute_split(ds.steps(), bundle.ratio);
  const NormStats stats = bundle.norm ? *bundle.norm : train_statistics(ds.values.topRows(ds.split->train_end));
  ds.values = normalize(ds.values, stats);
  ds.norm_stats = stats;
  return ds;
}

int cmd_synth(const RunConfig& cfg, const std::string& out) {
  const auto data = generate_synthetic(cfg.synthetic());
  save_csv(out, data.dataset.values, data.dataset.entity_names);
  PrototypeSet templates;
  templates.prototypes = data.templates;
  templates.alpha = cfg.real("alpha");
  templates.fit_meta.seed = cfg.seed();
  const auto sidecar = out + ".templates";
  save_prototypes(sidecar, templates);
  std::cout << "data=" << out << "\ntemplates=" << sidecar << "\nsteps=" << data.dataset.steps()
            << "\nentities=" << data.dataset.entities() << "\n";
  return 0;
}

int cmd_cluster(const RunConfig& cfg, const std::string& data_path, const std::string& out) {
  const auto ds = split_and_normalize(load_csv(data_path), cfg.ratio());
  const auto [begin, end] = ds.partition_range(Partition::kTrain);
  const auto segs = segment(ds.values.middleRows(begin, end - begin), cfg.integer("p"));
  const auto opt = cfg.cluster();
  std::cerr << "clustering " << segs.count() << " segments into " << opt.k << " prototypes\n";
  const auto protos = fit(segs, opt);
  save_prototypes(out, protos);
  std::cout << "k=" << protos.k() << "\np=" << protos.p() << "\nalpha=" << protos.alpha
            << "\niterations=" << protos.fit_meta.iterations << "\nloss=" << protos.fit_meta.final_loss
            << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& protos_path,
              const std::string& out, const std::string& report_path) {
  const auto ratio = cfg.ratio();
  const auto ds = split_and_normalize(load_csv(data_path), ratio);
  const auto protos = load_prototypes(protos_path);
  // Segment length and prototype count come from the prototype file.
  auto tuned = cfg;
  tuned.set("p", std::to_string(protos.p()));
  tuned.set("k", std::to_string(protos.k()));
  const auto hp = hyper_from(tuned, ds.entities());

  TrainOptions to;
  to.opt = cfg.optimizer();
  to.max_train_windows = cfg.integer("max_train_windows");
  to.max_val_windows = cfg.integer("max_val_windows");
  to.progress = &std::cerr;
  const auto result = train(ds, protos, hp, to);

  save_model(out, {result.params, protos, ds.norm_stats, ratio});
  if (!report_path.empty()) {
    std::ofstream rep(report_path);
    if (!rep) throw IoError("cannot write '" + report_path + "'");
    result.report.write_records(rep);
  }
  result.report.write_records(std::cout);
  std::cout << "best_epoch=" << result.report.best_epoch << "\nbest_val_mse=" << result.report.best_val_mse
            << "\ntest_mse=" << result.report.test_mse << "\ntest_mae=" << result.report.test_mae << "\n";
  return 0;
}

int cmd_eval(const std::string& data_path, const std::string& model_path, const std::string& split) {
  const auto part = parse_partition(split);
  const auto bundle = load_model(model_path);
  const auto ds = prepared_for_model(data_path, bundle);
  const auto m = evaluate(ds, part, bundle.params, bundle.protos);
  if (!std::isfinite(m.mse)) throw NumericalError("evaluation produced a non-finite error");
  std::cout << "mse=" << m.mse << " mae=" << m.mae << "\n";
  std::cerr << "split=" << split << " windows=" << m.windows << "\n";
  return 0;
}

int cmd_forecast(const std::string& data_path, const std::string& model_path, const std::string& out) {
  const auto bundle = load_model(model_path);
  const auto ds = prepared_for_model(data_path, bundle);
  const auto& hp = bundle.params.hyper;
  if (ds.steps() < hp.lookback)
    throw ConfigError("'" + data_path + "' has " + std::to_string(ds.steps()) +
                      " steps, fewer than the lookback " + std::to_string(hp.lookback));
  const auto batch = forecast(ds.values.bottomRows(hp.lookback), bundle.params, bundle.protos, *ds.norm_stats);
  if (!batch.denormalized.allFinite()) throw NumericalError("forecast contains non-finite values");
  auto names = load_csv(data_path).entity_names;
  save_csv(out, batch.denormalized, names);
  std::cout << "forecast=" << out << "\nhorizon=" << hp.horizon << "\nentities=" << ds.entities() << "\n";
  return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& mode, const std::string& sizes, int repeats,
              int warmups, Index entities) {
  SweepFixed fx;
  fx.k = cfg.integer("k");
  fx.d = cfg.integer("d");
  fx.p = cfg.integer("p");
  fx.m = cfg.integer("m");
  fx.horizon = cfg.integer("horizon");
  fx.entities = entities;
  TimingOptions t;
  t.repeats = repeats;
  t.warmups = warmups;
  t.seed = cfg.seed();
  const auto report = scaling_sweep(parse_sweep_mode(mode), parse_sizes(sizes), fx, t);
  report.write_csv(std::cout);
  std::cerr << "flop slope " << report.flop_fit.slope << ", time slope " << report.time_fit.slope
            << " (residual " << report.time_fit.residual << ")\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  GradCheckConfig gc;
  gc.seed = cfg.seed();
  const auto checks = gradient_check(gc);
  double worst = 0.0;
  std::cout << "tensor,entries,max_rel_error\n";
  for (const auto& c : checks) {
    std::cout << c.name << ',' << c.entries << ',' << c.max_rel_error << '\n';
    worst = std::max(worst, c.max_rel_error);
  }
  if (!(worst < 1e-4)) {
    std::cerr << "gradient check failed: max relative error " << worst << "\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FOCUS: prototype-attention forecasting"};
  app.require_subcommand(1);
  Common common;
  Overrides flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "key=value configuration file");
    cmd->add_option("--set", common.sets, "override any config key (key=value), repeatable");
    flags.bind(cmd, "--seed", "seed", "run seed");
  };

  std::string out, data, protos_path, model, split = "test", mode, sizes, report;
  int repeats = 7, warmups = 2;
  Index bench_entities = 7;

  auto* synth = app.add_subcommand("synth", "generate a planted-template dataset");
  add_common(synth);
  synth->add_option("--out", out, "output CSV")->required();
  flags.bind(synth, "--entities", "entities", "entity count");
  flags.bind(synth, "--steps", "steps", "time steps");
  flags.bind(synth, "--k-true", "k_true", "number of templates");
  flags.bind(synth, "--sigma", "sigma", "noise standard deviation");
  flags.bind(synth, "--p", "p", "template length");

  auto* cluster = app.add_subcommand("cluster", "fit prototypes on the training split");
  add_common(cluster);
  cluster->add_option("--data", data, "input CSV")->required();
  cluster->add_option("--out", out, "output prototype file")->required();
  flags.bind(cluster, "--p", "p", "segment length");
  flags.bind(cluster, "--k", "k", "prototype count");
  flags.bind(cluster, "--alpha", "alpha", "correlation weight");
  flags.bind(cluster, "--max-iters", "max_iters", "iteration cap");

  auto* train_cmd = app.add_subcommand("train", "train the forecaster");
  add_common(train_cmd);
  train_cmd->add_option("--data", data, "input CSV")->required();
  train_cmd->add_option("--protos", protos_path, "prototype file")->required();
  train_cmd->add_option("--out", out, "output model file")->required();
  train_cmd->add_option("--report", report, "write per-epoch records here");
  flags.bind(train_cmd, "--lookback", "lookback", "lookback steps L");
  flags.bind(train_cmd, "--horizon", "horizon", "forecast steps");
  flags.bind(train_cmd, "--d", "d", "embedding width");
  flags.bind(train_cmd, "--m", "m", "readout queries");
  flags.bind(train_cmd, "--epochs", "max_epochs", "epoch cap");
  flags.bind(train_cmd, "--lr", "lr", "learning rate");
  flags.bind(train_cmd, "--batch-size", "batch_size", "mini-batch size");
  flags.bind(train_cmd, "--patience", "patience", "early-stopping patience");
  flags.bind(train_cmd, "--max-train-windows", "max_train_windows", "windows per epoch (0 = all)");

  auto* eval_cmd = app.add_subcommand("eval", "report MSE and MAE on a split");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", data, "input CSV")->required();
  eval_cmd->add_option("--model", model, "model file")->required();
  eval_cmd->add_option("--split", split, "train|val|test")->required();

  auto* forecast_cmd = app.add_subcommand("forecast", "forecast past the end of the data");
  add_common(forecast_cmd);
  forecast_cmd->add_option("--data", data, "input CSV")->required();
  forecast_cmd->add_option("--model", model, "model file")->required();
  forecast_cmd->add_option("--out", out, "output CSV")->required();

  auto* bench = app.add_subcommand("bench", "scaling sweep, CSV on stdout");
  add_common(bench);
  bench->add_option("--mode", mode, "protoattn|full_attn|end_to_end")->required();
  bench->add_option("--sizes", sizes, "ascending segment counts, comma-separated")->required();
  bench->add_option("--repeats", repeats, "timed repetitions");
  bench->add_option("--warmups", warmups, "untimed warmup runs");
  bench->add_option("--entities", bench_entities, "entities for end_to_end");
  flags.bind(bench, "--k", "k", "prototype count");
  flags.bind(bench, "--d", "d", "width");
  flags.bind(bench, "--p", "p", "segment length");
  flags.bind(bench, "--m", "m", "readout queries");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const auto cfg = build_config(common, flags);
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (cluster->parsed()) return cmd_cluster(cfg, data, out);
    if (train_cmd->parsed()) return cmd_train(cfg, data, protos_path, out, report);
    if (eval_cmd->parsed()) return cmd_eval(data, model, split);
    if (forecast_cmd->parsed()) return cmd_forecast(data, model, out);
    if (bench->parsed()) return cmd_bench(cfg, mode, sizes, repeats, warmups, bench_entities);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}
