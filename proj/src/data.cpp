#include "focus/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "focus/error.hpp"
#include "focus/rng.hpp"

namespace focus {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

Partition parse_partition(const std::string& name) {
  if (name == "train") return Partition::kTrain;
  if (name == "val") return Partition::kVal;
  if (name == "test") return Partition::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train|val|test)");
}

std::pair<Index, Index> TimeSeriesDataset::partition_range(Partition part) const {
  if (!split) throw ConfigError("dataset has no split; call split_and_normalize first");
  switch (part) {
    case Partition::kTrain: return {0, split->train_end};
    case Partition::kVal: return {split->train_end, split->val_end};
    case Partition::kTest: return {split->val_end, steps()};
  }
  return {0, 0};
}

TimeSeriesDataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw ParseError("csv: empty input, expected a header row");

  TimeSeriesDataset ds;
  for (auto cell : split_commas(trim(line))) ds.entity_names.emplace_back(trim(cell));
  const auto n = static_cast<Index>(ds.entity_names.size());

  std::vector<double> flat;
  Index rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto cells = split_commas(body);
    if (static_cast<Index>(cells.size()) != n) {
      throw ParseError("csv: row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(n));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      const auto where = "row " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + " ('" + ds.entity_names[c] + "')";
      if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("csv: cannot parse '" + std::string(cell) + "' at " + where);
      if (!std::isfinite(v))
        throw ParseError("csv: non-finite value '" + std::string(cell) + "' at " + where);
      flat.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("csv: no data rows after the header");

  ds.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(flat.data(), rows, n);
  return ds;
}

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void save_csv(const std::string& path, const MatrixXd& values,
              const std::vector<std::string>& names) {
  if (static_cast<Index>(names.size()) != values.cols())
    throw ContractError("save_csv: name count does not match column count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  char buf[64];
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, values(r, c));
      if (c) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

SplitIndices compute_split(Index steps, const SplitRatio& ratio) {
  if (!(ratio.train > 0 && ratio.val > 0 && ratio.test > 0))
    throw ConfigError("split ratios must be positive");
  if (std::abs(ratio.train + ratio.val + ratio.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  const double t = static_cast<double>(steps);
  // The epsilon absorbs products like 0.7 * 10 landing just below an integer.
  SplitIndices s;
  s.train_end = static_cast<Index>(std::floor(ratio.train * t + 1e-9));
  s.val_end = static_cast<Index>(std::floor((ratio.train + ratio.val) * t + 1e-9));
  if (!(0 < s.train_end && s.train_end < s.val_end && s.val_end < steps)) {
    throw ConfigError("series of " + std::to_string(steps) +
                      " steps is too short for a non-empty train/val/test split");
  }
  return s;
}

NormStats train_statistics(const MatrixXd& train_rows) {
  NormStats s;
  s.mean = train_rows.colwise().mean().transpose();
  s.std.resize(train_rows.cols());
  for (Index c = 0; c < train_rows.cols(); ++c) {
    const double var =
        (train_rows.col(c).array() - s.mean(c)).square().sum() / train_rows.rows();
    const double sd = std::sqrt(var);
    s.std(c) = sd < 1e-8 ? 1.0 : sd;
  }
  return s;
}

MatrixXd normalize(const MatrixXd& values, const NormStats& stats) {
  return (values.rowwise() - stats.mean.transpose()).array().rowwise() /
         stats.std.transpose().array();
}

MatrixXd denormalize(const MatrixXd& values, const NormStats& stats) {
  return (values.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
         stats.mean.transpose();
}

TimeSeriesDataset split_and_normalize(TimeSeriesDataset ds, const SplitRatio& ratio) {
  const auto split = compute_split(ds.steps(), ratio);
  auto stats = train_statistics(ds.values.topRows(split.train_end));
  ds.values = normalize(ds.values, stats);
  ds.split = split;
  ds.norm_stats = std::move(stats);
  return ds;
}

SegmentMatrix segment(const MatrixXd& x, Index p, SegmentAxis axis) {
  if (p < 2) throw ConfigError("segment length p must be at least 2");
  if (p > x.rows())
    throw ConfigError("segment length p=" + std::to_string(p) +
                      " exceeds series length " + std::to_string(x.rows()));
  const Index kept = usable_length(x.rows(), p);
  const Index offset = x.rows() - kept;
  const Index l = kept / p;
  const Index n = x.cols();

  SegmentMatrix out;
  out.segments.resize(l * n, p);
  out.provenance.reserve(static_cast<std::size_t>(l * n));
  Index row = 0;
  auto emit = [&](Index e, Index w) {
    out.segments.row(row++) = x.col(e).segment(offset + w * p, p).transpose();
    out.provenance.push_back({e, w});
  };
  if (axis == SegmentAxis::kTemporal) {
    for (Index e = 0; e < n; ++e)
      for (Index w = 0; w < l; ++w) emit(e, w);
  } else {
    for (Index w = 0; w < l; ++w)
      for (Index e = 0; e < n; ++e) emit(e, w);
  }
  return out;
}

MatrixXd reassemble(const SegmentMatrix& segs, Index entities) {
  const Index p = segs.length();
  Index windows = 0;
  for (const auto& pv : segs.provenance) windows = std::max(windows, pv.window + 1);
  MatrixXd x = MatrixXd::Zero(windows * p, entities);
  for (Index r = 0; r < segs.count(); ++r) {
    const auto& pv = segs.provenance[static_cast<std::size_t>(r)];
    x.col(pv.entity).segment(pv.window * p, p) = segs.segments.row(r).transpose();
  }
  return x;
}

std::vector<Index> window_origins(const TimeSeriesDataset& ds, Partition part,
                                  Index lookback, Index horizon) {
  const auto [begin, end] = ds.partition_range(part);
  std::vector<Index> origins;
  for (Index t = begin; t + lookback + horizon <= end; ++t) origins.push_back(t);
  return origins;
}

WindowedInstance make_instance(const MatrixXd& values, Index origin, Index lookback,
                               Index horizon) {
  if (origin < 0 || origin + lookback + horizon > values.rows())
    throw ContractError("make_instance: window exceeds the series");
  return {values.middleRows(origin, lookback), values.middleRows(origin + lookback, horizon),
          origin};
}

MatrixXd synthetic_templates(Index k, Index p) {
  MatrixXd t(k, p);
  for (Index j = 0; j < k; ++j) {
    const double freq = static_cast<double>(1 + j / 2);
    const double phase = (j % 2) * std::numbers::pi / 2.0;
    for (Index s = 0; s < p; ++s) {
      t(j, s) = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(s) /
                             static_cast<double>(p) + phase);
    }
  }
  return t;
}

SyntheticData generate_synthetic(const SyntheticOptions& opt) {
  if (opt.k_true < 1) throw ConfigError("k_true must be at least 1");
  if (opt.noise_sigma < 0) throw ConfigError("noise sigma must be non-negative");
  if (opt.entities < 1 || opt.steps < 1) throw ConfigError("entities and steps must be positive");
  if (opt.p < 2) throw ConfigError("template length p must be at least 2");
  if (2 * (1 + (opt.k_true - 1) / 2) > opt.p)
    throw ConfigError("too many templates for p=" + std::to_string(opt.p));

  SyntheticData out;
  out.templates = synthetic_templates(opt.k_true, opt.p);

  auto rng = stage_rng(opt.seed, "synth");
  std::uniform_int_distribution<Index> pick(0, opt.k_true - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, opt.noise_sigma > 0 ? opt.noise_sigma : 1.0);
  std::uniform_real_distribution<double> level(-opt.level_spread, opt.level_spread);

  MatrixXd values(opt.steps, opt.entities);
  for (Index e = 0; e < opt.entities; ++e) {
    Index current = pick(rng);
    for (Index start = 0; start < opt.steps; start += opt.p) {
      const Index len = std::min(opt.p, opt.steps - start);
      const double offset = opt.level_spread > 0 ? level(rng) : 0.0;
      values.col(e).segment(start, len) =
          (opt.amplitude * out.templates.row(current).head(len).transpose()).array() + offset;
      current = coin(rng) < opt.cycle_prob ? (current + 1) % opt.k_true : pick(rng);
    }
  }
  if (opt.noise_sigma > 0) {
    for (Index t = 0; t < opt.steps; ++t)
      for (Index e = 0; e < opt.entities; ++e) values(t, e) += noise(rng);
  }

  auto& ds = out.dataset;
  ds.values = std::move(values);
  ds.frequency = "synthetic";
  for (Index e = 0; e < opt.entities; ++e) ds.entity_names.push_back("e" + std::to_string(e));
  return out;
}

}  // namespace focus
