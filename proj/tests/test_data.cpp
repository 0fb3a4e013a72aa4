#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "focus/data.hpp"
#include "focus/error.hpp"

using namespace focus;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("focus_test_" + name)).string();
}

}  // namespace

TEST(Csv, ParsesSmallTable) {
  const auto ds = parse_csv("a,b\n1,2\n3,4\n5,6\n");
  EXPECT_EQ(ds.steps(), 3);
  EXPECT_EQ(ds.entities(), 2);
  MatrixXd expected(3, 2);
  expected << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(ds.values, expected);
  EXPECT_EQ(ds.entity_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(ds.split.has_value());
  EXPECT_FALSE(ds.norm_stats.has_value());
}

TEST(Csv, EmptyInputIsParseError) { EXPECT_THROW(parse_csv(""), ParseError); }

TEST(Csv, NanCellNamesCoordinates) {
  try {
    parse_csv("a,b\n1,2\n3,NaN\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
}

TEST(Csv, RaggedRowNamesRow) {
  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}

TEST(Csv, MissingFileIsIoError) { EXPECT_THROW(load_csv("/nonexistent/x.csv"), IoError); }

TEST(Csv, SaveLoadRoundTripIsExact) {
  MatrixXd v(3, 2);
  v << 0.1, -1.0 / 3.0, 1e-300, 12345.678901234567, -0.0, 2.5;
  const auto path = temp_path("roundtrip.csv");
  save_csv(path, v, {"x", "y"});
  const auto ds = load_csv(path);
  EXPECT_EQ(ds.values, v);
  std::remove(path.c_str());
}

TEST(Split, SixTwoTwo) {
  const auto s = compute_split(10, {0.6, 0.2, 0.2});
  EXPECT_EQ(s.train_end, 6);
  EXPECT_EQ(s.val_end, 8);
}

TEST(Split, SevenOneTwo) {
  const auto s = compute_split(10, {0.7, 0.1, 0.2});
  EXPECT_EQ(s.train_end, 7);
  EXPECT_EQ(s.val_end, 8);
}

TEST(Split, RejectsBadRatios) {
  EXPECT_THROW(compute_split(10, {0.5, 0.2, 0.2}), ConfigError);
  EXPECT_THROW(compute_split(10, {0.8, 0.2, 0.0}), ConfigError);
  EXPECT_THROW(compute_split(3, {0.7, 0.1, 0.2}), ConfigError);
}

TEST(Normalize, HandEvaluatedZScore) {
  // Train rows 3 and 7 give mean 5, population std 2.
  TimeSeriesDataset ds;
  ds.values.resize(10, 1);
  ds.values << 3, 7, 3, 7, 3, 7, 9, 1, 1, 1;
  const auto out = split_and_normalize(ds, {0.6, 0.2, 0.2});
  EXPECT_DOUBLE_EQ(out.norm_stats->mean(0), 5.0);
  EXPECT_DOUBLE_EQ(out.norm_stats->std(0), 2.0);
  EXPECT_DOUBLE_EQ(out.values(6, 0), 2.0);
}

TEST(Normalize, ConstantColumnBecomesZero) {
  TimeSeriesDataset ds;
  ds.values = MatrixXd::Constant(20, 2, 4.0);
  ds.values.col(1).setLinSpaced(20, 0.0, 1.0);
  const auto out = split_and_normalize(ds, {0.7, 0.1, 0.2});
  EXPECT_TRUE(out.values.col(0).isZero(0.0));
  EXPECT_EQ(out.norm_stats->std(0), 1.0);
}

TEST(Normalize, TrainStatisticsAndRoundTrip) {
  SyntheticOptions opt;
  opt.entities = 3;
  opt.steps = 500;
  opt.seed = 4;
  auto raw = generate_synthetic(opt).dataset;
  raw.values.col(1) = raw.values.col(1) * 30.0 + VectorXd::Constant(500, 100.0);
  const auto ds = split_and_normalize(raw, {0.7, 0.1, 0.2});
  const auto train = ds.values.topRows(ds.split->train_end);
  for (Index e = 0; e < 3; ++e) {
    const double mean = train.col(e).mean();
    const double sd = std::sqrt((train.col(e).array() - mean).square().mean());
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(sd, 1.0, 1e-4);
  }
  const MatrixXd back = denormalize(ds.values, *ds.norm_stats);
  EXPECT_LT((back - raw.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Segment, ExactDivision) {
  MatrixXd x(8, 1);
  x.col(0).setLinSpaced(8, 0, 7);
  const auto s = segment(x, 4);
  ASSERT_EQ(s.count(), 2);
  EXPECT_EQ(s.segments.row(0), (RowVectorXd(4) << 0, 1, 2, 3).finished());
  EXPECT_EQ(s.segments.row(1), (RowVectorXd(4) << 4, 5, 6, 7).finished());
}

TEST(Segment, TruncatesOldestSteps) {
  MatrixXd x(10, 1);
  x.col(0).setLinSpaced(10, 0, 9);
  const auto s = segment(x, 4);
  ASSERT_EQ(s.count(), 2);
  EXPECT_EQ(s.segments.row(0), (RowVectorXd(4) << 2, 3, 4, 5).finished());
  EXPECT_EQ(s.segments.row(1), (RowVectorXd(4) << 6, 7, 8, 9).finished());
}

TEST(Segment, LookbackOf512GivesThirtyTwoPerEntity) {
  const auto s = segment(MatrixXd::Random(512, 3), 16);
  EXPECT_EQ(s.count(), 3 * 32);
}

TEST(Segment, OrderingAndProvenance) {
  MatrixXd x(4, 2);
  x << 0, 10, 1, 11, 2, 12, 3, 13;
  const auto t = segment(x, 2, SegmentAxis::kTemporal);
  EXPECT_EQ(t.provenance[1].entity, 0);
  EXPECT_EQ(t.provenance[1].window, 1);
  EXPECT_EQ(t.segments(2, 0), 10);
  const auto e = segment(x, 2, SegmentAxis::kEntity);
  EXPECT_EQ(e.provenance[1].entity, 1);
  EXPECT_EQ(e.provenance[1].window, 0);
  EXPECT_EQ(e.segments(1, 0), 10);
}

TEST(Segment, RejectsLongSegments) {
  EXPECT_THROW(segment(MatrixXd::Zero(3, 1), 4), ConfigError);
  EXPECT_THROW(segment(MatrixXd::Zero(3, 1), 1), ConfigError);
}

TEST(Segment, ReassembleReproducesSource) {
  const MatrixXd x = MatrixXd::Random(48, 3);
  EXPECT_EQ(reassemble(segment(x, 8), 3), x);
}

TEST(Windows, StayInsideTheirPartition) {
  TimeSeriesDataset ds;
  ds.values = MatrixXd::Random(200, 2);
  ds = split_and_normalize(ds, {0.7, 0.1, 0.2});
  for (auto part : {Partition::kTrain, Partition::kVal, Partition::kTest}) {
    const auto [begin, end] = ds.partition_range(part);
    const auto origins = window_origins(ds, part, 8, 4);
    ASSERT_FALSE(origins.empty());
    EXPECT_EQ(origins.front(), begin);
    EXPECT_EQ(origins.back() + 12, end);
    for (std::size_t i = 1; i < origins.size(); ++i) EXPECT_EQ(origins[i], origins[i - 1] + 1);
  }
}

TEST(Synthetic, NoiselessSingleTemplateRepeats) {
  SyntheticOptions opt;
  opt.k_true = 1;
  opt.noise_sigma = 0.0;
  opt.steps = 160;
  opt.entities = 2;
  const auto data = generate_synthetic(opt);
  const auto segs = segment(data.dataset.values, opt.p);
  for (Index i = 0; i < segs.count(); ++i) EXPECT_EQ(segs.segments.row(i), data.templates.row(0));
}

TEST(Synthetic, SeedIsDeterministic) {
  SyntheticOptions opt;
  opt.seed = 11;
  const auto a = generate_synthetic(opt);
  const auto b = generate_synthetic(opt);
  EXPECT_EQ(a.dataset.values, b.dataset.values);
  opt.seed = 12;
  EXPECT_NE(generate_synthetic(opt).dataset.values, a.dataset.values);
}

TEST(Synthetic, TemplatesHaveZeroMeanAndDistinctShapes) {
  const MatrixXd t = synthetic_templates(4, 16);
  for (Index j = 0; j < 4; ++j) EXPECT_NEAR(t.row(j).mean(), 0.0, 1e-12);
  for (Index a = 0; a < 4; ++a)
    for (Index b = a + 1; b < 4; ++b) EXPECT_GT((t.row(a) - t.row(b)).norm(), 1.0);
}

TEST(Synthetic, Validation) {
  SyntheticOptions opt;
  opt.k_true = 0;
  EXPECT_THROW(generate_synthetic(opt), ConfigError);
  opt.k_true = 4;
  opt.noise_sigma = -1;
  EXPECT_THROW(generate_synthetic(opt), ConfigError);
}
