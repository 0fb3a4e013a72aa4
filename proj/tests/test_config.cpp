#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "focus/config.hpp"
#include "focus/error.hpp"

using namespace focus;

TEST(Config, DefaultsMatchDocumentedValues) {
  const auto c = RunConfig::defaults();
  EXPECT_EQ(c.integer("p"), 16);
  EXPECT_EQ(c.real("alpha"), 0.2);
  EXPECT_EQ(c.integer("m"), 6);
  const auto o = c.optimizer();
  EXPECT_EQ(o.lr, 1e-3);
  EXPECT_EQ(o.batch_size, 32);
  EXPECT_EQ(o.patience, 5);
  const auto cl = c.cluster();
  EXPECT_EQ(cl.opt.lr, 1e-2);
  EXPECT_EQ(cl.opt.weight_decay, 0.0);
  EXPECT_EQ(cl.max_iters, 500);
}

TEST(Config, FlagOverFileOverDefault) {
  const auto path = (std::filesystem::temp_directory_path() / "focus_cfg.txt").string();
  {
    std::ofstream out(path);
    out << "# comment\nk = 8\nalpha=0.5\n\n";
  }
  auto c = RunConfig::defaults();
  c.load_file(path);
  c.set("k", "12");
  EXPECT_EQ(c.integer("k"), 12);      // flag
  EXPECT_EQ(c.real("alpha"), 0.5);    // file
  EXPECT_EQ(c.integer("p"), 16);      // default
  std::remove(path.c_str());
}

TEST(Config, UnknownKeyNamesFileAndLine) {
  auto c = RunConfig::defaults();
  try {
    c.load_text("k=4\nbogus=1\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run.cfg:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  }
}

TEST(Config, BadValuesRejected) {
  auto c = RunConfig::defaults();
  c.set("k", "four");
  EXPECT_THROW(c.integer("k"), ConfigError);
  c = RunConfig::defaults();
  c.set("beta1", "1.5");
  EXPECT_THROW(c.optimizer(), ConfigError);
  EXPECT_THROW(c.load_text("novalue\n"), ConfigError);
}
