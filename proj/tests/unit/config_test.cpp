#include <fstream>

#include <gtest/gtest.h>

#include "nemo/config.hpp"
#include "support/fixtures.hpp"

namespace nemo {
namespace {

using nlohmann::json;

CliInvocation parse(std::vector<std::string> extra, const std::string& sub = "augment") {
  std::vector<std::string> args{sub, "--dataset", "d.json", "--embeddings", "e.bin", "--out", "o"};
  args.insert(args.end(), extra.begin(), extra.end());
  return parse_args(args);
}

TEST(Config, DefaultProfile) {
  const auto inv = parse({});
  EXPECT_EQ(inv.subcommand, "augment");
  EXPECT_EQ(inv.config.mining.mode, MiningMode::kI2IUpperT2ILower);
  EXPECT_EQ(inv.config.mining.tau, 0.75);
  EXPECT_EQ(inv.config.mining.k, 200u);
  EXPECT_DOUBLE_EQ(inv.config.gamma, 0.6);
  EXPECT_EQ(inv.config.compositor.grid, GridKind::k2x2);
  EXPECT_EQ(inv.config.compositor.cross_point, CrossPointPolicy::kFixed);
  EXPECT_FALSE(inv.config.compositor.constraints);
}

TEST(Config, Profiles) {
  for (const char* name : {"refcoco", "refcoco+"}) {
    const auto inv = parse({"--profile", name});
    EXPECT_EQ(inv.config.mining.tau, 0.85) << name;
    EXPECT_EQ(inv.config.mining.k, 800u) << name;
    EXPECT_EQ(inv.config.mining.mode, MiningMode::kI2IUpperT2ILower) << name;
  }
  const auto gref = parse({"--profile", "gref"});
  EXPECT_EQ(gref.config.mining.tau, 0.75);
  EXPECT_EQ(gref.config.mining.k, 200u);
  EXPECT_THROW(parse({"--profile", "coco"}), UsageError);
}

TEST(Config, TextToImageDefaults) {
  const auto inv = parse({"--mode", "t2i"});
  EXPECT_EQ(inv.config.mining.tau, 0.25);
  EXPECT_EQ(inv.config.mining.k, 300u);
  const auto overridden = parse({"--mode", "t2i", "--tau", "0.3", "--k", "50"});
  EXPECT_EQ(overridden.config.mining.tau, 0.3);
  EXPECT_EQ(overridden.config.mining.k, 50u);
}

TEST(Config, ExplicitFlagsWinOverProfile) {
  const auto inv = parse({"--profile", "refcoco", "--tau", "0.6", "--k", "100", "--gamma", "0.25"});
  EXPECT_EQ(inv.config.mining.tau, 0.6);
  EXPECT_EQ(inv.config.mining.k, 100u);
  EXPECT_DOUBLE_EQ(inv.config.gamma, 0.25);
}

TEST(Config, TauNone) {
  EXPECT_EQ(parse({"--tau", "none"}).config.mining.tau, std::nullopt);
  EXPECT_THROW(parse({"--tau", "abc"}), UsageError);
  EXPECT_THROW(parse({"--tau", "1.5"}), UsageError);
}

TEST(Config, GammaOutOfRange) {
  try {
    parse({"--gamma", "1.5"});
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
  EXPECT_THROW(parse({"--gamma", "-0.1"}), UsageError);
}

TEST(Config, Conflicts) {
  EXPECT_THROW(parse({"--grid", "3x3", "--constraints", "on"}), UsageError);
  EXPECT_THROW(parse({"--grid", "3x3", "--cross-point", "anywhere"}), UsageError);
  EXPECT_THROW(parse({"--mode", "dual", "--tau", "0.5", "--tau-t2i", "0.3", "--tau-i2i", "0.4"}), UsageError);
  EXPECT_THROW(parse({"--mode", "dual", "--tau-t2i", "0.3"}), UsageError);
  EXPECT_THROW(parse({"--tau-t2i", "0.3"}), UsageError);
  EXPECT_THROW(parse({"--mode", "uniform", "--tau", "0.3"}), UsageError);
  EXPECT_THROW(parse({"--k", "2"}), UsageError);
  EXPECT_THROW(parse({"--workers", "0"}), UsageError);
  EXPECT_THROW(parse({"--constraints", "maybe"}), UsageError);
  EXPECT_THROW(parse({"--grid", "4x4"}), UsageError);
  EXPECT_NO_THROW(parse({"--grid", "3x3"}));
}

TEST(Config, DualMode) {
  const auto inv = parse({"--mode", "dual", "--tau-t2i", "0.3", "--tau-i2i", "0.7"});
  EXPECT_EQ(inv.config.mining.tau, std::nullopt);
  EXPECT_EQ(inv.config.mining.tau_t2i, 0.3);
  EXPECT_EQ(inv.config.mining.tau_i2i, 0.7);
}

TEST(Config, MissingRequiredOption) {
  EXPECT_THROW(parse_args({"augment", "--dataset", "d.json"}), UsageError);
  EXPECT_THROW(parse_args({}), UsageError);
  EXPECT_THROW(parse_args({"bogus"}), UsageError);
}

TEST(Config, EchoRoundTrip) {
  const std::vector<std::vector<std::string>> cases{
      {},
      {"--profile", "refcoco", "--gamma", "0.3", "--seed", "99", "--workers", "4"},
      {"--mode", "t2i", "--tau", "none", "--cross-point", "central-quarter", "--constraints", "on"},
      {"--mode", "dual", "--tau-t2i", "0.2", "--tau-i2i", "0.9", "--k", "17"},
      {"--mode", "uniform", "--grid", "3x3"},
  };
  for (const auto& c : cases) {
    const PipelineConfig original = parse(c).config;
    const json echo = config_to_json(original);
    EXPECT_EQ(resolve_config(overrides_from_json(echo)), original) << echo.dump();
    EXPECT_EQ(config_to_json(resolve_config(overrides_from_json(json::parse(echo.dump())))), echo);
  }
}

TEST(Config, FileThenFlags) {
  testing::TempDir dir;
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << R"({"profile": "refcoco", "gamma": 0.4, "seed": 5, "constraints": true})";
  const auto inv = parse({"--config", path.string(), "--gamma", "0.9"});
  EXPECT_EQ(inv.config.mining.k, 800u);
  EXPECT_DOUBLE_EQ(inv.config.gamma, 0.9);
  EXPECT_EQ(inv.config.master_seed, 5u);
  EXPECT_TRUE(inv.config.compositor.constraints);
}

TEST(Config, FileRejectsUnknownKeys) {
  EXPECT_THROW(overrides_from_json(json{{"gama", 0.5}}), UsageError);
  EXPECT_THROW(overrides_from_json(json::array()), UsageError);
  EXPECT_THROW(overrides_from_json(json{{"gamma", "high"}}), UsageError);
  testing::TempDir dir;
  std::ofstream(dir.path() / "bad.json") << "{";
  EXPECT_THROW(parse({"--config", (dir.path() / "bad.json").string()}), UsageError);
  EXPECT_THROW(parse({"--config", (dir.path() / "missing.json").string()}), UsageError);
}

TEST(Config, HelpListsEveryFlag) {
  const std::string augment = help_text("augment");
  for (const char* flag : {"--dataset", "--embeddings", "--out", "--report", "--dump-previews", "--profile", "--tau",
                           "--tau-t2i", "--tau-i2i", "--k", "--mode", "--gamma", "--grid", "--cross-point",
                           "--constraints", "--seed", "--workers", "--config", "--verbose"}) {
    EXPECT_NE(augment.find(flag), std::string::npos) << flag;
  }
  const std::string analyze = help_text("analyze");
  for (const char* flag : {"--dataset", "--detections", "--out", "--iou-floor"}) {
    EXPECT_NE(analyze.find(flag), std::string::npos) << flag;
  }
  const std::string top = help_text();
  for (const char* sub : {"augment", "mine", "analyze", "validate-embeddings", "preview"}) {
    EXPECT_NE(top.find(sub), std::string::npos) << sub;
  }
  EXPECT_THROW(parse_args({"augment", "--help"}), HelpRequested);
}

TEST(Config, OtherSubcommands) {
  const auto analyze = parse_args({"analyze", "--dataset", "d.json", "--out", "x", "--iou-floor", "0.7"});
  EXPECT_EQ(analyze.subcommand, "analyze");
  EXPECT_DOUBLE_EQ(analyze.iou_floor, 0.7);
  EXPECT_THROW(parse_args({"analyze", "--dataset", "d.json", "--out", "x", "--iou-floor", "2"}), UsageError);
  const auto validate = parse_args({"validate-embeddings", "--embeddings", "e.bin"});
  EXPECT_EQ(validate.subcommand, "validate-embeddings");
  const auto preview = parse({}, "preview");
  EXPECT_EQ(preview.dump_previews, 8u);
  const auto mine = parse_args({"mine", "--dataset", "d", "--embeddings", "e", "--k", "9"});
  EXPECT_EQ(mine.config.mining.k, 9u);
}

}  // namespace
}  // namespace nemo
