#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "semgeo/cli.hpp"
#include "semgeo/io.hpp"

using namespace semgeo;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "semgeo_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double csv_value(const std::string& csv, const std::string& column) {
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::istringstream h(header), r(row);
  std::string name, value;
  while (std::getline(h, name, ',') && std::getline(r, value, ',')) {
    if (name == column) return std::stod(value);
  }
  throw std::runtime_error("column not found: " + column);
}

}  // namespace

TEST(Cli, AlignThenEvalDepthOnPlane) {
  const fs::path dir = fresh_dir("plane");
  ASSERT_EQ(run({"synth", "--out", (dir / "scene").string()}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "scene" / "frames" / "target.png"));
  EXPECT_TRUE(fs::exists(dir / "scene" / "gt" / "depth.png"));
  EXPECT_TRUE(fs::exists(dir / "scene" / "config.resolved"));

  const CliRun a = run({"align", (dir / "scene").string(), "--out", (dir / "run").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* f : {"depth.png", "pose.txt", "flow.png", "trace.csv", "config.resolved"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }
  const CliRun e = run({"eval-depth", "--pred", (dir / "run" / "depth.png").string(), "--gt",
                     (dir / "scene" / "gt" / "depth.png").string(), "--out", (dir / "eval").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_LT(csv_value(read_file(dir / "eval" / "depth_metrics.csv"), "abs_rel"), 0.05);
}

TEST(Cli, TraceHasOneRowPerIteration) {
  const fs::path dir = fresh_dir("trace");
  ASSERT_EQ(run({"synth", "--out", (dir / "scene").string(), "--seed", "3"}).code, 0);
  const CliRun a = run({"align", (dir / "scene").string(), "--out", (dir / "run").string(), "--iters", "7",
                     "--losses", "photo,smooth,edge"});
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string trace = read_file(dir / "run" / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "iteration,total,photo,smooth,edge");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 8);
  const std::string resolved = read_file(dir / "run" / "config.resolved");
  EXPECT_NE(resolved.find("iters=7\n"), std::string::npos);
  EXPECT_NE(resolved.find("losses=photo,smooth,edge\n"), std::string::npos);
}

TEST(Cli, EvalDepthRejectsMismatchedSizes) {
  const fs::path dir = fresh_dir("mismatch");
  write_depth_png(dir / "a.png", DepthMap(4, 4, 2.0));
  write_depth_png(dir / "b.png", DepthMap(4, 5, 2.0));
  const CliRun r = run({"eval-depth", "--pred", (dir / "a.png").string(), "--gt", (dir / "b.png").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("dimension"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckDefaultPasses) {
  const CliRun r = run({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("gradient check passed"), std::string::npos);
}

TEST(Cli, AlignRefusesGroundTruthDirectories) {
  const fs::path dir = fresh_dir("refuse");
  ASSERT_EQ(run({"synth", "--out", (dir / "scene").string()}).code, 0);
  const CliRun r = run({"align", (dir / "scene" / "gt").string(), "--out", (dir / "run").string(), "--iters", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ground truth"), std::string::npos) << r.err;
}

TEST(Cli, AlignWorksWithoutGroundTruth) {
  const fs::path dir = fresh_dir("nogt");
  ASSERT_EQ(run({"synth", "--out", (dir / "scene").string()}).code, 0);
  fs::remove_all(dir / "scene" / "gt");
  const CliRun r = run({"align", (dir / "scene").string(), "--out", (dir / "run").string(), "--iters", "3",
                     "--losses", "photo,smooth,transfer"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "classifier.bin"));
  EXPECT_NO_THROW(read_classifier(dir / "run" / "classifier.bin"));
}

TEST(Cli, BadInputsFailWithMessages) {
  const fs::path dir = fresh_dir("bad");
  write_file_atomic(dir / "x.png", "not a png");
  CliRun r = run({"eval-depth", "--pred", (dir / "x.png").string(), "--gt", (dir / "x.png").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("format error"), std::string::npos);
  r = run({"align", (dir / "absent").string(), "--out", (dir / "o").string()});
  EXPECT_NE(r.code, 0);
  r = run({"frobnicate"});
  EXPECT_NE(r.code, 0);
  write_file_atomic(dir / "cfg.txt", "alpha=yes\n");
  r = run({"gradcheck", "--config", (dir / "cfg.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
}

TEST(Cli, EncodeWritesChannelDump) {
  const fs::path dir = fresh_dir("encode");
  write_file_atomic(dir / "cfg.txt", "scene=two_plane\nclasses=2\nsemantic_classes=2\n");
  ASSERT_EQ(run({"synth", "--config", (dir / "cfg.txt").string(), "--out", (dir / "scene").string()}).code, 0);
  const CliRun r = run({"encode", (dir / "scene").string(), "--config", (dir / "cfg.txt").string(), "--out",
                     (dir / "enc").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string channels = read_file(dir / "enc" / "channels.txt");
  EXPECT_EQ(channels, "r\ng\nb\nsemantic_0\nsemantic_1\ninstance_edge\n");
  EXPECT_EQ(fs::file_size(dir / "enc" / "augmented.bin"), 12u + 8u * 64 * 64 * 6);
}
