#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pointcpr");
  std::ostringstream out, err;
  const int code = pointcpr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("pointcpr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "spec.txt") << "classes=sphere,cube count=3 points=64 noise=0.01 seed=4\n";
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  void make_data() { ASSERT_EQ(run({"synth", "--spec", p("spec.txt"), "--out", p("data")}).code, 0); }

  void make_ckpt(const std::string& name = "model.ckpt") {
    const Result r = run({"pretrain", "--preset", "tiny", "--data", p("data"), "--out", p(name), "--steps", "3",
                          "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, HelpAndUsageErrors) {
  const Result help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"pretrain", "classify", "complete", "count", "ablate", "synth"})
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  EXPECT_EQ(run({}).code, 2);
  const Result bad = run({"count", "--bogus"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(bad.err.rfind("error[usage]:", 0), 0u) << bad.err;
  EXPECT_EQ(run({"count", "--preset", "huge"}).code, 2);
}

TEST_F(CliTest, SynthWritesLabeledFiles) {
  make_data();
  const std::string labels = slurp(dir / "data" / "labels.csv");
  EXPECT_EQ(labels.rfind("file,label,class\n", 0), 0u);
  EXPECT_NE(labels.find("sphere_0000.xyz,0,sphere"), std::string::npos);
  EXPECT_NE(labels.find("cube_0002.xyz,1,cube"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "data" / "cube_0002.xyz"));
}

TEST_F(CliTest, PretrainIsReproducible) {
  make_data();
  make_ckpt("a.ckpt");
  make_ckpt("b.ckpt");
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  const std::string log = slurp(dir / "a.ckpt.loss.csv");
  EXPECT_EQ(log.rfind("step,total,semantic,position,lr\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
}

TEST_F(CliTest, CompleteWithGroundTruth) {
  make_data();
  make_ckpt();
  const std::string in = p("data/sphere_0001.xyz");
  const Result r = run({"complete", "--ckpt", p("model.ckpt"), "--in", in, "--gt", in, "--out", p("done.ply"),
                        "--normalize"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("chamfer_l2="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "done.ply"));
}

TEST_F(CliTest, ClassifyReportsAccuracy) {
  make_data();
  make_ckpt();
  const Result r = run({"classify", "--ckpt", p("model.ckpt"), "--data", p("data"), "--set", "epochs=2", "--set",
                        "classes=2", "--csv", p("acc.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "acc.csv").rfind("metric,value\n", 0), 0u);
}

TEST_F(CliTest, CountAndCsv) {
  const Result r = run({"count", "--target", "classifier", "--csv", p("cost.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("match"), std::string::npos);
  EXPECT_EQ(slurp(dir / "cost.csv").rfind("section,name,value\n", 0), 0u);
  EXPECT_EQ(run({"count", "--target", "sideways"}).code, 1);
}

TEST_F(CliTest, AblateSmall) {
  const Result r = run({"ablate", "--preset", "tiny", "--set", "epochs=1", "--set", "pretrain_clouds=4", "--seeds",
                        "0", "--train-per-class", "2", "--val-per-class", "1", "--steps", "1", "--csv", p("abl.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("partial-aware"), std::string::npos);
  EXPECT_EQ(slurp(dir / "abl.csv").rfind("variant,mean,std,seeds,isolated,error\n", 0), 0u);
}

TEST_F(CliTest, RuntimeErrorsAreTagged) {
  const Result missing = run({"pretrain", "--preset", "tiny", "--data", p("nowhere"), "--out", p("x.ckpt")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.rfind("error[argument]:", 0), 0u) << missing.err;

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  std::ofstream(dir / "pc.xyz") << "0 0 0\n";
  const Result ck = run({"complete", "--ckpt", p("junk.ckpt"), "--in", p("pc.xyz"), "--out", p("o.xyz")});
  EXPECT_EQ(ck.code, 1);
  EXPECT_EQ(ck.err.rfind("error[checkpoint]:", 0), 0u) << ck.err;

  std::ofstream(dir / "bad.xyz") << "0 0 0\n1 2\n";
  std::ofstream(dir / "bad.cfg") << "dim = 16\n";
  const Result parse = run({"pretrain", "--config", p("bad.cfg"), "--data", p("bad.xyz"), "--out", p("y.ckpt")});
  EXPECT_EQ(parse.code, 1);
  EXPECT_NE(parse.err.find("error["), std::string::npos);
}
