// Runs the built command-line tool as a subprocess.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

using nlohmann::json;

namespace {

struct Proc {
  int code = -1;
  std::string out;
};

Proc run(const std::string& args) {
  const std::string cmd = std::string(XASTNN_CLI) + " " + args + " 2>/dev/null";
  Proc r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the wall-clock field so logs from two runs can be compared.
std::string without_seconds(const std::string& log) {
  std::stringstream in(log), out;
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j.erase("seconds");
    out << j.dump() << "\n";
  }
  return out.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("xastnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::filesystem::path dir_;
};

const std::string kLoopSwap = std::string(XASTNN_TEST_DATA) + "/loop_swap.c";

}  // namespace

TEST_F(Cli, SplitGolden) {
  const Proc r = run("split " + kLoopSwap);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "While\nIf\nCompound\nAssign(3)\nAssign(4)\nAssign(5)\nEnd\nElse\nAssign(8)\nAssign(9)\n");
  const Proc j = run("--format json split " + kLoopSwap);
  EXPECT_EQ(j.code, 0);
  EXPECT_EQ(json::parse(j.out).size(), 10u);
}

TEST_F(Cli, ExitCodes) {
  {
    std::ofstream(path("bad.c")) << "a = ;\n";
  }
  EXPECT_EQ(run("split " + path("bad.c")).code, 1);
  EXPECT_EQ(run("split " + path("missing.c")).code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("--precision f16 split " + kLoopSwap).code, 1);
  EXPECT_EQ(run("embed " + kLoopSwap + " --model " + path("nope.ckpt")).code, 1);
}

TEST_F(Cli, ExportAstRoundTrips) {
  ASSERT_EQ(run("export-ast " + kLoopSwap + " -o " + path("a.json")).code, 0);
  const Proc r = run("split " + path("a.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, run("split " + kLoopSwap).out);
}

TEST_F(Cli, TrainEmbedEvalDeterministic) {
  const std::string data = path("d.jsonl");
  ASSERT_EQ(run("--seed 5 gen-corpus classify -n 120 -o " + data).code, 0);
  const std::string flags = "--d 8 --m 8 --epochs 2 --batch_size 16 ";
  ASSERT_EQ(run(flags + "train " + data + " -o " + path("a.ckpt") + " --metrics " + path("a.log")).code, 0);
  ASSERT_EQ(run(flags + "train " + data + " -o " + path("b.ckpt") + " --metrics " + path("b.log")).code, 0);
  const std::string log = slurp(path("a.log"));
  EXPECT_EQ(without_seconds(log), without_seconds(slurp(path("b.log"))));
  std::stringstream lines(log);
  std::string line, last;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    last = line;
    ++n;
  }
  EXPECT_EQ(n, 3u);
  EXPECT_TRUE(json::parse(last)["final"].get<bool>());

  const Proc e1 = run("embed " + kLoopSwap + " --model " + path("a.ckpt"));
  const Proc e2 = run("embed " + kLoopSwap + " --model " + path("b.ckpt"));
  EXPECT_EQ(e1.code, 0);
  EXPECT_EQ(e1.out, e2.out);
  std::stringstream values(e1.out);
  double v;
  std::size_t count = 0;
  while (values >> v) ++count;
  EXPECT_EQ(count, 16u);
  const Proc ej = run("--format json embed " + kLoopSwap + " --model " + path("a.ckpt"));
  EXPECT_EQ(json::parse(ej.out).size(), 16u);

  const Proc ev = run("--format json eval " + data + " --model " + path("a.ckpt") + " --split test");
  EXPECT_EQ(ev.code, 0);
  EXPECT_DOUBLE_EQ(json::parse(ev.out)["accuracy"].get<double>(), json::parse(last)["test_metric"].get<double>());
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  const std::string data = path("d.jsonl");
  ASSERT_EQ(run("gen-corpus classify -n 60 -o " + data).code, 0);
  {
    std::ofstream(path("c.toml")) << "d = 6\nm = 5\nepochs = 1\n";
  }
  ASSERT_EQ(run("--config " + path("c.toml") + " --m 3 train " + data + " -o " + path("c.ckpt")).code, 0);
  const Proc e = run("--format json embed " + kLoopSwap + " --model " + path("c.ckpt"));
  EXPECT_EQ(json::parse(e.out).size(), 6u);  // 2 * m with m overridden to 3
  {
    std::ofstream(path("bad.toml")) << "dimension = 6\n";
  }
  EXPECT_EQ(run("--config " + path("bad.toml") + " train " + data + " -o " + path("x.ckpt")).code, 1);
}

TEST_F(Cli, BenchJsonRoundTrip) {
  const std::string corpus = path("h.jsonl");
  ASSERT_EQ(run("gen-corpus homogeneous -n 16 -o " + corpus).code, 0);
  const Proc r = run("--format json --d 8 --m 8 bench " + corpus + " --batch-sizes 2,4 --runs 1");
  ASSERT_EQ(r.code, 0);
  const json rows = json::parse(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["batch_size"], 1);
  EXPECT_EQ(json::parse(rows.dump()), rows);
  const Proc t = run("--d 8 --m 8 bench " + corpus + " --batch-sizes 2 --runs 1");
  EXPECT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("speedup"), std::string::npos);
  EXPECT_EQ(run("bench " + corpus + " --batch-sizes 0").code, 1);
}
