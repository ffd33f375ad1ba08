#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "fpb/error.hpp"

using namespace fpb;
using namespace fpb::cli;
namespace fs = std::filesystem;

namespace {

const char* kAniso = R"(
[model]
dim = 2
D = 2 1 1 3
n = 0 1

[boundary]
sigma = 0.3
l = 0.05

[lattice]
tau_a = 1e-4
walkers = 2000
steps = 100
seed = 11

[sweep]
tau = 0.002, 0.004, 0.008, 0.016, 0.032
)";

struct Scratch {
  fs::path dir;
  Scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("fpb_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, ParsesAllBlocks) {
  auto cfg = parse_config(std::string(kAniso) + "[solver]\ndepth = 2\ndz = 0.05\nT = 0.1\nstart = 0.5\n");
  ASSERT_TRUE(cfg.model && cfg.boundary && cfg.lattice && cfg.solver);
  EXPECT_DOUBLE_EQ(cfg.model->D(0, 1), 1.0);
  EXPECT_TRUE(cfg.model->g.isIdentity());
  EXPECT_DOUBLE_EQ(cfg.boundary->l_upsilon, 0.05);
  EXPECT_EQ(cfg.lattice->walkers, 2000u);
  EXPECT_EQ(cfg.tau.size(), 5u);
  EXPECT_EQ(cfg.solver->source, SourceShape::Spread);
}

TEST(Config, MissingKeyIsNamed) {
  try {
    parse_config("[model]\ndim = 2\nn = 0 1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("[model] D"), std::string::npos) << e.what();
  }
}

TEST(Config, Rejections) {
  auto code = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::EigenFailure;  // stands for "accepted"
  };
  EXPECT_EQ(code("[sweep]\ntau = 0.2 0.1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[modle]\ndim = 2\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[lattice]\ntau_a = 1e-4\nwalker = 10\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[lattice]\ntau_a = fast\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[model]\ndim = 2\nD = 1 2 2 1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[model]\ndim = 2\nD = 1 0 0\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code("[boundary]\nsigma = -1\n"), ErrorCode::ConfigError);
}

TEST(Config, SampleFilesParse) {
  for (const char* name : {"anisotropic.ini", "robin_1d.ini"}) {
    auto cfg = load_config(fs::path(FPB_SOURCE_DIR) / "configs" / name);
    EXPECT_TRUE(cfg.model && cfg.lattice && cfg.solver) << name;
  }
}

TEST(Cli, MalformedConfigExitsWithTwo) {
  Scratch s;
  auto path = s.write("bad.ini", "[model]\ndim = 2\nn = 0 1\n");
  auto r = run({"basis", "--config", path.string(), "--out", s.dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("[model] D"), std::string::npos) << r.err;
  EXPECT_EQ(run({"basis", "--config", (s.dir / "missing.ini").string()}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(Cli, BasisReports) {
  Scratch s;
  auto path = s.write("a.ini", kAniso);
  auto r = run({"basis", "--config", path.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("normal D = 3\n"), std::string::npos) << r.out;
  // surface tensor entry 5/3 at full precision
  EXPECT_NE(r.out.find("1.6666666666666667"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(s.dir / "basis.json"));

  auto iso = s.write("i.ini", "[model]\ndim = 3\nD = 1 0 0 0 1 0 0 0 1\nn = 0 0 1\n");
  r = run({"basis", "--config", iso.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("b = [0.0,0.0,1.0]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("identity residual = 0\n"), std::string::npos) << r.out;
}

TEST(Cli, WalkIsDeterministicAndFitsSqrt) {
  Scratch s;
  auto path = s.write("a.ini", kAniso);
  auto r1 = run({"walk", "--config", path.string(), "--out", (s.dir / "1").string()});
  auto r2 = run({"walk", "--config", path.string(), "--out", (s.dir / "2").string(), "--threads", "3"});
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(slurp(s.dir / "1" / "walk.csv"), slurp(s.dir / "2" / "walk.csv"));
  EXPECT_NE(r1.out.find("normal first moment exponent"), std::string::npos);
  auto r3 = run({"walk", "--config", path.string(), "--out", (s.dir / "3").string(), "--seed", "12"});
  EXPECT_NE(slurp(s.dir / "1" / "walk.csv"), slurp(s.dir / "3" / "walk.csv"));
}

TEST(Cli, ZeroStepWalk) {
  Scratch s;
  auto path = s.write("z.ini", "[model]\ndim = 2\nD = 1 0 0 1\n[lattice]\ntau_a = 1e-3\nsteps = 0\nwalkers = 10\n");
  auto r = run({"walk", "--config", path.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(s.dir / "walk.csv");
  ASSERT_EQ(rows.size(), 1u);
  for (double v : rows[0]) EXPECT_EQ(v, 0.0);
}

TEST(Cli, EvolveWritesTransforms) {
  Scratch s;
  auto path = s.write("e.ini", std::string(kAniso) + "[sweep]\n");
  auto cfg = std::string(kAniso);
  cfg.replace(cfg.find("[sweep]"), std::string::npos, "[sweep]\ntau = 0.001 0.01\ns = 0.01 0.05\n");
  path = s.write("e.ini", cfg);
  auto r = run({"evolve", "--config", path.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(s.dir / "evolve.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1][1], 100.0);
  EXPECT_EQ(read_csv(s.dir / "transforms.csv").size(), 2u);
}

TEST(Cli, KernelTable) {
  Scratch s;
  auto path = s.write("k.ini", "[model]\ndim = 2\nD = 2 1 1 3\n[sweep]\ntau = 0.1 1\nzeta = 0 0.5\n");
  auto r = run({"kernel", "--config", path.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(s.dir / "kernel.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) EXPECT_NEAR(row[2], row[3], 1e-10 * row[3]);
}

TEST(Cli, SolveColumns) {
  Scratch s;
  const std::string base = "[model]\ndim = 1\nD = 1\n[solver]\ndepth = 2\ndz = 0.02\nT = 0.05\nstart = 0.2\n"
                           "[sweep]\ntau = 0.01 0.02 0.03 0.04\n";
  auto refl = s.write("r.ini", base);
  auto r = run({"solve", "--config", refl.string(), "--out", (s.dir / "r").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : read_csv(s.dir / "r" / "solve.csv")) {
    EXPECT_NEAR(row[1], 1.0, 1e-12);
    EXPECT_EQ(row[2], 0.0);
  }
  EXPECT_TRUE(fs::exists(s.dir / "r" / "field_004.csv"));

  auto abs = s.write("a.ini", base + "[boundary]\nsigma = 2\n");
  r = run({"solve", "--config", abs.string(), "--out", (s.dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(s.dir / "a" / "solve.csv");
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GT(rows[k][2], rows[k - 1][2]);
  for (const auto& row : rows) EXPECT_LT(std::abs(row[3]), 1e-10);
}

TEST(Cli, SolveAgainstWalk) {
  Scratch s;
  auto path = s.write("c.ini",
                      "[model]\ndim = 1\nD = 1\n[boundary]\nsigma = 1\n"
                      "[lattice]\ntau_a = 1e-4\nwalkers = 4000\nn0 = 5\nseed = 3\n"
                      "[solver]\ndepth = 2\ndz = 0.01\nT = 0.05\nstart = 0\ncompare_walk = true\n"
                      "[sweep]\ntau = 0.01 0.03 0.05\n");
  auto r = run({"solve", "--config", path.string(), "--out", s.dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(s.dir / "survival.csv");
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    EXPECT_NEAR(row[1] + row[2], 1.0, 1e-15);
    EXPECT_LT(std::abs(row[1] - row[3]), 4.0 * row[4] + 1e-3);
  }
}

TEST(Cli, NumericalFailureExitsWithThree) {
  Scratch s;
  auto path = s.write("u.ini", "[model]\ndim = 1\nD = 1\n[solver]\ndepth = 1\ndz = 0.01\nT = 0.01\ndt = 0.001\n"
                               "start = 0.5\n");
  auto r = run({"solve", "--config", path.string(), "--out", s.dir.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("UnstableStep"), std::string::npos) << r.err;
}

TEST(Cli, ValidateSubsetAndFault) {
  Scratch s;
  auto r = run({"validate", "--only", "1,2", "--out", s.dir.string()});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(s.dir / "validation.json"));

  r = run({"validate", "--only", "6", "--inject-fault", "sigma-map", "--out", s.dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("mapped sigma"), std::string::npos);
}
