#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kds/cli.hpp"

using namespace kds;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("kds_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path config(const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    write_file(p, text);
    return p;
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "kds_cli");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
  }

  json load(const fs::path& p) { return json::parse(read_file(p)); }
};

}  // namespace

TEST(RunConfigParse, DefaultsAndOverrides) {
  const auto c = parse_run_config("model = dss\nlambda = 3\nr_s = 0.2\nN = 40\nseed = 9\n");
  EXPECT_EQ(c.params.model, Model::DSSchwarzschild);
  EXPECT_EQ(c.params.r_s, 0.2);
  EXPECT_EQ(c.N, 40);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.flags.size(), 4u);
}

TEST(RunConfigParse, RejectsUnknownKeysAndBadRanges) {
  for (const char* text : {"colour = red\n", "N = 2\n", "delta = 0.9\n", "model = ads\n", "model = deSitter\nr_s = 0.1\n",
                           "horizon_sign = 0\n", "source = noise\n", "flags = horizons_exist,bogus\n"}) {
    try {
      parse_run_config(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << text;
    }
  }
}

TEST(ExitCodes, ErrorTaxonomyMapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::StepFailure), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::SolverFailure), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::PoleOnContour), 5);
  EXPECT_EQ(exit_code_for(ErrorCode::NoRoot), 1);
}

TEST(ParallelFor, FillsEverySlotAndRethrows) {
  std::vector<int> v(37, 0);
  parallel_for(37, 4, [&](int i) { v[i] = i * i; });
  for (int i = 0; i < 37; ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_for(10, 3, [](int i) {
                 if (i == 7) raise(ErrorCode::SolverFailure, "x");
               }),
               Error);
}

TEST_F(Cli, AdmissibleDeSitterPasses) {
  const auto cfg = config("ds.cfg", "model = deSitter\nlambda = 3\n");
  EXPECT_EQ(run({"admissible", "--config", cfg.string(), "--out", (dir / "ds").string()}), 0);
  const auto rep = load(dir / "ds" / "admissible.json");
  EXPECT_TRUE(rep["passed"].get<bool>());
  const auto man = load(dir / "ds" / "manifest.json");
  EXPECT_EQ(man["config_sha256"].get<std::string>(), sha256_hex(read_file(cfg)));
  EXPECT_EQ(man["outputs"][0]["file"].get<std::string>(), "admissible.json");
}

TEST_F(Cli, AdmissibleWithoutHorizonsFails) {
  const auto cfg = config("kds.cfg", "model = KerrDeSitter\nlambda = 3\nr_s = 1\nalpha = 0\n");
  EXPECT_EQ(run({"admissible", "--config", cfg.string(), "--out", (dir / "o").string()}), 1);
  const auto rep = load(dir / "o" / "admissible.json");
  EXPECT_FALSE(rep["report"]["horizons_exist"].get<bool>());
  EXPECT_NE(rep["report"]["error"].get<std::string>().find("NoHorizons"), std::string::npos);
}

TEST_F(Cli, AdmissibleKerrDeSitterAndRequestedFlags) {
  const auto cfg = config("k.cfg", "model = KerrDeSitter\nlambda = 3\nr_s = 0.2\nalpha = 0.05\nflags = horizons_exist,c_feasible\n");
  EXPECT_EQ(run({"admissible", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  EXPECT_TRUE(load(dir / "o" / "admissible.json")["c_feasible"].get<bool>());
}

TEST_F(Cli, MalformedConfigAndFlagsExitTwo) {
  const auto bad = config("bad.cfg", "model = deSitter\nlambda three\n");
  EXPECT_EQ(run({"admissible", "--config", bad.string(), "--out", (dir / "o").string()}), 2);
  const auto unknown = config("unk.cfg", "lamda = 3\n");
  EXPECT_EQ(run({"admissible", "--config", unknown.string(), "--out", (dir / "o").string()}), 2);
  EXPECT_EQ(run({"admissible", "--config", (dir / "missing.cfg").string()}), 2);
  const auto ok = config("ok.cfg", "model = deSitter\n");
  EXPECT_EQ(run({"resonances", "--config", ok.string(), "--format", "xml"}), 2);
  EXPECT_EQ(run({"resonances"}), 2);
  EXPECT_EQ(run({"bogus", "--config", ok.string()}), 2);
}

TEST_F(Cli, FlowIsByteIdenticalOnRerun) {
  const auto cfg = config("f.cfg",
                          "model = KerrDeSitter\nlambda = 3\nr_s = 0.2\nalpha = 0.05\ntrajectories = 4\nlength = 10\n"
                          "samples = 21\nradial = false\nseed = 3\n");
  ASSERT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "a").string(), "--threads", "1"}), 0);
  ASSERT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "b").string(), "--threads", "3"}), 0);
  for (const char* f : {"trajectories.csv", "flow.json", "manifest.json"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  ASSERT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "4"}), 0);
  EXPECT_NE(read_file(dir / "a" / "trajectories.csv"), read_file(dir / "c" / "trajectories.csv"));
  const auto rep = load(dir / "a" / "flow.json");
  for (const auto& t : rep["trajectories"]) EXPECT_LE(t["drift_p"].get<double>(), 1e-8);
}

TEST_F(Cli, FlowDeSitterSinkRate) {
  const auto cfg = config("f.cfg", "model = deSitter\ntrajectories = 0\n");
  ASSERT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto rad = load(dir / "o" / "flow.json")["radial"];
  ASSERT_GE(rad.size(), 1u);
  EXPECT_EQ(rad[0]["kind"].get<std::string>(), "sink");
  EXPECT_NEAR(rad[0]["beta0_measured"].get<double>(), 4.0, 0.05 * 4.0);
}

TEST_F(Cli, FlowKerrRatesMatchSurfaceGravity) {
  const auto cfg = config("f.cfg", "model = KerrDeSitter\nlambda = 3\nr_s = 0.2\nalpha = 0.05\ntrajectories = 0\n");
  ASSERT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto rep = load(dir / "o" / "flow.json");
  const auto h = horizon_roots(kerr_de_sitter(3.0, 0.2, 0.05));
  ASSERT_EQ(rep["radial"].size(), 2u);
  EXPECT_NEAR(rep["radial"][0]["beta0_measured"].get<double>(), h.gamma_plus, 0.05 * h.gamma_plus);
  EXPECT_NEAR(rep["radial"][1]["beta0_measured"].get<double>(), h.gamma_minus, 0.05 * h.gamma_minus);
}

TEST_F(Cli, FlowStepBudgetExitsThree) {
  const auto cfg = config("f.cfg", "model = KerrDeSitter\nlambda = 3\nr_s = 0.2\nalpha = 0.05\ntrajectories = 1\n"
                                   "max_steps = 5\nretries = 1\nradial = false\n");
  EXPECT_EQ(run({"flow", "--config", cfg.string(), "--out", (dir / "o").string()}), 3);
  EXPECT_TRUE(fs::exists(dir / "o" / "error.json"));
}

TEST_F(Cli, MinkowskiTableContainsLattice) {
  const auto cfg = config("m.cfg", "model = minkowski\nn = 4\nell_min = 0\nell_max = 0\nN = 80\n"
                                   "re_min = -1\nre_max = 1\nim_min = -3.5\nim_max = 0.5\n");
  ASSERT_EQ(run({"resonances", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto t = read_csv(read_file(dir / "o" / "resonances.csv"));
  EXPECT_EQ(t.header[0], "model");
  for (int j = 0; j < 3; ++j) {
    bool found = false;
    for (const auto& r : t.rows)
      found = found || (std::abs(std::stod(r[3])) < 1e-6 && std::abs(std::stod(r[4]) + 1.0 + j) < 1e-6);
    EXPECT_TRUE(found) << "-i(1+" << j << ")";
  }
}

TEST_F(Cli, ResonanceRerunAtDoubledNIsStable) {
  const std::string base = "model = dss\nlambda = 3\nr_s = 0.2\nell_min = 1\nell_max = 1\nre_min = 0\nre_max = 6\nim_min = -1.5\n";
  const auto a = config("a.cfg", base + "N = 40\n"), b = config("b.cfg", base + "N = 80\n");
  ASSERT_EQ(run({"resonances", "--config", a.string(), "--out", (dir / "a").string(), "--format", "json"}), 0);
  ASSERT_EQ(run({"resonances", "--config", b.string(), "--out", (dir / "b").string(), "--format", "json"}), 0);
  const auto ja = load(dir / "a" / "resonances.json"), jb = load(dir / "b" / "resonances.json");
  ASSERT_GE(ja.size(), 1u);
  for (const auto& e : ja) {
    if (e["convergence_delta"].get<double>() > 1e-6) continue;
    const cplx s(e["sigma"]["re"].get<double>(), e["sigma"]["im"].get<double>());
    double best = INFINITY;
    for (const auto& f : jb) best = std::min(best, std::abs(s - cplx(f["sigma"]["re"].get<double>(), f["sigma"]["im"].get<double>())));
    EXPECT_LT(best, 1e-6) << s;
  }
}

TEST_F(Cli, EmptyRegionGivesHeaderOnly) {
  const auto cfg = config("e.cfg", "model = deSitter\nN = 30\nim_min = 0.5\nim_max = 3\n");
  ASSERT_EQ(run({"resonances", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  EXPECT_EQ(read_csv(read_file(dir / "o" / "resonances.csv")).rows.size(), 0u);
}

TEST_F(Cli, OracleColumnAndOperatorDump) {
  const auto cfg = config("o.cfg", "model = deSitter\nN = 60\nell_min = 1\nell_max = 1\nim_min = -1.5\n"
                                   "oracle = true\ndump_operator = true\n");
  ASSERT_EQ(run({"resonances", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto t = read_csv(read_file(dir / "o" / "resonances.csv"));
  ASSERT_EQ(t.header.back(), "oracle_delta");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_LT(std::stod(t.rows[0].back()), 1e-8);
  const auto dump = decode_matrices(read_file(dir / "o" / "operator_ell1.kdsmat"));
  EXPECT_EQ(dump.blocks.size(), 3u);
  EXPECT_EQ(dump.meta["N"].get<int>(), 60);
}

TEST_F(Cli, SyntheticSinglePole) {
  const auto cfg = config("s.cfg", "source = synthetic\nsynthetic_order = 1\nell_target = 1.5\n");
  ASSERT_EQ(run({"expand", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto rep = load(dir / "o" / "expansion.json");
  ASSERT_EQ(rep["expansion"]["terms"].size(), 1u);
  EXPECT_EQ(rep["expansion"]["terms"][0]["kappa"].get<int>(), 0);
  EXPECT_GE(rep["remainder_fit"]["rate"].get<double>(), 0.98 * 1.5);
}

TEST_F(Cli, SyntheticDoublePoleGivesLogTerm) {
  const auto cfg = config("s.cfg", "source = synthetic\nsynthetic_order = 2\nell_target = 1.5\n");
  ASSERT_EQ(run({"expand", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto terms = load(dir / "o" / "expansion.json")["expansion"]["terms"];
  ASSERT_EQ(terms.size(), 2u);
  EXPECT_EQ(terms[1]["kappa"].get<int>(), 1);
}

TEST_F(Cli, PoleOnContourExitsFive) {
  const auto cfg = config("s.cfg", "source = synthetic\nsynthetic_im = -1.5\nell_target = 1.5\n");
  EXPECT_EQ(run({"expand", "--config", cfg.string(), "--out", (dir / "o").string()}), 5);
}

TEST_F(Cli, ExpandExitReflectsBound) {
  const auto cfg = config("s.cfg", "source = synthetic\nell_target = 1.5\nbound = 1e-30\n");
  EXPECT_EQ(run({"expand", "--config", cfg.string(), "--out", (dir / "o").string()}), 1);
  EXPECT_FALSE(load(dir / "o" / "expansion.json")["passed"].get<bool>());
}

TEST_F(Cli, DeSitterExpansionEndToEnd) {
  const auto cfg = config("d.cfg", "model = deSitter\nsource = resonance\nell = 0\nN = 40\nell_target = 2.5\n");
  ASSERT_EQ(run({"expand", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto rep = load(dir / "o" / "expansion.json");
  EXPECT_LT(rep["expansion"]["reconstruction"].get<double>(), 1e-6);
  // resonances at 0 and -2i lie above the target line
  const auto terms = rep["expansion"]["terms"];
  ASSERT_EQ(terms.size(), 2u);
  EXPECT_NEAR(terms[1]["sigma"]["im"].get<double>(), -2.0, 1e-8);
}

TEST_F(Cli, SymbolBatchMatchesDirectEvaluation) {
  write_file(dir / "pts.csv", "r,theta,phi,xi,eta,zeta\n0.4,1.2,0,0.5,0.3,-0.2\n0.6,1.0,0,-1,0.1,0.4\n");
  const auto cfg = config("s.cfg", "model = KerrDeSitter\nlambda = 3\nr_s = 0.2\nalpha = 0.05\nz = 1\npoints = pts.csv\n");
  ASSERT_EQ(run({"symbols", "--config", cfg.string(), "--out", (dir / "o").string()}), 0);
  const auto t = read_csv(read_file(dir / "o" / "symbols.csv"));
  ASSERT_EQ(t.rows.size(), 2u);
  const auto p = kerr_de_sitter(3.0, 0.2, 0.05);
  const PhasePoint pt{0.6, 1.0, 0.0, -1.0, 0.1, 0.4};
  const auto g = kds_symbol_grad(p, CSample{0.0, 0.0}, pt, 1.0, 1);
  EXPECT_EQ(std::stod(t.rows[1][8]), g.value);
  EXPECT_EQ(std::stod(t.rows[1][9]), hamilton_from_grad(g)[0]);
}
