#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kgrowth/runner.hpp"

using namespace kgrowth;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.grid = KnowledgeGrid(10.0, 101);
  cfg.T = 2.0;
  cfg.dt = 0.02;
  cfg.slice_interval = 0.5;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class RunnerDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("kgrowth_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
  }
  void TearDown() override { fs::remove_all(root); }
  fs::path root;
};

}  // namespace

TEST(Runner, SliceNamesAndTimes) {
  EXPECT_EQ(slice_filename(0.0), "slice_t0.csv");
  EXPECT_EQ(slice_filename(5.0), "slice_t5.csv");
  EXPECT_EQ(slice_filename(0.5), "slice_t0.5.csv");
  EXPECT_EQ(slice_time_from_name("slice_t12.5.csv"), 12.5);
  EXPECT_TRUE(std::isnan(slice_time_from_name("slice_tx.csv")));
  EXPECT_TRUE(std::isnan(slice_time_from_name("diagnostics.json")));
  EXPECT_TRUE(std::isnan(slice_time_from_name("slice_t5.txt")));
}

TEST(Runner, SaturationEdge) {
  const KnowledgeGrid g(10.0, 11);
  ControlField S(g, 1.0);
  EXPECT_EQ(saturation_edge(S), 10.0);
  for (std::size_t j = 4; j < g.size(); ++j) S[j] = 0.5;
  EXPECT_EQ(saturation_edge(S), 3.0);
  S[0] = 0.9;
  EXPECT_EQ(saturation_edge(S), -1.0);
}

TEST(Runner, StoredLevelsIncludeTheHorizon) {
  SolutionTrajectory traj;
  traj.dt = 0.1;
  traj.times.resize(26);
  const auto lv = stored_levels(traj, 1.0);
  ASSERT_EQ(lv.size(), 4u);
  EXPECT_EQ(lv[0], 0u);
  EXPECT_EQ(lv[2], 20u);
  EXPECT_EQ(lv[3], 25u);
}

TEST(Runner, SignChangeOnSyntheticValue) {
  const KnowledgeGrid g(10.0, 101);
  ModelSpec spec;
  spec.utility = UtilitySpec::logarithmic();
  ValueField V(g);
  for (std::size_t j = 0; j < g.size(); ++j) V[j] = g.node(j) - 2.03;
  const auto sc = value_sign_change(V, ControlField(g, 0.5), BenefitField(g), spec);
  ASSERT_TRUE(sc.found);
  EXPECT_EQ(sc.node, 20u);
  EXPECT_NEAR(sc.bound, 5.0 * g.dz(), 1e-12);
  EXPECT_FALSE(value_sign_change(ValueField(g, 1.0), ControlField(g, 0.5), BenefitField(g), spec).found);
}

TEST_F(RunnerDir, WritesSlicesDiagnosticsAndManifest) {
  const auto cfg = small_config();
  const auto m = run(cfg, root);
  EXPECT_TRUE(m.converged);
  EXPECT_TRUE(m.error_kind.empty());
  for (const char* name : {"slice_t0.csv", "slice_t0.5.csv", "slice_t1.csv", "slice_t2.csv",
                           "diagnostics.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(root / name)) << name;

  std::ifstream in(root / "slice_t0.csv");
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "z,f,V,S");
  std::getline(in, row);
  std::getline(in, row);  // z = 0.1
  const auto comma = row.find(',');
  EXPECT_EQ(row.substr(0, comma), "0.10000000000000001");

  const auto cols = read_slice_csv(root / "slice_t0.csv");
  ASSERT_EQ(cols.z.size(), 101u);
  const auto f0 = initial_datum(cfg).f;
  for (std::size_t j = 0; j < f0.size(); ++j) EXPECT_EQ(cols.f[j], f0[j]);  // 17 digits round-trip

  const auto diag = read_json(root / "diagnostics.json");
  EXPECT_EQ(diag.at("schema"), 1);
  EXPECT_EQ(diag.at("solver_kind"), "nonlocal");
  EXPECT_EQ(diag.at("steps"), 100);
  EXPECT_EQ(diag.at("slices").size(), 5u);
  EXPECT_EQ(diag.at("mass").size(), 101u);
  EXPECT_TRUE(diag.at("converged").get<bool>());
  EXPECT_TRUE(diag.at("gamma_bracket").is_object());
  EXPECT_DOUBLE_EQ(diag.at("gamma_bracket").at("t").get<double>(), 1.5);

  const auto man = read_json(root / "manifest.json");
  EXPECT_EQ(parse_config(man.at("config_echo")), cfg);
  EXPECT_EQ(man.at("solver_kind"), "nonlocal");
  EXPECT_TRUE(man.at("error_kind").is_null());
  EXPECT_EQ(man.at("outputs").size(), 7u);
}

TEST_F(RunnerDir, RepeatRunsAreByteIdentical) {
  const auto cfg = small_config();
  run(cfg, root / "a");
  run(cfg, root / "b");
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const auto name = e.path().filename();
    if (name == "manifest.json") {
      auto ma = read_json(e.path()), mb = read_json(root / "b" / name);
      ma.erase("wall_time");
      mb.erase("wall_time");
      EXPECT_EQ(ma, mb);
    } else {
      EXPECT_EQ(slurp(e.path()), slurp(root / "b" / name)) << name;
    }
  }
}

TEST_F(RunnerDir, LocalStabilityFailureIsRecorded) {
  auto cfg = small_config();
  cfg.solver = SolverKind::local;
  cfg.dt = 0.02;  // about five times the CFL limit at full effort
  const auto m = run(cfg, root);
  EXPECT_FALSE(m.converged);
  EXPECT_EQ(m.error_kind, "stability");
  EXPECT_NE(m.error.find("CFL"), std::string::npos);
  const auto man = read_json(root / "manifest.json");
  EXPECT_EQ(man.at("error_kind"), "stability");
  EXPECT_FALSE(man.at("converged").get<bool>());
}

TEST_F(RunnerDir, LocalRunWritesBoundaryFlux) {
  auto cfg = small_config();
  cfg.solver = SolverKind::local;
  cfg.dt.reset();
  cfg.T = 0.5;
  cfg.slice_interval = 0.25;
  const auto m = run(cfg, root);
  ASSERT_TRUE(m.error_kind.empty()) << m.error;
  const auto diag = read_json(root / "diagnostics.json");
  EXPECT_EQ(diag.at("solver_kind"), "local");
  EXPECT_EQ(diag.at("boundary_flux").size(), diag.at("steps").get<std::size_t>());
}

TEST_F(RunnerDir, DiagnoseBgpReadsStoredRun) {
  auto cfg = small_config();
  run(cfg, root);
  const auto rep = diagnose_bgp(root, 1.0);
  EXPECT_TRUE(fs::exists(root / "bgp_report.json"));
  EXPECT_EQ(rep.at("tail_fits").size(), 5u);
  EXPECT_EQ(rep.at("tail_fits")[0].at("t"), 0.0);
  EXPECT_GE(rep.at("max_relative_deviation").get<double>(), 0.0);
  EXPECT_TRUE(rep.at("gamma_bracket").is_object());
  // the bracket agrees with the in-run one
  const auto diag = read_json(root / "diagnostics.json");
  EXPECT_DOUBLE_EQ(rep.at("gamma_bracket").at("upper").get<double>(),
                   diag.at("gamma_bracket").at("upper").get<double>());
  EXPECT_THROW(diagnose_bgp(root / "missing"), std::runtime_error);
}

TEST(Oracle, LogisticErrorShrinksWithTheStep) {
  const KnowledgeGrid g(10.0, 1001);
  const double coarse = logistic_error(g, 0.04);
  const double fine = logistic_error(g, 0.01);
  EXPECT_LT(fine, coarse);
}

TEST(Oracle, OptimizerOnFewPairs) {
  ModelSpec spec;
  const auto r = optimizer_oracle(spec, "linear", 5, 1000000, 7);
  EXPECT_TRUE(r.passed()) << r.error;
  EXPECT_EQ(r.name, "linear");
}
