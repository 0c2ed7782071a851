#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fastreact/harness.hpp"

using namespace fastreact;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("fastreact_" + name);
  fs::remove_all(p);
  return p;
}

const char* kTiny =
    "solver.epsilon = 1e-2\n"
    "solver.T = 0.02\n"
    "solver.n_cells = 32\n"
    "kinetics.xi_bins = 32\n"
    "kinetics.cells_t = 4\n"
    "kinetics.cells_x = 4\n"
    "kinetics.pairs_per_cell = 8\n"
    "run.plot_times = 0, 0.02\n"
    "run.fields_every = 4\n";

const char* kTinyInit = "init.params = 0.4, 2.6, 0.1, 0.9, 0.5, 6\n";

RunConfig tiny(const fs::path& out, const std::string& label, const std::string& extra = kTinyInit) {
  RunConfig cfg = parse_config(std::string(kTiny) + extra);
  cfg.run.out_dir = out.string();
  cfg.run.label = label;
  return cfg;
}

std::size_t csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

template <class Fn>
ConfigError config_error(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigError";
  return ConfigError(0, "", "");
}

}  // namespace

TEST(Config, DefaultsFromEmptyText) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.model.kind, "builtin-cubic");
  EXPECT_EQ(c.solver.epsilon, 1e-3);
  EXPECT_EQ(c.solver.n_cells, 256);
  EXPECT_EQ(c.init.kind, "plateau-blend");
  EXPECT_EQ(c.init.params.size(), 6u);
  EXPECT_EQ(c.kinetics.cells_t, 32);
  EXPECT_EQ(c.run.seed, 20240917u);
  EXPECT_TRUE(c.key_lines.empty());
}

TEST(Config, CommentsBlankLinesAndKindDefaults) {
  const RunConfig c = parse_config("# header\n\ninit.kind = constant  # trailing\nsolver.T=2\n");
  EXPECT_EQ(c.init.params, (std::vector<double>{3.0, 4.5}));
  EXPECT_EQ(c.solver.T, 2.0);
  EXPECT_EQ(c.key_lines.at("init.kind"), 3u);
  EXPECT_EQ(c.key_lines.at("solver.T"), 4u);
}

TEST(Config, ErrorsCarryLineAndKey) {
  auto e = config_error([] { parse_config("solver.T = 1\nsolver.bogus = 3\n"); });
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.key(), "solver.bogus");

  e = config_error([] { parse_config("solver.T = 1\n\nsolver.T = 2\n"); });
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.key(), "solver.T");

  e = config_error([] { parse_config("solver.n_cells = 12.5\n"); });
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(e.key(), "solver.n_cells");

  e = config_error([] { parse_config("solver.epsilon = abc\n"); });
  EXPECT_EQ(e.key(), "solver.epsilon");

  e = config_error([] { parse_config("\n\nsolver.epsilon = -1\n"); });
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.key(), "solver.epsilon");

  e = config_error([] { parse_config("solver.theta = 0.3\n"); });
  EXPECT_EQ(e.key(), "solver.theta");

  e = config_error([] { parse_config("init.kind = gaussian\n"); });
  EXPECT_EQ(e.key(), "init.kind");

  e = config_error([] { parse_config("just text\n"); });
  EXPECT_EQ(e.line(), 1u);

  // constraint on a key that keeps its default
  e = config_error([] { parse_config("solver.n_cells = 8\n"); });
  EXPECT_EQ(e.key(), "kinetics.cells_x");
  EXPECT_EQ(e.line(), 0u);

  e = config_error([] { parse_config("run.plot_times = 0, 5\n"); });
  EXPECT_EQ(e.key(), "run.plot_times");
  EXPECT_NE(std::string(e.what()).find("[run.plot_times]"), std::string::npos);
}

TEST(Config, CoefficientModel) {
  const RunConfig c = parse_config("model.kind = coefficients\nmodel.coeffs = 0, 6, -4.5, 1\n");
  const ReactionFunction rf = build_reaction(c);
  const ReactionFunction ref = ReactionFunction::reference_cubic();
  for (double u : {0.0, 0.7, 1.5, 3.2}) EXPECT_DOUBLE_EQ(rf.value(u), ref.value(u));
  auto e = config_error([] { parse_config("model.kind = coefficients\n"); });
  EXPECT_EQ(e.key(), "model.coeffs");
  e = config_error([] { parse_config("model.coeffs = 0, 1\n"); });
  EXPECT_EQ(e.key(), "model.coeffs");
}

TEST(Config, EchoRoundTrips) {
  const RunConfig a = parse_config(kTiny);
  std::string text;
  for (const auto& [k, v] : a.echo()) {
    if (k == "model.coeffs" && v.empty()) continue;
    text += k + " = " + v + "\n";
  }
  const RunConfig b = parse_config(text);
  EXPECT_EQ(a.echo(), b.echo());
}

TEST(ModelCheckTest, ReferenceCubic) {
  const ModelCheck mc = check_model(ReactionFunction::reference_cubic());
  EXPECT_TRUE(mc.ok());
  EXPECT_TRUE(mc.plotnikov_valid);
  EXPECT_NEAR(mc.wronskian_lo, 2.05, 1e-9);
  EXPECT_NEAR(mc.wronskian_hi, 2.45, 1e-9);
  EXPECT_GT(mc.wronskian_min, 0.0);
  EXPECT_LT(mc.residual_minus, 1e-9);
  const Json j = to_json(mc);
  EXPECT_TRUE(j.contains("wronskian_min_abs"));
}

TEST(RunSingle, ArtifactsParseAndChecksPass) {
  const fs::path out = scratch("single");
  const RunOutput r = run_single(tiny(out, "tiny"));
  EXPECT_TRUE(r.summary.checks_ok());
  const fs::path dir = out / "tiny";
  ASSERT_EQ(r.dir, dir);
  const Json rep = read_json(dir / "report.json");
  EXPECT_EQ(rep["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(rep["status"], "completed");
  EXPECT_EQ(rep["checks"]["all"], true);
  EXPECT_NEAR(rep["apriori"]["defect_norm"].get<double>(), r.summary.apriori.defect_norm, 1e-15);
  EXPECT_TRUE(read_json(dir / "timings.json").is_object());
  EXPECT_EQ(csv_rows(dir / "snapshots.csv"), r.trajectory.size() + 1);
  EXPECT_EQ(csv_rows(dir / "weights.csv"), 16u + 1u);
  EXPECT_EQ(csv_rows(dir / "kinetic_profiles.csv"), 16u * 32u + 1u);
  EXPECT_TRUE(fs::exists(dir / "kinetic_defect.csv"));
  EXPECT_TRUE(fs::exists(dir / "fields_0000.csv"));
  EXPECT_EQ(csv_rows(dir / "fields_0000.csv"), 33u);
  for (const char* f : {"plot_u_0.dat", "plot_u_1.dat", "plot_v_0.dat", "plot_v_1.dat"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

TEST(RunSingle, RerunIsByteIdentical) {
  const fs::path out = scratch("rerun");
  const RunConfig cfg = tiny(out, "again");
  run_single(cfg);
  const std::string first = read_text(out / "again" / "report.json");
  const std::string profiles = read_text(out / "again" / "kinetic_profiles.csv");
  run_single(cfg);
  EXPECT_EQ(read_text(out / "again" / "report.json"), first);
  EXPECT_EQ(read_text(out / "again" / "kinetic_profiles.csv"), profiles);
}

TEST(RunSingle, StationaryStateHasNoDefect) {
  const fs::path out = scratch("stationary");
  const RunOutput r = run_single(tiny(out, "flat", "init.kind = constant\n"));
  EXPECT_EQ(r.summary.apriori.defect_norm, 0.0);
  EXPECT_EQ(r.summary.defect_hist_total, 0.0);
  EXPECT_EQ(r.summary.mean_rho, 0.0);
  EXPECT_TRUE(r.summary.checks_ok());
  std::ifstream in(out / "flat" / "weights.csv");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    ASSERT_GE(cols.size(), 5u);
    EXPECT_EQ(std::stod(cols[2]), 0.0);
    EXPECT_EQ(std::stod(cols[3]), 0.0);
    EXPECT_EQ(std::stod(cols[4]), 1.0);
    ++rows;
  }
  EXPECT_EQ(rows, 16u);
}

TEST(RunSingle, NoWriteLeavesNoFiles) {
  const fs::path out = scratch("nowrite");
  const RunOutput r = run_single(tiny(out, "ghost"), false);
  EXPECT_TRUE(r.summary.completed);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Sweep, NeedsThreeDistinctValues) {
  const fs::path out = scratch("sweep_bad");
  EXPECT_THROW(run_sweep(tiny(out, "s"), {1e-2, 3e-3}, false, false), ValidationError);
  EXPECT_THROW(run_sweep(tiny(out, "s"), {1e-2, 1e-2, 3e-3}, false, false), ValidationError);
  EXPECT_THROW(run_sweep(tiny(out, "s"), {1e-2, 0.0, 3e-3}, false, false), ValidationError);
}

TEST(Sweep, SerialAndParallelAgree) {
  const fs::path a = scratch("sweep_serial");
  const fs::path b = scratch("sweep_parallel");
  const auto sa = run_sweep(tiny(a, "s"), {3e-2, 1e-2, 5e-2}, false);
  const auto sb = run_sweep(tiny(b, "s"), {1e-2, 5e-2, 3e-2}, true);
  EXPECT_EQ(sa.eps, (std::vector<double>{5e-2, 3e-2, 1e-2}));
  EXPECT_EQ(read_text(a / "s" / "sweep.csv"), read_text(b / "s" / "sweep.csv"));
  EXPECT_TRUE(fs::exists(a / "s" / "eps_0.05" / "report.json"));
  ASSERT_TRUE(sa.fit_available);
  EXPECT_EQ(sa.fit.slope, sb.fit.slope);
  EXPECT_GT(sa.fit.slope, 0.0);
  EXPECT_TRUE(sa.defect_decreasing);
  const Json j = read_json(a / "s" / "sweep.json");
  EXPECT_EQ(j["eps"].size(), 3u);
  EXPECT_TRUE(j["failed_members"].empty());
}

TEST(Sweep, StationarySweepIsDegenerate) {
  const fs::path out = scratch("sweep_flat");
  const auto sw = run_sweep(tiny(out, "s", "init.kind = constant\n"), {1e-1, 1e-2, 1e-3}, true, false);
  ASSERT_TRUE(sw.fit_available);
  EXPECT_TRUE(sw.fit.degenerate);
  EXPECT_FALSE(sw.checks_ok());
}

TEST(ComparePlotnikov, RejectsInvalidMaps) {
  const fs::path out = scratch("plot_bad");
  const RunConfig cfg =
      tiny(out, "p", std::string(kTinyInit) + "model.kind = coefficients\nmodel.coeffs = 0, 9.5, -6, 1\n");
  EXPECT_THROW(compare_plotnikov(cfg, false), ValidityError);
}

TEST(ComparePlotnikov, SmallRun) {
  const fs::path out = scratch("plot_ok");
  const auto pc = compare_plotnikov(tiny(out, "p"));
  EXPECT_TRUE(pc.valid);
  EXPECT_TRUE(pc.system.plotnikov_valid);
  EXPECT_LT(pc.plotnikov_mass_drift, 1e-12);
  EXPECT_GT(pc.w_difference_l2, 0.0);
  EXPECT_LT(pc.w_difference_l2, 0.1);
  const Json j = read_json(out / "p" / "plotnikov.json");
  EXPECT_TRUE(j.is_object());
  EXPECT_TRUE(fs::exists(out / "p" / "plotnikov.csv"));
}
