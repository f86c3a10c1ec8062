#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stieltjes/errors.hpp"
#include "stieltjes/scenario.hpp"

using namespace stieltjes;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("stieltjes_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> readCsv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

const char* kMinimal = R"({
  "name": "decay",
  "derivator": {"window_start": 0, "window_end": 100,
                "pieces": [{"kind": "linear", "start": 0, "end": 100, "slope": 1}],
                "jumps": {"kind": "list", "events": [{"time": 1, "gap": 0.5}]}},
  "system": {"dimension": 1, "continuous": ["-x1"], "jump": ["-x1"]},
  "domain": {"t0": 0, "horizon": 2, "r0": 2, "r": 2},
  "initial": {"points": [[1.0]], "radii": [0.5]},
  "step": 0.01
})";

std::string replaceOnce(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

void expectConfigError(const std::string& json, const std::string& path) {
  try {
    parseScenario(json);
    ADD_FAILURE() << "expected a config error at " << path;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), path) << e.what();
  }
}

}  // namespace

TEST(ScenarioConfig, MinimalParses) {
  const auto cfg = parseScenario(kMinimal);
  EXPECT_EQ(cfg.name, "decay");
  EXPECT_EQ(cfg.system.dimension, 1u);
  EXPECT_EQ(cfg.step, 0.01);
  EXPECT_EQ(cfg.domain.blowupThreshold, 1e8);
  const auto sc = buildScenario(cfg);
  // one explicit point plus the radius along +e1 and -e1
  ASSERT_EQ(sc.initialStates.size(), 3u);
  EXPECT_EQ(sc.initialStates[1][0], 0.5);
  EXPECT_EQ(sc.initialStates[2][0], -0.5);
  EXPECT_DOUBLE_EQ(sc.derivator.eval(2.0), 2.5);
}

TEST(ScenarioConfig, UnknownKeysRejectedWithPath) {
  expectConfigError(replaceOnce(kMinimal, "\"r0\": 2", "\"r0\": 2, \"rho\": 1"), "domain.rho");
  expectConfigError(replaceOnce(kMinimal, "\"step\": 0.01", "\"step\": 0.01, \"stepp\": 1"), "stepp");
  expectConfigError(replaceOnce(kMinimal, "\"slope\": 1}", "\"slope\": 1, \"x\": 2}"), "derivator.pieces[0].x");
}

TEST(ScenarioConfig, TypeAndRangeErrors) {
  expectConfigError(replaceOnce(kMinimal, "\"r0\": 2", "\"r0\": \"two\""), "domain.r0");
  expectConfigError(replaceOnce(kMinimal, "\"step\": 0.01", "\"step\": 0"), "step");
  expectConfigError(replaceOnce(kMinimal, "\"r\": 2}", "\"r\": 3}"), "domain.r");
  expectConfigError(replaceOnce(kMinimal, "[[1.0]]", "[[2.5]]"), "initial.points[0]");
  expectConfigError(replaceOnce(kMinimal, "\"horizon\": 2", "\"horizon\": 200"), "domain");
  EXPECT_THROW(parseScenario("{ not json"), ConfigError);
}

TEST(ScenarioConfig, DimensionMismatch) {
  expectConfigError(replaceOnce(kMinimal, "\"r\": 2}", "\"r\": 2, \"center\": [0, 0]}"), "domain.center");
  expectConfigError(replaceOnce(kMinimal, "[[1.0]]", "[[1.0, 0.0]]"), "initial.points[0]");
  expectConfigError(replaceOnce(kMinimal, "\"jump\": [\"-x1\"]", "\"jump\": [\"-x1\", \"x1\"]"), "system.jump");
}

TEST(ScenarioConfig, ExpressionErrorsCarryKeyPath) {
  expectConfigError(replaceOnce(kMinimal, "[\"-x1\"], \"jump\"", "[\"-x2\"], \"jump\""), "system.continuous[0]");
  expectConfigError(replaceOnce(kMinimal, "[\"-x1\"], \"jump\"", "[\"-x1 +\"], \"jump\""), "system.continuous[0]");
}

TEST(ScenarioConfig, CandidateFromExpressions) {
  const std::string json = replaceOnce(
      kMinimal, "\"step\": 0.01",
      R"("step": 0.01, "candidate": {"V": "x1^2", "grad": ["2*x1"], "lower": "s^2", "upper": "s^2",
          "rate": "s^2", "weight": "2", "weight_jump": "0.75"})");
  const auto sc = buildScenario(parseScenario(json));
  ASSERT_TRUE(sc.candidate.has_value());
  const std::vector<double> x{3.0};
  EXPECT_EQ(sc.candidate->at(0.0, x), 9.0);
  EXPECT_EQ(sc.candidate->lowerEnv(2.0), 4.0);
  EXPECT_EQ(sc.candidate->weight->atJump(1.0), 0.75);
  EXPECT_EQ(sc.candidate->weight->atContinuous(1.0), 2.0);
  expectConfigError(replaceOnce(json, "\"grad\": [\"2*x1\"], ", ""), "candidate.grad");
}

TEST(Builtins, ListedAndLoadable) {
  const auto all = builtinScenarios();
  EXPECT_GE(all.size(), 6u);
  for (const char* id :
       {"linear_jumps", "arctan_impulse", "rational_decay", "allee_train", "cyanobacteria", "plateau_linear"}) {
    EXPECT_TRUE(isBuiltinScenario(id)) << id;
    EXPECT_NO_THROW(loadScenario(id)) << id;
  }
  EXPECT_THROW(loadScenario("no_such_scenario"), ConfigError);
}

TEST(Builtins, DefaultParameters) {
  const auto allee = builtinParams("allee_train");
  EXPECT_EQ(allee.at("rho"), 0.001);
  EXPECT_EQ(allee.at("K"), 100.0);
  EXPECT_EQ(allee.at("M"), 50.0);
  EXPECT_EQ(allee.at("d"), 0.03);
  const auto cyano = builtinParams("cyanobacteria");
  EXPECT_EQ(cyano.at("rho"), 1.0);
  EXPECT_EQ(cyano.at("K"), 10.0);
  EXPECT_EQ(cyano.at("alpha"), 0.001);
  EXPECT_EQ(cyano.at("beta"), 0.01);
  EXPECT_EQ(builtinParams("rational_decay").at("nu"), -1.5);
  // jump gain 1 + nu = -1/2
  const auto f = builtinSystem("rational_decay");
  std::vector<double> out(1);
  f.evalJump(1.0, std::vector<double>{2.0}, out);
  EXPECT_EQ(2.0 + out[0], -1.0);
  EXPECT_THROW(builtinSystem("allee_train", {{"r", 1.0}}), ConfigError);
}

TEST(Builtins, AlleeHourlyJumps) {
  const auto sc = buildScenario(builtinConfig("allee_train"));
  const auto js = sc.derivator.jumpsIn(0.0, 48.5);
  ASSERT_EQ(js.size(), 48u);
  for (std::size_t i = 0; i < js.size(); ++i) {
    EXPECT_DOUBLE_EQ(js[i].time, static_cast<double>(i + 1));
    EXPECT_EQ(js[i].gap, 1.0);
  }
}

TEST(Builtins, CyanobacteriaDayNight) {
  const auto sc = buildScenario(builtinConfig("cyanobacteria"));
  EXPECT_NEAR(sc.derivator.eval(1.0), 1.0, 1e-12);
  EXPECT_NEAR(sc.derivator.eval(2.0), 1.0, 1e-12);
  EXPECT_NEAR(sc.derivator.eval(2.5), 1.5, 1e-12);
  EXPECT_EQ(sc.derivator.classify(1.5), PointKind::PlateauInterior);
  EXPECT_EQ(sc.domain.center, (std::vector<double>{10.0, 0.1}));
}

TEST(Builtins, RoundTripThroughSerialization) {
  for (const auto& b : builtinScenarios()) {
    const auto cfg = builtinConfig(b.id);
    const auto text = serializeScenario(cfg);
    const auto back = parseScenario(text);
    EXPECT_TRUE(back == cfg) << b.id;
    EXPECT_EQ(serializeScenario(back), text) << b.id;
  }
}

TEST(Builtins, ExpressionTwinsAgreePointwise) {
  for (const auto& b : builtinScenarios()) {
    const auto compiled = builtinSystem(b.id);
    const auto twin = buildSystem(builtinSystemAsExpressions(b.id));
    ASSERT_EQ(compiled.dimension, twin.dimension);
    const std::size_t n = compiled.dimension;
    std::vector<double> x(n), a(n), c(n);
    for (double t : {0.5, 1.0, 2.0, 3.7}) {
      for (std::size_t i = 0; i < n; ++i) x[i] = 9.5 + 0.3 * i * t;
      compiled.evalContinuous(t, x, a);
      twin.evalContinuous(t, x, c);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(a[i], c[i]) << b.id;
      compiled.evalJump(t, x, a);
      twin.evalJump(t, x, c);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(a[i], c[i]) << b.id;
    }
  }
}

TEST(Run, WritesCsvAndSummary) {
  auto cfg = parseScenario(kMinimal);
  cfg.output.directory = scratch("run").string();
  const auto art = runScenario(cfg);
  ASSERT_EQ(art.trajectories.size(), 3u);
  const auto rows = readCsv(fs::path(cfg.output.directory) / "trajectory_000.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "g", "x1", "x1_plus"}));
  EXPECT_EQ(rows.size(), 202u);  // header, 201 samples on [0, 2]
  EXPECT_EQ(rows[101][0], "1");
  EXPECT_NE(rows[101][2], rows[101][3]);  // jump at t = 1
  const auto summary = slurp(art.summaryFile);
  EXPECT_NE(summary.find("trajectory.0.termination=Horizon"), std::string::npos);
  EXPECT_NE(summary.find("trajectories=3"), std::string::npos);
}

TEST(Run, ReproducibleBytes) {
  auto cfg = builtinConfig("rational_decay");
  cfg.step = 1e-2;
  cfg.output.directory = scratch("repro_a").string();
  runScenario(cfg);
  auto cfg2 = cfg;
  cfg2.output.directory = scratch("repro_b").string();
  runScenario(cfg2);
  for (const char* f : {"trajectory_000.csv", "trajectory_001.csv"}) {
    const auto a = slurp(fs::path(cfg.output.directory) / f);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(fs::path(cfg2.output.directory) / f));
  }
}

TEST(Run, BatchIsolation) {
  // sqrt of a negative state fails only for the negative initial condition
  const std::string json =
      replaceOnce(replaceOnce(kMinimal, "[\"-x1\"], \"jump\"", "[\"-sqrt(x1)*x1\"], \"jump\""),
                  "\"points\": [[1.0]], \"radii\": [0.5]", "\"points\": [[1.0], [-0.5], [0.5]]");
  auto cfg = parseScenario(json);
  cfg.output.directory = scratch("isolation").string();
  const auto art = runScenario(cfg);
  ASSERT_EQ(art.trajectories.size(), 3u);
  EXPECT_TRUE(art.trajectories[0].error.empty());
  EXPECT_FALSE(art.trajectories[1].error.empty());
  EXPECT_TRUE(art.trajectories[2].error.empty());

  auto solo = cfg;
  solo.initial.points = {{0.5}};
  solo.output.directory = scratch("isolation_solo").string();
  runScenario(solo);
  EXPECT_EQ(slurp(fs::path(cfg.output.directory) / "trajectory_002.csv"),
            slurp(fs::path(solo.output.directory) / "trajectory_000.csv"));
  EXPECT_NE(slurp(art.summaryFile).find("trajectory.1.error="), std::string::npos);
}

TEST(Run, LyapunovColumnsAndPlateauNan) {
  auto cfg = builtinConfig("plateau_linear");
  cfg.step = 1e-2;
  cfg.domain.horizon = 3.0;
  cfg.output.directory = scratch("plateau").string();
  const auto art = runScenario(cfg);
  const auto rows = readCsv(fs::path(cfg.output.directory) / "trajectory_000.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "g", "x1", "x1_plus", "V", "dV_g"}));
  bool sawNan = false;
  const std::string frozen = rows[101][2];  // t = 1
  for (std::size_t i = 101; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][2], frozen);
    if (std::stod(rows[i][0]) > 1.0) {
      EXPECT_EQ(rows[i][5], "nan");
      sawNan = true;
    }
  }
  EXPECT_TRUE(sawNan);
  EXPECT_NEAR(std::stod(frozen), std::exp(-2.0), 1e-9);
  ASSERT_TRUE(art.certificate.has_value());
}

TEST(Run, AlleeFromFortyFiveDecreases) {
  auto cfg = builtinConfig("allee_train");
  cfg.initial.points = {{45.0}};
  cfg.step = 1e-2;
  cfg.candidate.reset();
  cfg.output.directory = scratch("allee").string();
  const auto art = runScenario(cfg);
  ASSERT_EQ(art.trajectories.size(), 1u);
  EXPECT_EQ(*art.trajectories[0].termination, Termination::Horizon);
  const auto rows = readCsv(fs::path(cfg.output.directory) / "trajectory_000.csv");
  double prev = 1e9;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double x = std::stod(rows[i][2]);
    const double xp = std::stod(rows[i][3]);
    EXPECT_LT(x, prev);
    EXPECT_LE(xp, x);
    prev = xp < x ? xp : x;
  }
}

TEST(Run, CyanobacteriaApproachesEquilibrium) {
  auto cfg = builtinConfig("cyanobacteria");
  cfg.initial.points = {{9.5, 0.12}};
  cfg.step = 1e-2;
  cfg.output.directory = scratch("cyano").string();
  runScenario(cfg);
  const auto rows = readCsv(fs::path(cfg.output.directory) / "trajectory_000.csv");
  const auto& last = rows.back();
  EXPECT_EQ(std::stod(last[0]), 200.0);
  EXPECT_LE(std::abs(std::stod(last[2]) - 10.0), 1e-2);
  EXPECT_LE(std::abs(std::stod(last[3]) - 0.1), 1e-2);
}

TEST(Run, LoadFromFile) {
  const auto dir = scratch("file");
  fs::create_directories(dir);
  const auto path = dir / "s.json";
  std::ofstream(path) << kMinimal;
  EXPECT_EQ(loadScenario(path.string()).name, "decay");
}

TEST(Run, DocumentedExample) {
  auto cfg = loadScenario(std::string(STIELTJES_DOCS_DIR) + "/examples/damped_pulses.json");
  cfg.output.directory = scratch("docs").string();
  runScenario(cfg);
  const auto rows = readCsv(fs::path(cfg.output.directory) / "trajectory_000.csv");
  const auto& last = rows.back();
  ASSERT_EQ(std::stod(last[0]), 8.0);
  // e^{-t/2} halved at 1..7
  const double want = std::exp(-4.0) * std::pow(0.5, 7);
  EXPECT_NEAR(std::stod(last[2]), want, 1e-9 * want);
}
