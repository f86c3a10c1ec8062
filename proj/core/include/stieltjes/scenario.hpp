#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stieltjes/derivator.hpp"
#include "stieltjes/expr.hpp"
#include "stieltjes/lyapunov.hpp"
#include "stieltjes/solver.hpp"

namespace stieltjes {

// Declarative scenario description. Mirrors the JSON schema one to one;
// see docs/scenario-format.md.

struct PieceSpec {
  std::string kind = "linear";  // linear | plateau | smooth
  double start = 0.0;
  double end = 0.0;
  double slope = 1.0;       // linear
  std::string value;        // smooth: expression in t
  std::string slopeExpr;    // smooth: expression in t, derivative of value

  friend bool operator==(const PieceSpec&, const PieceSpec&) = default;
};

struct JumpSpec {
  std::string kind = "none";  // none | list | periodic
  std::vector<JumpEvent> events;
  double period = 1.0;
  double origin = 0.0;
  std::vector<double> offsets;
  std::vector<double> gaps;

  friend bool operator==(const JumpSpec&, const JumpSpec&) = default;
};

struct DerivatorSpec {
  double windowStart = 0.0;
  double windowEnd = 1.0;
  std::optional<double> repeatPeriod;  // pieces then tile [0, period)
  std::vector<PieceSpec> pieces;
  JumpSpec jumps;
  double anchorTime = 0.0;
  double anchorValue = 0.0;

  friend bool operator==(const DerivatorSpec&, const DerivatorSpec&) = default;
};

struct SystemSpec {
  std::string builtin;  // empty for expression systems
  std::map<std::string, double> params;
  std::size_t dimension = 1;
  std::vector<std::string> continuous;
  std::vector<std::string> jump;  // empty means same as continuous

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

struct DomainConfig {
  double t0 = 0.0;
  double horizon = 1.0;
  std::vector<double> center;
  double r0 = 1.0;
  double r = 1.0;
  double blowupThreshold = 1e8;

  friend bool operator==(const DomainConfig&, const DomainConfig&) = default;
};

struct InitialSpec {
  std::vector<std::vector<double>> points;
  std::vector<double> radii;              // radial grid: center + radius * ray
  std::vector<std::vector<double>> rays;  // normalized to unit sup norm

  friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

struct CandidateSpec {
  std::string builtin;  // compiled candidate; expression fields unused when set
  std::map<std::string, double> params;
  std::string V;
  std::string VPlus;
  std::vector<std::string> grad;
  std::string partialT;
  std::string lower;
  std::string upper;
  std::string rate;
  std::string weight;
  std::string weightJump;
  bool finiteDifferenceGradient = false;

  friend bool operator==(const CandidateSpec&, const CandidateSpec&) = default;
};

struct StabilitySpec {
  std::vector<double> eps;
  std::vector<double> t0Grid;       // trajectory start times for certificates
  std::vector<double> probeT0Grid;  // start times for the divergence probe
  double warmup = 10.0;
  int doublings = 12;
  std::optional<double> annulusInner;
  double sigmaRadius = 0.0;

  friend bool operator==(const StabilitySpec&, const StabilitySpec&) = default;
};

struct OutputSpec {
  std::string directory = "out";
  bool emitLyapunov = true;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  DerivatorSpec derivator;
  SystemSpec system;
  DomainConfig domain;
  InitialSpec initial;
  double step = 1e-3;
  std::optional<CandidateSpec> candidate;
  StabilitySpec stability;
  OutputSpec output;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses and validates JSON text. Throws ConfigError naming the offending key.
ScenarioConfig parseScenario(std::string_view json);
/// JSON text that parseScenario reads back to an equal config.
std::string serializeScenario(const ScenarioConfig& cfg);
/// A builtin id, or else a path to a JSON file.
ScenarioConfig loadScenario(const std::string& idOrPath);

/// Checks cross-field consistency (dimensions, radii, step). Throws ConfigError.
void validateScenario(const ScenarioConfig& cfg);

struct BuiltinInfo {
  std::string id;
  std::string description;
};

std::vector<BuiltinInfo> builtinScenarios();
bool isBuiltinScenario(const std::string& id);
ScenarioConfig builtinConfig(const std::string& id);

/// Compiled vector field of a builtin system. Missing params take defaults.
VectorField builtinSystem(const std::string& id, const std::map<std::string, double>& params = {});
/// The same system written in the expression language.
SystemSpec builtinSystemAsExpressions(const std::string& id, const std::map<std::string, double>& params = {});
/// Default parameters of a builtin system.
std::map<std::string, double> builtinParams(const std::string& id);
/// Compiled Lyapunov candidate of a builtin scenario.
LyapunovCandidate builtinCandidate(const std::string& id, const std::map<std::string, double>& params = {});

Derivator buildDerivator(const DerivatorSpec& spec);
VectorField buildSystem(const SystemSpec& spec);
LyapunovCandidate buildCandidate(const CandidateSpec& spec, std::size_t dimension);
/// A time-only two-branch scalar from expressions over t.
TwoBranchScalar buildTimeFunction(const std::string& continuous, const std::string& jump = {});

/// Everything a run needs, resolved from a config.
struct Scenario {
  ScenarioConfig config;
  Derivator derivator;
  VectorField field;
  DomainSpec domain;
  std::vector<std::vector<double>> initialStates;
  std::optional<LyapunovCandidate> candidate;

  TrajectoryGrid trajectoryGrid() const;
  DivergenceProbe divergenceProbe() const;
};

Scenario buildScenario(const ScenarioConfig& cfg);

/// CSV text of a trajectory: t,g,x1..xn,x1_plus..xn_plus[,V,dV_g].
std::string trajectoryCsv(const Trajectory& traj, const Derivator& d, const VectorField& f,
                          const LyapunovCandidate* cand);

struct TrajectoryOutcome {
  std::vector<double> x0;
  std::optional<Termination> termination;
  double omega = 0.0;
  std::size_t samples = 0;
  std::string csvFile;
  std::string error;
};

struct RunArtifacts {
  std::string directory;
  std::vector<TrajectoryOutcome> trajectories;
  std::optional<CertificateReport> certificate;
  std::string summaryFile;
};

/// Simulates every initial state, writes one CSV per trajectory and
/// summary.txt into cfg.output.directory. A failing trajectory is recorded
/// and does not affect the others.
RunArtifacts runScenario(const ScenarioConfig& cfg);

}  // namespace stieltjes
