#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include "stieltjes/errors.hpp"
#include "stieltjes/scenario.hpp"

namespace stieltjes {

namespace {

using Params = std::map<std::string, double>;

constexpr double kWindowEnd = 1e6;

// Literal for the expression language; negatives are parenthesized so the
// parsed tree applies the same operations as the compiled code.
std::string lit(double v) {
  char buf[40];
  if (v < 0 || (v == 0 && std::signbit(v))) {
    std::snprintf(buf, sizeof buf, "(-%.17g)", -v);
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", v);
  }
  return buf;
}

const std::map<std::string, Params>& defaults() {
  static const std::map<std::string, Params> table = {
      {"linear_jumps", {{"c", -0.4}, {"nu", -0.5}}},
      {"plateau_linear", {{"c", -2.0}}},
      {"rational_decay", {{"nu", -1.5}}},
      {"rational_single_jump", {{"nu", 0.5}}},
      {"arctan_impulse", {}},
      {"allee_train", {{"rho", 0.001}, {"K", 100.0}, {"M", 50.0}, {"d", 0.03}}},
      {"cyanobacteria", {{"rho", 1.0}, {"K", 10.0}, {"alpha", 0.001}, {"beta", 0.01}}},
  };
  return table;
}

Params resolve(const std::string& id, const Params& given) {
  const auto it = defaults().find(id);
  if (it == defaults().end()) throw ConfigError("builtin", "unknown builtin '" + id + "'");
  Params p = it->second;
  for (const auto& [k, v] : given) {
    if (!p.count(k)) throw ConfigError("params." + k, "unknown parameter for '" + id + "'");
    p[k] = v;
  }
  return p;
}

VectorField scalarField(std::function<double(double, double)> cont, std::function<double(double, double)> jump) {
  VectorField f;
  f.dimension = 1;
  f.continuous = [cont](double t, std::span<const double> x, std::span<double> out) { out[0] = cont(t, x[0]); };
  if (jump) f.jump = [jump](double t, std::span<const double> x, std::span<double> out) { out[0] = jump(t, x[0]); };
  return f;
}

double rationalDecay(double t, double x) { return -(x * t) / (1.0 + std::pow(t, 2.0)); }

PieceSpec linearPiece(double a, double b) { return {"linear", a, b, 1.0, "", ""}; }

JumpSpec naturals() {
  JumpSpec j;
  j.kind = "periodic";
  j.period = 1.0;
  j.origin = 1.0;
  j.offsets = {0.0};
  j.gaps = {1.0};
  return j;
}

DerivatorSpec identityWithJumps(JumpSpec jumps) {
  DerivatorSpec d;
  d.windowStart = 0.0;
  d.windowEnd = kWindowEnd;
  d.pieces = {linearPiece(0.0, kWindowEnd)};
  d.jumps = std::move(jumps);
  return d;
}

double sq(double s) { return s * s; }

// x^2 candidate with constant weights, for scalar linear-type systems.
LyapunovCandidate squareCandidate(TwoBranchScalar w) {
  LyapunovCandidate c;
  c.value = [](double, std::span<const double> x) { return x[0] * x[0]; };
  c.gradX = [](double, std::span<const double> x, std::span<double> out) { out[0] = 2.0 * x[0]; };
  c.lowerEnv = {"s^2", sq};
  c.upperEnv = ClassKFn{"s^2", sq};
  c.rate = ClassKFn{"s^2", sq};
  c.weight = std::move(w);
  return c;
}

// Cumulative sums of 1/i^2, extended by the tail estimate past the table.
class InverseSquareSums {
 public:
  explicit InverseSquareSums(std::size_t n) : sums_(n + 1, 0.0) {
    for (std::size_t i = 1; i <= n; ++i) sums_[i] = sums_[i - 1] + 1.0 / (static_cast<double>(i) * i);
  }
  double operator()(double k) const {
    if (k <= 0) return 0.0;
    if (k < static_cast<double>(sums_.size())) return sums_[static_cast<std::size_t>(k)];
    return std::numbers::pi * std::numbers::pi / 6.0 - 1.0 / k;
  }

 private:
  std::vector<double> sums_;
};

LyapunovCandidate arctanCandidate() {
  auto H = std::make_shared<InverseSquareSums>(static_cast<std::size_t>(kWindowEnd) + 1);
  // jumps at 1, 2, ... strictly before t, and up to and including t
  auto before = [](double t) { return t <= 1.0 ? 0.0 : std::ceil(t) - 1.0; };
  auto through = [](double t) { return t < 1.0 ? 0.0 : std::floor(t); };
  LyapunovCandidate c;
  c.value = [H, before](double t, std::span<const double> x) { return x[0] * x[0] * std::exp(-4.0 * (*H)(before(t))); };
  c.valueAfterJump = [H, through](double t, std::span<const double> x) {
    return x[0] * x[0] * std::exp(-4.0 * (*H)(through(t)));
  };
  c.gradX = [H, before](double t, std::span<const double> x, std::span<double> out) {
    out[0] = 2.0 * x[0] * std::exp(-4.0 * (*H)(before(t)));
  };
  const double a0 = std::exp(-2.0 * std::numbers::pi * std::numbers::pi / 3.0);
  c.lowerEnv = {"a0*s^2", [a0](double s) { return a0 * s * s; }};
  c.upperEnv = ClassKFn{"s^2", sq};
  c.rate = ClassKFn{"s^2/(1+s^2)", [](double s) { return s * s / (1.0 + s * s); }};
  TwoBranchScalar w;
  w.continuous = [H, before](double t) { return 2.0 * t * std::exp(-4.0 * (*H)(before(t))); };
  w.jump = [](double) { return 0.0; };
  c.weight = std::move(w);
  return c;
}

LyapunovCandidate singleJumpCandidate(double nu) {
  const double f = 1.0 / ((1.0 + nu) * (1.0 + nu));
  LyapunovCandidate c;
  c.value = [f](double t, std::span<const double> x) { return (t <= 1.0 ? 1.0 : f) * x[0] * x[0]; };
  c.valueAfterJump = [f](double t, std::span<const double> x) { return (t < 1.0 ? 1.0 : f) * x[0] * x[0]; };
  c.gradX = [f](double t, std::span<const double> x, std::span<double> out) {
    out[0] = 2.0 * (t <= 1.0 ? 1.0 : f) * x[0];
  };
  const double lo = std::min(1.0, f);
  c.lowerEnv = {"min(1, (1+nu)^-2)*s^2", [lo](double s) { return lo * s * s; }};
  c.rate = ClassKFn{"s^2", sq};
  TwoBranchScalar w;
  w.continuous = [f](double t) {
    const double base = 2.0 * t / (1.0 + t * t);
    return t <= 1.0 ? base : base * f;
  };
  w.jump = [](double) { return 0.0; };
  c.weight = std::move(w);
  return c;
}

LyapunovCandidate cyanoCandidate(const Params& p) {
  const double K = p.at("K");
  const double A = p.at("alpha") / p.at("beta");
  LyapunovCandidate c;
  c.value = [K, A](double, std::span<const double> x) { return sq(x[0] - K) + sq(x[1] - A); };
  c.gradX = [K, A](double, std::span<const double> x, std::span<double> out) {
    out[0] = 2.0 * (x[0] - K);
    out[1] = 2.0 * (x[1] - A);
  };
  c.lowerEnv = {"s^2", sq};
  c.upperEnv = ClassKFn{"2*s^2", [](double s) { return 2.0 * s * s; }};
  c.rate = ClassKFn{"0.1*s^2", [](double s) { return 0.1 * s * s; }};
  c.weight = TwoBranchScalar::constant(1.0);
  return c;
}

}  // namespace

std::vector<BuiltinInfo> builtinScenarios() {
  return {
      {"linear_jumps", "x' = c x off jumps, x+ = (1+nu) x at t = 1, 2, ..."},
      {"plateau_linear", "x' = c x with g(t) = t up to 1 and frozen afterwards"},
      {"rational_decay", "x' = -x t/(1+t^2) with jump gain 1+nu at t = 1, 2, ..."},
      {"rational_single_jump", "x' = -x t/(1+t^2) with one jump of gain 1+nu at t = 1"},
      {"arctan_impulse", "x' = -t atan(x), jumps x+ = exp(2/k^2) x at t = k"},
      {"allee_train", "Allee growth with hourly harvesting pulses"},
      {"cyanobacteria", "nutrient/cyanobacteria model with day growth and frozen nights"},
  };
}

bool isBuiltinScenario(const std::string& id) { return defaults().count(id) > 0; }

Params builtinParams(const std::string& id) { return resolve(id, {}); }

VectorField builtinSystem(const std::string& id, const Params& given) {
  const Params p = resolve(id, given);
  if (id == "linear_jumps" || id == "plateau_linear") {
    const double c = p.at("c");
    std::function<double(double, double)> jump;
    if (p.count("nu")) jump = [nu = p.at("nu")](double, double x) { return nu * x; };
    return scalarField([c](double, double x) { return c * x; }, jump);
  }
  if (id == "rational_decay" || id == "rational_single_jump") {
    const double nu = p.at("nu");
    return scalarField(rationalDecay, [nu](double, double x) { return nu * x; });
  }
  if (id == "arctan_impulse") {
    return scalarField([](double t, double x) { return -t * std::atan(x); },
                       [](double t, double x) { return (std::exp(2.0 / std::pow(t, 2.0)) - 1.0) * x; });
  }
  if (id == "allee_train") {
    const double rho = p.at("rho"), K = p.at("K"), M = p.at("M"), d = p.at("d");
    return scalarField([=](double, double x) { return rho * x * (1.0 - x / K) * (x / M - 1.0); },
                       [d](double, double x) { return (-d) * x; });
  }
  // cyanobacteria
  const double rho = p.at("rho"), K = p.at("K"), alpha = p.at("alpha"), beta = p.at("beta");
  VectorField f;
  f.dimension = 2;
  f.continuous = [=](double, std::span<const double> x, std::span<double> out) {
    out[0] = rho * x[1] * x[0] * (1.0 - x[0] / K);
    out[1] = alpha * x[0] - beta * x[1] * x[0];
  };
  return f;
}

SystemSpec builtinSystemAsExpressions(const std::string& id, const Params& given) {
  const Params p = resolve(id, given);
  SystemSpec s;
  s.dimension = 1;
  if (id == "linear_jumps" || id == "plateau_linear") {
    s.continuous = {lit(p.at("c")) + "*x1"};
    if (p.count("nu")) s.jump = {lit(p.at("nu")) + "*x1"};
  } else if (id == "rational_decay" || id == "rational_single_jump") {
    s.continuous = {"-(x1*t)/(1+t^2)"};
    s.jump = {lit(p.at("nu")) + "*x1"};
  } else if (id == "arctan_impulse") {
    s.continuous = {"-t*atan(x1)"};
    s.jump = {"(exp(2/t^2)-1)*x1"};
  } else if (id == "allee_train") {
    s.continuous = {lit(p.at("rho")) + "*x1*(1-x1/" + lit(p.at("K")) + ")*(x1/" + lit(p.at("M")) + "-1)"};
    s.jump = {"(-" + lit(p.at("d")) + ")*x1"};
  } else {
    s.dimension = 2;
    s.continuous = {lit(p.at("rho")) + "*x2*x1*(1-x1/" + lit(p.at("K")) + ")",
                    lit(p.at("alpha")) + "*x1-" + lit(p.at("beta")) + "*x2*x1"};
  }
  return s;
}

LyapunovCandidate builtinCandidate(const std::string& id, const Params& given) {
  const Params p = resolve(id, given);
  if (id == "linear_jumps") {
    const double nu = p.at("nu");
    return squareCandidate(TwoBranchScalar::constants(-2.0 * p.at("c"), -nu * (2.0 + nu)));
  }
  if (id == "plateau_linear") return squareCandidate(TwoBranchScalar::constant(-2.0 * p.at("c")));
  if (id == "rational_decay") {
    const double nu = p.at("nu");
    auto c = squareCandidate({});
    const double b = 1.0 / ((1.0 + nu) * (1.0 + nu));
    c.upperEnv = ClassKFn{"(1+nu)^-2*s^2", [b](double s) { return std::max(1.0, b) * s * s; }};
    TwoBranchScalar w;
    w.continuous = [](double t) { return 2.0 * t / (1.0 + std::pow(t, 2.0)); };
    w.jump = [nu](double) { return -nu * (2.0 + nu); };
    c.weight = std::move(w);
    return c;
  }
  if (id == "rational_single_jump") return singleJumpCandidate(p.at("nu"));
  if (id == "arctan_impulse") return arctanCandidate();
  if (id == "allee_train") {
    const double d = p.at("d");
    return squareCandidate(TwoBranchScalar::constants(0.0, 2.0 * d - d * d));
  }
  return cyanoCandidate(p);
}

ScenarioConfig builtinConfig(const std::string& id) {
  if (!isBuiltinScenario(id)) throw ConfigError("", "unknown builtin scenario '" + id + "'");
  const Params p = builtinParams(id);
  ScenarioConfig cfg;
  cfg.name = id;
  for (const auto& b : builtinScenarios()) {
    if (b.id == id) cfg.description = b.description;
  }
  cfg.system.builtin = id;
  cfg.system.dimension = id == "cyanobacteria" ? 2 : 1;
  cfg.domain.t0 = 0.0;
  cfg.domain.horizon = 20.0;
  cfg.output.directory = "out/" + id;

  CandidateSpec square;
  square.V = "x1^2";
  square.grad = {"2*x1"};
  square.lower = "s^2";
  square.upper = "s^2";
  square.rate = "s^2";

  if (id == "linear_jumps") {
    cfg.derivator = identityWithJumps(naturals());
    cfg.domain.r0 = 1e7;
    cfg.domain.r = 10.0;
    cfg.initial.points = {{1.0}, {-1.0}};
    const double c = p.at("c"), nu = p.at("nu");
    square.weight = lit(-2.0 * c);
    square.weightJump = lit(-nu * (2.0 + nu));
    cfg.candidate = square;
    cfg.stability.eps = {0.5, 1.0};
  } else if (id == "plateau_linear") {
    cfg.derivator.windowStart = 0.0;
    cfg.derivator.windowEnd = kWindowEnd;
    cfg.derivator.pieces = {linearPiece(0.0, 1.0), {"plateau", 1.0, kWindowEnd, 0.0, "", ""}};
    cfg.domain.r0 = 10.0;
    cfg.domain.r = 5.0;
    cfg.initial.points = {{1.0}, {-1.0}};
    square.weight = lit(-2.0 * p.at("c"));
    cfg.candidate = square;
    cfg.stability.eps = {0.05, 0.1};
  } else if (id == "rational_decay") {
    cfg.derivator = identityWithJumps(naturals());
    cfg.domain.r0 = 2.0;
    cfg.domain.r = 2.0;
    cfg.initial.points = {{1.0}, {-1.0}};
    const double nu = p.at("nu");
    square.upper = lit(1.0 / ((1.0 + nu) * (1.0 + nu))) + "*s^2";
    square.weight = "2*t/(1+t^2)";
    square.weightJump = lit(-nu * (2.0 + nu));
    cfg.candidate = square;
    cfg.stability.t0Grid = {0.0, 0.5, 3.0};
    cfg.stability.eps = {0.5, 1.0};
  } else if (id == "rational_single_jump") {
    JumpSpec one;
    one.kind = "list";
    one.events = {{1.0, 1.0}};
    cfg.derivator = identityWithJumps(one);
    cfg.domain.r0 = 3.0;
    cfg.domain.r = 1.5;
    cfg.initial.points = {{1.0}, {-1.0}};
    CandidateSpec c;
    c.builtin = id;
    cfg.candidate = c;
    cfg.stability.t0Grid = {0.0, 0.5, 3.0};
  } else if (id == "arctan_impulse") {
    cfg.derivator = identityWithJumps(naturals());
    cfg.domain.r0 = 10.0;
    cfg.domain.r = 2.0;
    cfg.initial.points = {{0.5}, {-0.5}, {1.0}, {-1.0}};
    CandidateSpec c;
    c.builtin = id;
    cfg.candidate = c;
  } else if (id == "allee_train") {
    JumpSpec hourly;
    hourly.kind = "periodic";
    hourly.period = 24.0;
    hourly.origin = 1.0;
    for (int h = 0; h < 24; ++h) {
      hourly.offsets.push_back(h);
      hourly.gaps.push_back(1.0);
    }
    cfg.derivator = identityWithJumps(hourly);
    cfg.domain.horizon = 300.0;
    cfg.domain.r0 = 50.0;
    cfg.domain.r = 50.0;
    cfg.initial.points = {{10.0}, {30.0}, {45.0}};
    const double d = p.at("d");
    square.weight = "0";
    square.weightJump = lit(2.0 * d - d * d);
    cfg.candidate = square;
    cfg.stability.eps = {0.5};
    cfg.stability.sigmaRadius = 45.0;
  } else {  // cyanobacteria
    const double K = p.at("K");
    const double A = p.at("alpha") / p.at("beta");
    cfg.derivator.windowStart = 0.0;
    cfg.derivator.windowEnd = kWindowEnd;
    cfg.derivator.repeatPeriod = 2.0;
    cfg.derivator.pieces = {{"smooth", 0.0, 1.0, 0.0, "(sin(pi*(t-0.5))+1)/2", "pi/2*cos(pi*(t-0.5))"},
                            {"plateau", 1.0, 2.0, 0.0, "", ""}};
    cfg.domain.horizon = 200.0;
    cfg.domain.center = {K, A};
    cfg.domain.r0 = 1.0;
    cfg.domain.r = 1.0;
    cfg.initial.points = {{9.5, 0.12}, {10.5, 0.08}};
    CandidateSpec c;
    c.V = "(x1-" + lit(K) + ")^2+(x2-" + lit(A) + ")^2";
    c.grad = {"2*(x1-" + lit(K) + ")", "2*(x2-" + lit(A) + ")"};
    c.lower = "s^2";
    c.upper = "2*s^2";
    c.rate = "0.1*s^2";
    c.weight = "1";
    cfg.candidate = c;
  }
  validateScenario(cfg);
  return cfg;
}

}  // namespace stieltjes
