// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stieltjes/gcalc.hpp"
#include "stieltjes/lyapunov.hpp"
#include "stieltjes/scenario.hpp"
#include "stieltjes/solver.hpp"
#include "support/expr_oracle.hpp"

using namespace stieltjes;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

double relErr(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

Derivator naturals(double end) {
  return Derivator({{0.0, end, Linear{1.0}}}, PeriodicJumps{1.0, 1.0, {0.0}, {1.0}});
}

// #{k in N : t0 <= k < t}
int jumpsBetween(double t0, double t) {
  int n = 0;
  for (int k = 1; k < t; ++k) n += k >= t0 ? 1 : 0;
  return n;
}

Outcome linearOracle() {
  const auto start = std::chrono::steady_clock::now();
  const auto d = naturals(100.0);
  double worst = 0.0, worstVsLibrary = 0.0;
  for (double c : {-2.0, -0.4, 0.4}) {
    for (double nu : {-0.5, 1.0, 2.0}) {
      const auto f = builtinSystem("linear_jumps", {{"c", c}, {"nu", nu}});
      DomainSpec dom{0.0, 10.0, {0.0}, 1e7, 10.0, 1e8};
      const auto tr = solveIVP(d, f, dom, std::vector<double>{1.0}, 1e-3);
      if (tr.termination != Termination::Horizon) return {false, "early termination for c=" + fmt("%g", c)};
      for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        const double want = std::exp(c * t) * std::pow(1.0 + nu, jumpsBetween(0.0, t));
        worst = std::max(worst, relErr(tr.xLeft(i)[0], want));
        worstVsLibrary = std::max(worstVsLibrary, relErr(tr.xLeft(i)[0], linearClosedForm(d, c, nu, 0.0, 1.0, t)));
      }
    }
  }
  const double secs = seconds(start);
  const bool ok = worst <= 1e-7 && worstVsLibrary <= 1e-7 && secs < 5.0;
  return {ok, "max rel err " + fmt("%.3g", worst) + " (closed form " + fmt("%.3g", worstVsLibrary) + "), " +
                  fmt("%.2f", secs) + " s"};
}

Outcome gExpIdentities() {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (; cases < 200; ++cases) {
    // random layout on [0, 20): linear and plateau pieces plus a few jumps
    std::vector<ContinuousPiece> pieces;
    double at = 0.0;
    while (at < 20.0) {
      const double len = 0.5 + 3.0 * u(rng);
      const double end = std::min(20.0, at + len);
      if (u(rng) < 0.3) {
        pieces.push_back({at, end, Plateau{}});
      } else {
        pieces.push_back({at, end, Linear{0.2 + 2.0 * u(rng)}});
      }
      at = end;
    }
    std::vector<JumpEvent> jumps;
    const int nj = static_cast<int>(6 * u(rng));
    for (int j = 0; j < nj; ++j) {
      const double t = 0.5 + 19.0 * u(rng);
      if (std::none_of(jumps.begin(), jumps.end(), [&](const JumpEvent& e) { return std::abs(e.time - t) < 1e-3; })) {
        jumps.push_back({t, 0.1 + 2.0 * u(rng)});
      }
    }
    std::sort(jumps.begin(), jumps.end(), [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
    const Derivator d(pieces, ExplicitJumps{jumps});
    const double amp = 2.0 * u(rng) - 1.0, freq = 3.0 * u(rng), shift = u(rng) - 0.5;
    const double jumpScale = u(rng);
    // jump branch kept nonresonant: p * gap > -1 for every gap above
    TwoBranchScalar p{[=](double t) { return amp * std::sin(freq * t) + shift; },
                      [=](double t) { return jumpScale * (std::cos(t) - 0.9) / 4.2; }};
    double pts[3] = {20.0 * u(rng), 20.0 * u(rng), 20.0 * u(rng)};
    std::sort(pts, pts + 3);
    const double a = pts[0], s = pts[1], t = pts[2];
    const double one = gExp(d, p, a, a);
    worst = std::max(worst, std::abs(one - 1.0));
    const double whole = gExp(d, p, a, t);
    const double split = gExp(d, p, s, t) * gExp(d, p, a, s);
    worst = std::max(worst, relErr(split, whole));
  }
  return {worst <= 1e-9, std::to_string(cases) + " cases, max rel err " + fmt("%.3g", worst)};
}

Outcome gronwallDomination() {
  const auto sc = buildScenario(builtinConfig("arctan_impulse"));
  const TwoBranchScalar k = TwoBranchScalar::constant(0.0);
  const TwoBranchScalar p{[](double t) { return t; }, [](double t) { return std::exp(2.0 / (t * t)) - 1.0; }};
  double worstRatio = 0.0;
  std::size_t samples = 0;
  for (double x0 : {0.5, -0.5, 1.0, -1.0}) {
    auto dom = sc.domain;
    dom.horizon = 20.0;
    const auto tr = solveIVP(sc.derivator, sc.field, dom, std::vector<double>{x0}, 1e-3);
    if (tr.termination != Termination::Horizon) return {false, "trajectory stopped early for x0=" + fmt("%g", x0)};
    const auto bounds = aprioriBounds(sc.derivator, k, p, std::abs(x0), 0.0, tr.times);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      worstRatio = std::max(worstRatio, std::abs(tr.xLeft(i)[0]) / bounds[i].left);
      worstRatio = std::max(worstRatio, std::abs(tr.xRight(i)[0]) / bounds[i].right);
      ++samples;
    }
  }
  return {worstRatio <= 1.0 + 1e-6,
          "max |x|/bound " + fmt("%.6g", worstRatio) + " over " + std::to_string(samples) + " samples"};
}

// Finite-difference and jump-quotient checks along trajectories of one builtin.
struct DerivativeStats {
  double fd = 0.0;
  double jump = 0.0;
  std::size_t fdSamples = 0;
  std::size_t jumpSamples = 0;
};

DerivativeStats derivativeConsistency(const std::string& id) {
  const auto sc = buildScenario(builtinConfig(id));
  const auto& cand = *sc.candidate;
  DerivativeStats st;
  for (const auto& x0 : sc.initialStates) {
    auto dom = sc.domain;
    dom.horizon = std::min(dom.horizon, 60.0);
    const auto tr = solveIVP(sc.derivator, sc.field, dom, x0, 1e-3);
    auto wide = dom;
    wide.r0 = wide.r = 1e6;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double t = tr.times[i];
      if (tr.isJump(i)) {
        const double lhs = vDotAlong(sc.derivator, sc.field, cand, t, tr.xLeft(i)) * sc.derivator.jumpAt(t);
        const double rhs = cand.afterJump(t, tr.xRight(i)) - cand.at(t, tr.xLeft(i));
        st.jump = std::max(st.jump, std::abs(lhs - rhs) / (1e-300 + std::max({std::abs(rhs), std::abs(lhs), 1.0})));
        ++st.jumpSamples;
        continue;
      }
      if (i % 37 != 0) continue;
      const double s = t + 1e-6;
      if (sc.derivator.classify(t) != PointKind::ContinuityPoint || sc.derivator.slopeAt(t) < 0.1) continue;
      if (!sc.derivator.jumpsIn(t, s + 1e-9).empty() || sc.derivator.jumpAt(t) > 0.0) continue;
      // one step of the same solver from (t, x(t)) to s
      wide.t0 = t;
      wide.horizon = s;
      wide.center = dom.center;
      const auto step = solveIVP(sc.derivator, sc.field, wide, tr.xLeft(i), 1e-6);
      const auto xs = step.xLeft(step.size() - 1);
      const double quotient =
          (cand.at(s, xs) - cand.at(t, tr.xLeft(i))) / (sc.derivator.eval(s) - sc.derivator.eval(t));
      const double v = vDotAlong(sc.derivator, sc.field, cand, t, tr.xLeft(i));
      st.fd = std::max(st.fd, std::abs(v - quotient) / (1.0 + std::abs(v)));
      ++st.fdSamples;
    }
  }
  return st;
}

Outcome totalDerivative() {
  const auto allee = derivativeConsistency("allee_train");
  const auto cyano = derivativeConsistency("cyanobacteria");
  const double fd = std::max(allee.fd, cyano.fd);
  const double jump = std::max(allee.jump, cyano.jump);
  const bool ok = fd <= 1e-4 && jump <= 1e-12 && allee.fdSamples > 100 && cyano.fdSamples > 100 && allee.jumpSamples > 0;
  return {ok, "fd rel dev " + fmt("%.3g", fd) + " (" + std::to_string(allee.fdSamples + cyano.fdSamples) +
                  " points), jump identity dev " + fmt("%.3g", jump) + " (" +
                  std::to_string(allee.jumpSamples + cyano.jumpSamples) + " jumps)"};
}

Outcome rationalDecay() {
  const auto start = std::chrono::steady_clock::now();
  const auto sc = buildScenario(builtinConfig("rational_decay"));
  double worst = 0.0, finalRatio = 0.0;
  for (double x0 : {1.0, -1.0}) {
    auto dom = sc.domain;
    dom.horizon = 20.0;
    const auto tr = solveIVP(sc.derivator, sc.field, dom, std::vector<double>{x0}, 1e-3);
    if (tr.termination != Termination::Horizon) return {false, "early termination"};
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double t = tr.times[i];
      const double want = x0 * std::pow(-0.5, jumpsBetween(0.0, t)) * std::sqrt(1.0 / (1.0 + t * t));
      worst = std::max(worst, relErr(tr.xLeft(i)[0], want));
    }
    finalRatio = std::max(finalRatio, std::abs(tr.xLeft(tr.size() - 1)[0]) / std::abs(x0));
  }
  const double secs = seconds(start);
  const bool ok = finalRatio <= 1e-6 && worst <= 1e-6 && secs < 2.0;
  return {ok, "|x(20)|/|x0| " + fmt("%.3g", finalRatio) + ", max rel err " + fmt("%.3g", worst) + ", " +
                  fmt("%.2f", secs) + " s"};
}

Outcome alleeTrain() {
  const auto sc = buildScenario(builtinConfig("allee_train"));
  std::string why;
  for (double x0 : {10.0, 30.0, 45.0}) {
    auto dom = sc.domain;
    dom.horizon = 300.0;
    const auto tr = solveIVP(sc.derivator, sc.field, dom, std::vector<double>{x0}, 1e-3);
    if (tr.termination != Termination::Horizon) return {false, "early termination"};
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (tr.isJump(i) && !(tr.xRight(i)[0] < tr.xLeft(i)[0])) why = "jump not decreasing at t=" + fmt("%g", tr.times[i]);
      if (i > 0 && !(tr.xLeft(i)[0] < tr.xRight(i - 1)[0])) why = "flow not decreasing at t=" + fmt("%g", tr.times[i]);
    }
    const double last = tr.xLeft(tr.size() - 1)[0];
    if (!(last < 0.01 * x0)) why = "x(300) = " + fmt("%g", last) + " for x0=" + fmt("%g", x0);
  }
  const auto grid = sc.trajectoryGrid();
  const auto decay = checkDecayCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, grid);
  const auto asym =
      checkAsymptoticCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, grid, sc.divergenceProbe());
  if (decay.verdict != Verdict::UniformlyStable) why = std::string("decay verdict ") + toString(decay.verdict);
  if (asym.verdict != Verdict::UniformlyAsymptoticallyStable) why = std::string("verdict ") + toString(asym.verdict);
  return {why.empty(), why.empty() ? std::string("monotone decay, verdict ") + toString(asym.verdict) : why};
}

Outcome cyanobacteria() {
  const auto sc = buildScenario(builtinConfig("cyanobacteria"));
  const auto& cand = *sc.candidate;
  double worstDist = 0.0, worstRise = 0.0;
  std::string why;
  for (const auto& x0 : {std::vector<double>{9.5, 0.12}, std::vector<double>{10.5, 0.08}}) {
    auto dom = sc.domain;
    dom.horizon = 200.0;
    const auto tr = solveIVP(sc.derivator, sc.field, dom, x0, 1e-3);
    if (tr.termination != Termination::Horizon) return {false, "early termination"};
    const auto end = tr.xLeft(tr.size() - 1);
    worstDist = std::max(worstDist, std::max(std::abs(end[0] - 10.0), std::abs(end[1] - 0.1)));
    std::vector<double> nightValue;
    double nightIndex = -1.0;
    double prevV = cand.at(tr.times[0], tr.xLeft(0));
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double t = tr.times[i];
      const auto x = tr.xLeft(i);
      // night k is [2k+1, 2k+2]
      const double k = std::floor((t - 1.0) / 2.0);
      if (t >= 1.0 && t - (2.0 * k + 1.0) <= 1.0) {
        if (k != nightIndex) {
          nightIndex = k;
          nightValue.assign(x.begin(), x.end());
        } else if (!std::equal(x.begin(), x.end(), nightValue.begin())) {
          why = "state moved during the night at t=" + fmt("%g", t);
        }
      }
      const double v = cand.at(t, x);
      worstRise = std::max(worstRise, v - prevV);
      prevV = v;
    }
  }
  if (worstDist > 1e-2) why = "distance to equilibrium " + fmt("%g", worstDist);
  if (worstRise > 1e-8) why = "V rose by " + fmt("%g", worstRise);
  return {why.empty(), why.empty() ? "final distance " + fmt("%.3g", worstDist) + ", max V rise " +
                                         fmt("%.3g", worstRise) + ", nights frozen"
                                   : why};
}

Outcome nonUniformity() {
  const auto sc = buildScenario(builtinConfig("rational_single_jump"));
  const auto rep = checkAsymptoticCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, sc.trajectoryGrid(),
                                              sc.divergenceProbe());
  const auto* fixed = rep.find("d.fixed");
  const auto* uniform = rep.find("d.uniform");
  if (!fixed || !uniform) return {false, "probe results missing"};
  const bool ok = fixed->passed && !uniform->passed && rep.verdict != Verdict::UniformlyAsymptoticallyStable;
  return {ok, std::string("fixed-t0 ") + (fixed->passed ? "passes" : "fails") + ", uniform " +
                  (uniform->passed ? "passes" : "fails") + " (" + uniform->note + "), verdict " +
                  toString(rep.verdict)};
}

Outcome plateauSemantics() {
  std::string why;
  for (double c : {-2.0, -0.5, 0.5, 2.0}) {
    auto cfg = builtinConfig("plateau_linear");
    cfg.system.params = {{"c", c}};
    const auto sc = buildScenario(cfg);
    const double x0 = 1.0;
    const auto tr = solveIVP(sc.derivator, sc.field, sc.domain, std::vector<double>{x0}, 1e-3);
    if (tr.termination != Termination::Horizon) return {false, "early termination for c=" + fmt("%g", c)};
    double x1 = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (tr.times[i] < 1.0) continue;
      if (!seen) {
        x1 = tr.xLeft(i)[0];
        seen = true;
      } else if (tr.xLeft(i)[0] != x1) {
        why = "state changes after t=1 for c=" + fmt("%g", c);
      }
    }
    StabilityProbeOptions opts;
    opts.eps = {0.5 * std::abs(x1), 0.9 * std::abs(x1)};
    opts.t0s = {0.0, 0.5};
    opts.sigmaRadius = x0;
    const auto probe = empiricalStabilityProbe(sc.derivator, sc.field, sc.domain, opts);
    for (const auto& row : probe.rows) {
      if (row.t0 == 0.0 && row.sigma) why = "finite sigma for c=" + fmt("%g", c) + ", eps=" + fmt("%g", row.eps);
    }
  }
  return {why.empty(), why.empty() ? "constant after t=1 and no finite sigma for c in {-2,-0.5,0.5,2}" : why};
}

Outcome parserConformance() {
  oracle::RandomExpr gen(987654u);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto src = gen.make(5);
    const auto e = Expr::parse(src, 2);
    for (int k = 0; k < 5; ++k) {
      const double t = u(rng);
      const std::vector<double> x{u(rng), u(rng)};
      if (!oracle::sameBits(e.eval(t, x), oracle::ShuntingYard::eval(src, t, x))) ++mismatches;
    }
  }

  struct Run {
    const char* id;
    std::vector<double> x0;
  };
  const std::vector<Run> runs = {{"linear_jumps", {1.0}},   {"linear_jumps", {-0.7}},     {"plateau_linear", {1.0}},
                                 {"rational_decay", {1.0}}, {"rational_decay", {-0.4}},   {"rational_single_jump", {1.0}},
                                 {"arctan_impulse", {0.5}}, {"arctan_impulse", {-1.0}},   {"allee_train", {45.0}},
                                 {"cyanobacteria", {9.5, 0.12}}};
  double worst = 0.0;
  for (const auto& r : runs) {
    const auto sc = buildScenario(builtinConfig(r.id));
    const auto twin = buildSystem(builtinSystemAsExpressions(r.id));
    auto dom = sc.domain;
    dom.horizon = std::min(dom.horizon, 20.0);
    const auto a = solveIVP(sc.derivator, sc.field, dom, r.x0, 1e-3);
    const auto b = solveIVP(sc.derivator, twin, dom, r.x0, 1e-3);
    if (a.size() != b.size()) return {false, std::string("trajectory lengths differ for ") + r.id};
    for (std::size_t i = 0; i < a.left.size(); ++i) {
      worst = std::max(worst, std::abs(a.left[i] - b.left[i]) / std::max(1.0, std::abs(a.left[i])));
      worst = std::max(worst, std::abs(a.right[i] - b.right[i]) / std::max(1.0, std::abs(a.right[i])));
    }
  }
  return {mismatches == 0 && worst <= 1e-12, std::to_string(mismatches) + " of 500 random evaluations differ, " +
                                                 std::to_string(runs.size()) + " builtin trajectories max dev " +
                                                 fmt("%.3g", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"linear oracle", linearOracle},
      {"g-exponential identities", gExpIdentities},
      {"Gronwall domination", gronwallDomination},
      {"total g-derivative consistency", totalDerivative},
      {"asymptotic decay with rational field", rationalDecay},
      {"Allee train", alleeTrain},
      {"cyanobacteria", cyanobacteria},
      {"non-uniformity detection", nonUniformity},
      {"plateau semantics", plateauSemantics},
      {"parser conformance", parserConformance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
