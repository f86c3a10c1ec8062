#include "stieltjes/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "stieltjes/errors.hpp"
#include "stieltjes/parallel.hpp"

namespace stieltjes {

namespace {

constexpr double kAbsTol = 1e-9;
constexpr double kRelTol = 1e-6;
constexpr double kFdStep = 1e-6;
constexpr std::size_t kGridTimes = 41;
constexpr std::size_t kGridRadii = 40;
constexpr std::size_t kClassKCoarse = 1000;
constexpr std::size_t kClassKFine = 8000;
constexpr std::size_t kAnnulusPoints = 10000;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Running worst case of an inequality lhs <= rhs.
struct Check {
  ConditionResult r;
  bool any = false;

  explicit Check(std::string id, bool gating = true) {
    r.id = std::move(id);
    r.gating = gating;
    r.worstMargin = -std::numeric_limits<double>::infinity();
  }

  void observe(double lhs, double rhs, double t, std::span<const double> x) {
    const double margin = lhs - rhs;
    const double tol = kAbsTol + kRelTol * std::max(std::abs(lhs), std::abs(rhs));
    ++r.samples;
    const bool bad = !(margin <= tol);
    if (bad) r.passed = false;
    if (!any || margin > r.worstMargin || (bad && !std::isfinite(margin))) {
      any = true;
      r.worstMargin = margin;
      r.witnessT = t;
      r.witnessX.assign(x.begin(), x.end());
    }
  }

  void fail(const std::string& why) {
    r.passed = false;
    if (r.note.empty()) r.note = why;
  }

  void merge(const Check& o) {
    if (!o.r.passed) r.passed = false;
    if (r.note.empty()) r.note = o.r.note;
    r.samples += o.r.samples;
    if (o.any && (!any || o.r.worstMargin > r.worstMargin)) {
      any = true;
      r.worstMargin = o.r.worstMargin;
      r.witnessT = o.r.witnessT;
      r.witnessX = o.r.witnessX;
    }
  }

  ConditionResult result() const {
    ConditionResult out = r;
    if (!any) out.worstMargin = 0.0;
    return out;
  }
};

void gradient(const LyapunovCandidate& cand, double t, std::span<const double> x, std::vector<double>& out) {
  out.assign(x.size(), 0.0);
  if (cand.gradX) {
    cand.gradX(t, x, out);
    return;
  }
  if (!cand.finiteDifferenceGradient) throw ConfigError("candidate.grad", "no state gradient supplied");
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = kFdStep * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double up = cand.value(t, xp);
    xp[i] = x[i] - h;
    const double down = cand.value(t, xp);
    xp[i] = x[i];
    out[i] = (up - down) / (2.0 * h);
  }
}

double flowDerivative(const VectorField& f, const LyapunovCandidate& cand, double t, std::span<const double> x) {
  std::vector<double> fx(x.size()), g;
  f.evalContinuous(t, x, fx);
  gradient(cand, t, x, g);
  double s = cand.partialGT ? cand.partialGT(t, x) : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += g[i] * fx[i];
  return s;
}

void requireCandidate(const LyapunovCandidate& cand, const VectorField& f) {
  if (!cand.value) throw ConfigError("candidate.V", "missing");
  if (!cand.lowerEnv.fn) throw ConfigError("candidate.lower", "missing");
  if (!cand.gradX && !cand.finiteDifferenceGradient) throw ConfigError("candidate.grad", "no state gradient supplied");
  if (!f.continuous) throw ConfigError("system", "vector field has no continuous branch");
}

// Unit sup-norm directions used for (t, u) grids.
std::vector<std::vector<double>> gridDirections(std::size_t n) {
  std::vector<std::vector<double>> dirs;
  if (n <= 3) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> v(n);
      std::size_t c = code;
      bool nonzero = false;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<double>(c % 3) - 1.0;
        nonzero = nonzero || v[i] != 0.0;
        c /= 3;
      }
      if (nonzero) dirs.push_back(std::move(v));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (double s : {-1.0, 1.0}) {
        std::vector<double> v(n, 0.0);
        v[i] = s;
        dirs.push_back(std::move(v));
      }
    }
  }
  return dirs;
}

// Zero at zero, nonnegative, strictly increasing (or merely positive when
// !increasing) and without jumps that survive grid refinement.
ConditionResult checkEnvelope(const std::string& id, const ClassKFn& fn, double top, bool increasing) {
  Check c(id);
  const double zero = fn(0.0);
  const double origin[1] = {0.0};
  c.observe(std::abs(zero), 0.0, 0.0, origin);
  auto maxIncrement = [&](std::size_t n, bool record) {
    double prev = zero;
    double worst = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double s = top * static_cast<double>(i) / static_cast<double>(n);
      const double v = fn(s);
      const double at[1] = {s};
      if (record) {
        if (!std::isfinite(v)) c.fail("non-finite value at s=" + num(s));
        c.observe(-v, 0.0, s, at);
        if (increasing && !(v > prev)) c.fail("not strictly increasing at s=" + num(s));
        if (!increasing && !(v > 0.0)) c.fail("not positive at s=" + num(s));
      }
      worst = std::max(worst, std::abs(v - prev));
      prev = v;
    }
    return worst;
  };
  const double coarse = maxIncrement(kClassKCoarse, true);
  const double fine = maxIncrement(kClassKFine, false);
  if (!(fine <= 0.5 * coarse + 1e-12)) c.fail("increments do not shrink under refinement (discontinuity)");
  auto out = c.result();
  out.note = c.r.note.empty() ? fn.name : fn.name + ": " + c.r.note;
  return out;
}

struct TrajectoryChecks {
  Check sandLower{"sandwich.lower"};
  Check sandUpper{"sandwich.upper"};
  Check flow{"decay.flow"};
  Check jump{"decay.jump"};
  Check cFlow{"c.flow"};
  Check cJump{"c.jump"};
  Check weight{"weight.nonnegative"};
  Check evaluated{"trajectories.evaluated"};
  Check horizon{"trajectories.horizon", false};
  std::size_t samples = 0;
  double v0 = 0.0;

  void merge(const TrajectoryChecks& o) {
    sandLower.merge(o.sandLower);
    sandUpper.merge(o.sandUpper);
    flow.merge(o.flow);
    jump.merge(o.jump);
    cFlow.merge(o.cFlow);
    cJump.merge(o.cJump);
    weight.merge(o.weight);
    evaluated.merge(o.evaluated);
    horizon.merge(o.horizon);
    samples += o.samples;
    v0 = std::max(v0, o.v0);
  }
};

struct Job {
  double t0;
  const std::vector<double>* x0;
};

TrajectoryChecks runTrajectory(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                               const LyapunovCandidate& cand, const TrajectoryGrid& grid, const Job& job,
                               bool asymptotic) {
  TrajectoryChecks out;
  DomainSpec local = dom;
  const double span = grid.span > 0.0 ? grid.span : dom.horizon - dom.t0;
  local.t0 = job.t0;
  local.horizon = job.t0 + span;
  try {
    out.v0 = cand.at(job.t0, *job.x0);
    const auto traj = solveIVP(d, f, local, *job.x0, grid.step);
    out.samples = traj.size();
    if (traj.termination != Termination::Horizon) {
      out.horizon.fail(std::string("t0=") + num(job.t0) + " terminated " + toString(traj.termination) +
                       " at t=" + num(traj.omega));
    }
    const std::size_t last = traj.size();
    for (std::size_t i = 0; i < last; ++i) {
      const double t = traj.times[i];
      const auto xl = traj.xLeft(i);
      const double norm = supDistance(xl, dom.center);
      if (!std::isfinite(norm)) break;
      const double v = cand.at(t, xl);
      out.sandLower.observe(cand.lowerEnv(norm), v, t, xl);
      if (cand.upperEnv) out.sandUpper.observe(v, (*cand.upperEnv)(norm), t, xl);
      if (traj.isJump(i)) {
        const auto xr = traj.xRight(i);
        if (!std::isfinite(supDistance(xr, dom.center))) break;
        const double gap = d.jumpAt(t);
        const double q = (cand.afterJump(t, xr) - v) / gap;
        out.jump.observe(q, 0.0, t, xl);
        if (asymptotic) {
          const double w = cand.weight->atJump(t);
          out.weight.observe(-w, 0.0, t, xl);
          out.cJump.observe(q, -w * (*cand.rate)(norm), t, xl);
        }
        continue;
      }
      if (d.classify(t) == PointKind::PlateauInterior) continue;
      const double vd = flowDerivative(f, cand, t, xl);
      out.flow.observe(vd, 0.0, t, xl);
      if (asymptotic) {
        const double w = cand.weight->atContinuous(t);
        out.weight.observe(-w, 0.0, t, xl);
        out.cFlow.observe(vd, -w * (*cand.rate)(norm), t, xl);
      }
    }
  } catch (const Error& e) {
    out.evaluated.fail(std::string("t0=") + num(job.t0) + ": " + e.what());
  }
  return out;
}

struct Evidence {
  std::vector<ConditionResult> conditions;
  SamplingMeta meta;
  double maxV0 = 0.0;
  double minRadius = std::numeric_limits<double>::infinity();
};

Evidence gatherEvidence(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                        const LyapunovCandidate& cand, const TrajectoryGrid& grid, bool asymptotic) {
  requireCandidate(cand, f);
  if (asymptotic) {
    if (!cand.rate || !cand.rate->fn) throw ConfigError("candidate.rate", "required for asymptotic checks");
    if (!cand.weight || !cand.weight->continuous) {
      throw ConfigError("candidate.weight", "required for asymptotic checks");
    }
  }
  dom.validate(f.dimension);
  if (grid.states.empty()) throw ArgumentError("certificate: trajectory grid has no initial states");
  const std::size_t n = f.dimension;
  std::vector<double> center = dom.center.empty() ? std::vector<double>(n, 0.0) : dom.center;
  std::vector<double> t0s = grid.t0s.empty() ? std::vector<double>{dom.t0} : grid.t0s;
  const double span = grid.span > 0.0 ? grid.span : dom.horizon - dom.t0;

  Evidence ev;
  ev.meta.finiteDifferenceGradient = !cand.gradX;

  // Envelope validation.
  ev.conditions.push_back(checkEnvelope("classK.lower", cand.lowerEnv, dom.r0, true));
  if (cand.upperEnv) {
    ev.conditions.push_back(checkEnvelope("classK.upper", *cand.upperEnv, dom.r0, true));
    Check order("envelopes.order");
    for (std::size_t i = 0; i <= kClassKCoarse; ++i) {
      const double s = dom.r0 * static_cast<double>(i) / static_cast<double>(kClassKCoarse);
      const double at[1] = {s};
      order.observe(cand.lowerEnv(s), (*cand.upperEnv)(s), s, at);
    }
    ev.conditions.push_back(order.result());
  }
  if (asymptotic) ev.conditions.push_back(checkEnvelope("rate.positiveDefinite", *cand.rate, dom.r0, false));

  // Rectangular (t, u) grid.
  Check vzero("V.zero");
  Check gridLower("sandwich.lower");
  Check gridUpper("sandwich.upper");
  const double tLo = *std::min_element(t0s.begin(), t0s.end());
  const double tHi = *std::max_element(t0s.begin(), t0s.end()) + span;
  const auto dirs = gridDirections(n);
  std::vector<double> u(n);
  for (std::size_t it = 0; it < kGridTimes; ++it) {
    const double t = tLo + (tHi - tLo) * static_cast<double>(it) / static_cast<double>(kGridTimes - 1);
    const double v = cand.at(t, center);
    vzero.observe(std::abs(v), 0.0, t, center);
    for (const auto& dir : dirs) {
      for (std::size_t k = 1; k <= kGridRadii; ++k) {
        const double rad = dom.r0 * static_cast<double>(k) / static_cast<double>(kGridRadii);
        for (std::size_t i = 0; i < n; ++i) u[i] = center[i] + rad * dir[i];
        const double s = supDistance(u, center);
        const double vu = cand.at(t, u);
        gridLower.observe(cand.lowerEnv(s), vu, t, u);
        if (cand.upperEnv) gridUpper.observe(vu, (*cand.upperEnv)(s), t, u);
      }
    }
  }
  ev.meta.gridTimes = kGridTimes;
  ev.meta.gridStates = dirs.size() * kGridRadii;

  // Trajectories.
  std::vector<Job> jobs;
  for (double t0 : t0s) {
    for (const auto& x0 : grid.states) {
      if (x0.size() != n) throw ArgumentError("certificate: initial state dimension mismatch");
      jobs.push_back({t0, &x0});
      ev.minRadius = std::min(ev.minRadius, supDistance(x0, center));
    }
  }
  std::vector<TrajectoryChecks> partial(jobs.size());
  parallelFor(jobs.size(), [&](std::size_t i) {
    partial[i] = runTrajectory(d, f, dom, cand, grid, jobs[i], asymptotic);
  });
  TrajectoryChecks all;
  for (const auto& p : partial) all.merge(p);
  ev.meta.trajectories = jobs.size();
  ev.meta.trajectorySamples = all.samples;
  ev.maxV0 = all.v0;

  gridLower.merge(all.sandLower);
  gridUpper.merge(all.sandUpper);
  ev.conditions.push_back(vzero.result());
  ev.conditions.push_back(gridLower.result());
  if (cand.upperEnv) ev.conditions.push_back(gridUpper.result());
  ev.conditions.push_back(all.flow.result());
  ev.conditions.push_back(all.jump.result());
  ev.conditions.push_back(all.evaluated.result());
  ev.conditions.push_back(all.horizon.result());
  if (asymptotic) {
    ev.conditions.push_back(all.weight.result());
    ev.conditions.push_back(all.cFlow.result());
    ev.conditions.push_back(all.cJump.result());
  }
  return ev;
}

bool allPassed(const CertificateReport& r, std::initializer_list<const char*> ids) {
  return std::all_of(ids.begin(), ids.end(), [&](const char* id) { return r.passed(id); });
}

Verdict decide(const CertificateReport& r, bool hasUpper, bool asymptotic) {
  const bool stable = allPassed(r, {"classK.lower", "V.zero", "sandwich.lower", "decay.flow", "decay.jump",
                                    "trajectories.evaluated"});
  const bool uniform =
      stable && hasUpper && allPassed(r, {"classK.upper", "envelopes.order", "sandwich.upper"});
  bool asym = false, uasym = false;
  if (asymptotic) {
    const bool c = allPassed(r, {"rate.positiveDefinite", "weight.nonnegative", "c.flow", "c.jump"});
    asym = stable && c && r.passed("d.fixed");
    uasym = uniform && c && r.passed("d.uniform") && r.passed("d.fixed");
  }
  if (uasym) return Verdict::UniformlyAsymptoticallyStable;
  if (asym) return Verdict::AsymptoticallyStable;
  if (uniform) return Verdict::UniformlyStable;
  if (stable) return Verdict::Stable;
  return Verdict::Inconclusive;
}

}  // namespace

const char* toString(Verdict v) noexcept {
  switch (v) {
    case Verdict::Inconclusive: return "Inconclusive";
    case Verdict::Stable: return "Stable";
    case Verdict::UniformlyStable: return "UniformlyStable";
    case Verdict::AsymptoticallyStable: return "AsymptoticallyStable";
    case Verdict::UniformlyAsymptoticallyStable: return "UniformlyAsymptoticallyStable";
  }
  return "?";
}

double vDotAlong(const Derivator& d, const VectorField& f, const LyapunovCandidate& cand, double t,
                 std::span<const double> x) {
  if (!cand.value) throw ConfigError("candidate.V", "missing");
  const auto kind = d.classify(t);
  if (kind == PointKind::PlateauInterior) {
    throw ArgumentError("vDotAlong: t=" + num(t) + " lies inside a plateau");
  }
  if (kind == PointKind::JumpPoint) {
    const double gap = d.jumpAt(t);
    const auto xr = jumpMap(d, f, t, x);
    return (cand.afterJump(t, xr) - cand.at(t, x)) / gap;
  }
  return flowDerivative(f, cand, t, x);
}

const ConditionResult* CertificateReport::find(const std::string& id) const {
  for (const auto& c : conditions) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

bool CertificateReport::passed(const std::string& id) const {
  const auto* c = find(id);
  return c && c->passed;
}

std::string CertificateReport::table() const {
  std::ostringstream os;
  char line[256];
  os << "verdict: " << toString(verdict) << " (certified on sampled evidence)\n";
  std::snprintf(line, sizeof line, "%-26s %-6s %-24s %-14s %s\n", "condition", "status", "worst margin",
                "witness t", "note");
  os << line;
  for (const auto& c : conditions) {
    const char* status = c.passed ? "pass" : (c.gating ? "FAIL" : "warn");
    std::snprintf(line, sizeof line, "%-26s %-6s %-24.15g %-14.8g %s\n", c.id.c_str(), status, c.worstMargin,
                  c.witnessT, c.note.c_str());
    os << line;
  }
  os << "trajectories: " << meta.trajectories << ", samples: " << meta.trajectorySamples
     << ", grid: " << meta.gridTimes << " times x " << meta.gridStates << " states";
  if (meta.finiteDifferenceGradient) os << ", gradient: finite differences";
  os << '\n';
  return os.str();
}

std::string CertificateReport::keyValue() const {
  std::ostringstream os;
  os << "verdict=" << toString(verdict) << '\n';
  for (const auto& c : conditions) {
    const std::string k = "condition." + c.id;
    os << k << ".passed=" << (c.passed ? "true" : "false") << '\n';
    os << k << ".gating=" << (c.gating ? "true" : "false") << '\n';
    os << k << ".worst_margin=" << num(c.worstMargin) << '\n';
    os << k << ".witness_t=" << num(c.witnessT) << '\n';
    os << k << ".witness_x=";
    for (std::size_t i = 0; i < c.witnessX.size(); ++i) os << (i ? ";" : "") << num(c.witnessX[i]);
    os << '\n';
    os << k << ".samples=" << c.samples << '\n';
    if (!c.note.empty()) os << k << ".note=" << c.note << '\n';
  }
  os << "sampling.trajectories=" << meta.trajectories << '\n';
  os << "sampling.trajectory_samples=" << meta.trajectorySamples << '\n';
  os << "sampling.grid_times=" << meta.gridTimes << '\n';
  os << "sampling.grid_states=" << meta.gridStates << '\n';
  os << "sampling.finite_difference_gradient=" << (meta.finiteDifferenceGradient ? "true" : "false") << '\n';
  if (!meta.probeT0s.empty()) {
    os << "sampling.probe_t0=";
    for (std::size_t i = 0; i < meta.probeT0s.size(); ++i) os << (i ? ";" : "") << num(meta.probeT0s[i]);
    os << '\n' << "sampling.probe_horizons=";
    for (std::size_t i = 0; i < meta.probeHorizons.size(); ++i) os << (i ? ";" : "") << num(meta.probeHorizons[i]);
    os << '\n';
  }
  return os.str();
}

CertificateReport checkDecayCertificate(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                        const LyapunovCandidate& cand, const TrajectoryGrid& grid) {
  auto ev = gatherEvidence(d, f, dom, cand, grid, false);
  CertificateReport rep;
  rep.conditions = std::move(ev.conditions);
  rep.meta = std::move(ev.meta);
  rep.verdict = decide(rep, cand.upperEnv.has_value(), false);
  return rep;
}

CertificateReport checkAsymptoticCertificate(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                             const LyapunovCandidate& cand, const TrajectoryGrid& grid,
                                             const DivergenceProbe& probe) {
  auto ev = gatherEvidence(d, f, dom, cand, grid, true);
  CertificateReport rep;
  rep.conditions = std::move(ev.conditions);
  rep.meta = std::move(ev.meta);

  if (!(probe.warmup > 0.0) || probe.doublings < 1) {
    throw ArgumentError("divergence probe needs warmup > 0 and at least one doubling");
  }
  std::vector<double> horizons;
  for (int k = 0; k <= probe.doublings; ++k) horizons.push_back(probe.warmup * std::ldexp(1.0, k));
  const double tMax = horizons.back();
  const double base = grid.t0s.empty() ? dom.t0 : *std::min_element(grid.t0s.begin(), grid.t0s.end());
  std::vector<double> t0s;
  if (probe.t0Grid.empty()) {
    for (double off : {0.0, 1.0, 10.0, 100.0, 1000.0, 10000.0}) {
      if (base + off + tMax <= d.windowEnd()) t0s.push_back(base + off);
    }
  } else {
    for (double t0 : probe.t0Grid) {
      if (t0 + tMax > d.windowEnd()) {
        throw ArgumentError("divergence probe: t0=" + num(t0) + " plus the largest horizon leaves the window");
      }
      t0s.push_back(t0);
    }
  }
  if (t0s.empty()) throw ArgumentError("divergence probe: window too short for the requested horizons");
  rep.meta.probeT0s = t0s;
  rep.meta.probeHorizons = horizons;

  // W[j][k] = int_[t0_j, t0_j + T_k) w dmu_g
  std::vector<std::vector<double>> W(t0s.size(), std::vector<double>(horizons.size()));
  parallelFor(t0s.size(), [&](std::size_t j) {
    double acc = 0.0;
    double from = t0s[j];
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      const double to = t0s[j] + horizons[k];
      acc += lsIntegrate(d, *cand.weight, from, to);
      W[j][k] = acc;
      from = to;
    }
  });

  // Fixed t0: W keeps growing, with no late stall.
  Check fixed("d.fixed");
  for (std::size_t j = 0; j < t0s.size(); ++j) {
    double maxInc = W[j][0];
    bool growing = W[j][0] >= 0.0;
    for (std::size_t k = 1; k < horizons.size(); ++k) {
      const double inc = W[j][k] - W[j][k - 1];
      growing = growing && inc > 0.0;
      maxInc = std::max(maxInc, inc);
    }
    const double lastInc = W[j].back() - W[j][W[j].size() - 2];
    const double at[1] = {W[j].back()};
    fixed.observe(0.25 * maxInc, lastInc, t0s[j], at);
    if (!growing) fixed.fail("W stops growing for t0=" + num(t0s[j]));
    if (!(lastInc > 0.0)) fixed.r.passed = false;
  }
  fixed.r.note = fixed.r.note.empty() ? "last increment vs 1/4 of the largest, per t0" : fixed.r.note;
  rep.conditions.push_back(fixed.result());

  // Uniform: min over t0 must grow past the target.
  const std::size_t n = f.dimension;
  const std::vector<double> center = dom.center.empty() ? std::vector<double>(n, 0.0) : dom.center;
  const double delta = probe.annulusInner ? *probe.annulusInner : 0.5 * ev.minRadius;
  double M = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kAnnulusPoints; ++i) {
    const double s = delta + (dom.r0 - delta) * static_cast<double>(i) / static_cast<double>(kAnnulusPoints);
    M = std::min(M, std::abs((*cand.rate)(s)));
  }
  Check uniform("d.uniform");
  std::vector<double> mins(horizons.size());
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    mins[k] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < t0s.size(); ++j) mins[k] = std::min(mins[k], W[j][k]);
  }
  const double target = M > 0.0 ? probe.targetFactor * ev.maxV0 / M : std::numeric_limits<double>::infinity();
  const double at[1] = {mins.back()};
  uniform.observe(target, mins.back(), tMax, at);
  bool rising = mins.back() > mins[mins.size() - 2];
  for (std::size_t k = 1; k < mins.size(); ++k) rising = rising && mins[k] >= mins[k - 1];
  if (!rising) uniform.fail("min over t0 stalls");
  if (uniform.r.note.empty()) {
    uniform.r.note = "min over t0 of W=" + num(mins.back()) + " vs target " + num(target) + " (M=" + num(M) +
                     ", delta=" + num(delta) + ")";
  }
  rep.conditions.push_back(uniform.result());

  rep.verdict = decide(rep, cand.upperEnv.has_value(), true);
  return rep;
}

StabilityProbeResult empiricalStabilityProbe(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                             const StabilityProbeOptions& opts) {
  dom.validate(f.dimension);
  const std::size_t n = f.dimension;
  const std::vector<double> center = dom.center.empty() ? std::vector<double>(n, 0.0) : dom.center;
  std::vector<std::vector<double>> rays;
  for (const auto& r : opts.rays) {
    if (r.size() != n) throw ArgumentError("stability probe: ray dimension mismatch");
    const double norm = supDistance(r, {});
    if (!(norm > 0.0)) throw ArgumentError("stability probe: zero ray");
    std::vector<double> u(r);
    for (auto& v : u) v /= norm;
    rays.push_back(std::move(u));
  }
  if (rays.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      for (double s : {1.0, -1.0}) {
        std::vector<double> u(n, 0.0);
        u[i] = s;
        rays.push_back(std::move(u));
      }
    }
  }
  for (double e : opts.eps) {
    if (!(e > 0.0 && e <= dom.r0)) throw ArgumentError("stability probe: eps must lie in (0, r0]");
  }
  const std::vector<double> t0s = opts.t0s.empty() ? std::vector<double>{dom.t0} : opts.t0s;
  const double span = opts.span > 0.0 ? opts.span : dom.horizon - dom.t0;
  const double rmax = dom.r * (1.0 - 1e-9);
  const double sigmaRadius = opts.sigmaRadius > 0.0 ? opts.sigmaRadius : 0.5 * dom.r;

  auto simulate = [&](double t0, double radius, const std::vector<double>& ray) -> std::optional<Trajectory> {
    DomainSpec local = dom;
    local.t0 = t0;
    local.horizon = t0 + span;
    std::vector<double> x0(n);
    for (std::size_t i = 0; i < n; ++i) x0[i] = center[i] + radius * ray[i];
    try {
      return solveIVP(d, f, local, x0, opts.step);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto sampleNorm = [&](const Trajectory& tr, std::size_t i) {
    return std::max(supDistance(tr.xLeft(i), center), supDistance(tr.xRight(i), center));
  };

  StabilityProbeResult res;
  res.rows.resize(opts.eps.size() * t0s.size());
  parallelFor(res.rows.size(), [&](std::size_t idx) {
    const double eps = opts.eps[idx / t0s.size()];
    const double t0 = t0s[idx % t0s.size()];
    auto staysInside = [&](double radius) {
      for (const auto& ray : rays) {
        const auto tr = simulate(t0, radius, ray);
        if (!tr || tr->termination != Termination::Horizon) return false;
        for (std::size_t i = 0; i < tr->size(); ++i) {
          if (!(sampleNorm(*tr, i) < eps)) return false;
        }
      }
      return true;
    };
    StabilityProbeRow row;
    row.eps = eps;
    row.t0 = t0;
    if (staysInside(rmax)) {
      row.delta = row.deltaUpper = rmax;
      row.deltaResolved = true;
    } else {
      double lo = 0.0, hi = rmax;
      for (int b = 0; b < opts.bisections; ++b) {
        const double mid = 0.5 * (lo + hi);
        (staysInside(mid) ? lo : hi) = mid;
      }
      row.delta = lo;
      row.deltaUpper = hi;
      row.deltaResolved = lo > 0.0;
    }
    std::optional<double> sigma = 0.0;
    for (const auto& ray : rays) {
      const auto tr = simulate(t0, sigmaRadius, ray);
      if (!tr || tr->termination != Termination::Horizon || tr->size() == 0) {
        sigma.reset();
        break;
      }
      std::optional<std::size_t> lastOutside;
      for (std::size_t i = 0; i < tr->size(); ++i) {
        if (!(sampleNorm(*tr, i) < eps)) lastOutside = i;
      }
      if (!lastOutside) continue;
      if (*lastOutside + 1 >= tr->size()) {
        sigma.reset();
        break;
      }
      sigma = std::max(*sigma, tr->times[*lastOutside + 1] - t0);
    }
    row.sigma = sigma;
    res.rows[idx] = row;
  });

  for (std::size_t e = 0; e < opts.eps.size(); ++e) {
    StabilityProbeResult::Spread sp;
    sp.eps = opts.eps[e];
    double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
    double smin = dmin, smax = -dmin;
    bool allSigma = true;
    for (std::size_t j = 0; j < t0s.size(); ++j) {
      const auto& row = res.rows[e * t0s.size() + j];
      dmin = std::min(dmin, row.delta);
      dmax = std::max(dmax, row.delta);
      if (row.sigma) {
        smin = std::min(smin, *row.sigma);
        smax = std::max(smax, *row.sigma);
      } else {
        allSigma = false;
      }
    }
    sp.deltaSpread = dmax - dmin;
    if (allSigma) sp.sigmaSpread = smax - smin;
    res.spreads.push_back(sp);
  }
  return res;
}

}  // namespace stieltjes
