#include "stieltjes/gcalc.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "stieltjes/errors.hpp"

namespace stieltjes {

namespace {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double finiteOrThrow(double v, double t) {
  if (!std::isfinite(v)) throw EvaluationError("non-finite integrand value at t=" + num(t), t);
  return v;
}

template <class F>
void gk15(F& f, double a, double b, double& kronrod, double& error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resK = fc * kWgk[7];
  double resG = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    resK += kWgk[j] * s;
    if (j % 2 == 1) resG += kWg[j / 2] * s;
  }
  kronrod = resK * h;
  error = std::abs((resK - resG) * h);
}

template <class F>
double adaptive(F& f, double a, double b, const QuadratureOptions& opts, int depth) {
  double k = 0.0, err = 0.0;
  gk15(f, a, b, k, err);
  if (err <= std::max(opts.absTol, opts.relTol * std::abs(k)) || depth >= opts.maxDepth) return k;
  const double m = 0.5 * (a + b);
  if (!(m > a && m < b)) return k;
  return adaptive(f, a, m, opts, depth + 1) + adaptive(f, m, b, opts, depth + 1);
}

// int over [a, b) of h dg restricted to the continuous part of g.
template <class H>
double smoothPart(const Segment& seg, H& h, double a, double b, const QuadratureOptions& opts) {
  if (seg.isPlateau() || !(b > a)) return 0.0;
  auto integrand = [&](double t) { return finiteOrThrow(h(t), t) * seg.slopeAt(t); };
  return adaptive(integrand, a, b, opts, 0);
}

void requireOrdered(double a, double b, const char* op) {
  if (a > b) throw ArgumentError(std::string(op) + ": a=" + num(a) + " > b=" + num(b));
}

double checkedFactor(double p, double gap, double t) {
  const double f = 1.0 + p * gap;
  if (!(f > 0.0)) {
    throw ResonanceError("nonresonance violated at jump t=" + num(t) + ": 1 + p*gap = " + num(f), t);
  }
  return f;
}

}  // namespace

TwoBranchScalar TwoBranchScalar::constant(double c) {
  return {[c](double) { return c; }, {}};
}

TwoBranchScalar TwoBranchScalar::constants(double offJumps, double atJumps) {
  return {[offJumps](double) { return offJumps; }, [atJumps](double) { return atJumps; }};
}

double lsIntegrate(const Derivator& d, const TwoBranchScalar& h, double a, double b,
                   const QuadratureOptions& opts) {
  requireOrdered(a, b, "lsIntegrate");
  double total = 0.0;
  auto cont = [&](double t) { return h.atContinuous(t); };
  for (const auto& seg : d.segments(a, b)) total += smoothPart(seg, cont, seg.start, seg.end, opts);
  for (const auto& ev : d.jumpsIn(a, b)) total += finiteOrThrow(h.atJump(ev.time), ev.time) * ev.gap;
  return total;
}

std::vector<double> nonresonanceCheck(const Derivator& d, const TwoBranchScalar& p, double a, double b) {
  requireOrdered(a, b, "nonresonanceCheck");
  std::vector<double> bad;
  for (const auto& ev : d.jumpsIn(a, b)) {
    if (!(1.0 + p.atJump(ev.time) * ev.gap > 0.0)) bad.push_back(ev.time);
  }
  return bad;
}

double gExp(const Derivator& d, const TwoBranchScalar& p, double a, double t, const QuadratureOptions& opts) {
  requireOrdered(a, t, "gExp");
  const auto jumps = d.jumpsIn(a, t);
  double exponent = 0.0;
  for (const auto& ev : jumps) {
    const double pj = finiteOrThrow(p.atJump(ev.time), ev.time);
    checkedFactor(pj, ev.gap, ev.time);
    exponent += std::log1p(pj * ev.gap);
  }
  auto cont = [&](double s) { return p.atContinuous(s); };
  for (const auto& seg : d.segments(a, t)) exponent += smoothPart(seg, cont, seg.start, seg.end, opts);
  return std::exp(exponent);
}

double aprioriBound(const Derivator& d, const TwoBranchScalar& k, const TwoBranchScalar& p, double u0,
                    double t0, double t, const QuadratureOptions& opts) {
  const double times[1] = {t};
  return aprioriBounds(d, k, p, u0, t0, times, opts).front().left;
}

std::vector<BoundValue> aprioriBounds(const Derivator& d, const TwoBranchScalar& k, const TwoBranchScalar& p,
                                      double u0, double t0, std::span<const double> times,
                                      const QuadratureOptions& opts) {
  std::vector<BoundValue> out;
  if (times.empty()) return out;
  double prev = t0;
  for (double q : times) {
    if (q < prev) throw ArgumentError("aprioriBounds: times must be nondecreasing and >= t0");
    prev = q;
  }
  const auto segs = d.segments(t0, times.back());

  // Running state at `cur` (before any jump at cur): E = e_p(cur, t0), J = weighted k integral.
  double E = 1.0;
  double J = 0.0;
  double cur = t0;
  bool jumpDone = false;
  std::size_t si = 0;

  auto jumpStep = [&](double t, double& e, double& j) {
    const double gap = d.jumpAt(t);
    if (gap <= 0.0) return;
    const double pj = finiteOrThrow(p.atJump(t), t);
    const double kj = finiteOrThrow(k.atJump(t), t);
    const double factor = checkedFactor(pj, gap, t);
    j += kj / factor * gap / e;
    e *= factor;
  };

  auto pCont = [&](double s) { return p.atContinuous(s); };

  auto smoothStep = [&](const Segment& seg, double from, double to) {
    if (seg.isPlateau() || !(to > from)) return;
    auto weighted = [&](double r) {
      const double kr = finiteOrThrow(k.atContinuous(r), r);
      if (kr == 0.0) return 0.0;
      const double phi = smoothPart(seg, pCont, from, r, opts);
      return std::exp(-phi) * kr;
    };
    const double inner = smoothPart(seg, weighted, from, to, opts);
    J += inner / E;
    E *= std::exp(smoothPart(seg, pCont, from, to, opts));
  };

  for (double q : times) {
    while (cur < q) {
      if (!jumpDone) {
        jumpStep(cur, E, J);
        jumpDone = true;
      }
      while (si < segs.size() && segs[si].end <= cur) ++si;
      if (si == segs.size()) break;
      const double stop = std::min(segs[si].end, q);
      smoothStep(segs[si], cur, stop);
      if (stop > cur) {
        cur = stop;
        jumpDone = false;
      }
    }
    BoundValue bv;
    bv.left = E * (J + u0);
    if (jumpDone) {
      bv.right = bv.left;
    } else {
      double e = E, j = J;
      jumpStep(q, e, j);
      bv.right = e * (j + u0);
    }
    out.push_back(bv);
  }
  return out;
}

}  // namespace stieltjes
