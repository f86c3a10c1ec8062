#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stieltjes/derivator.hpp"

namespace stieltjes {

/// A scalar function of time given separately off and on the jump set.
/// An empty `jump` branch falls back to `continuous`.
struct TwoBranchScalar {
  std::function<double(double)> continuous;
  std::function<double(double)> jump;

  double atContinuous(double t) const { return continuous(t); }
  double atJump(double t) const { return jump ? jump(t) : continuous(t); }

  static TwoBranchScalar constant(double c);
  static TwoBranchScalar constants(double offJumps, double atJumps);
};

/// Adaptive Gauss-Kronrod (7/15) with bisection on each smooth segment.
struct QuadratureOptions {
  double relTol = 1e-10;
  double absTol = 1e-13;
  int maxDepth = 30;  // bisection levels per segment
};

/// Integral of h over [a, b) against mu_g. A jump at a is included, one at b
/// is not. Plateau segments contribute nothing.
double lsIntegrate(const Derivator& d, const TwoBranchScalar& h, double a, double b,
                   const QuadratureOptions& opts = {});

/// Jump times s in [a, b) with 1 + p(s) * gap(s) <= 0.
std::vector<double> nonresonanceCheck(const Derivator& d, const TwoBranchScalar& p, double a, double b);

/// g-exponential e_p(t, a). Throws ResonanceError at the first resonant jump.
double gExp(const Derivator& d, const TwoBranchScalar& p, double a, double t,
            const QuadratureOptions& opts = {});

/// e_p(t,t0) * (int_[t0,t) e_p(s,t0)^-1 k(s) / (1 + p(s) gap(s)) dmu_g(s) + u0)
double aprioriBound(const Derivator& d, const TwoBranchScalar& k, const TwoBranchScalar& p, double u0,
                    double t0, double t, const QuadratureOptions& opts = {});

struct BoundValue {
  double left = 0.0;   // bound at t
  double right = 0.0;  // bound at t+ (differs from left only at jumps)
};

/// aprioriBound at many nondecreasing times >= t0, computed in one sweep.
std::vector<BoundValue> aprioriBounds(const Derivator& d, const TwoBranchScalar& k, const TwoBranchScalar& p,
                                      double u0, double t0, std::span<const double> times,
                                      const QuadratureOptions& opts = {});

}  // namespace stieltjes
