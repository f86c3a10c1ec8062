#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stieltjes/derivator.hpp"
#include "stieltjes/gcalc.hpp"
#include "stieltjes/solver.hpp"

namespace stieltjes {

/// Scalar envelope s -> fn(s) on [0, inf). Class K (zero at zero, strictly
/// increasing, continuous) is checked on samples, not assumed.
struct ClassKFn {
  std::string name;
  std::function<double(double)> fn;

  double operator()(double s) const { return fn(s); }
};

/// V(t, x) together with what the stability theorems need. Norms are sup
/// norms measured from the domain center.
struct LyapunovCandidate {
  using StateFn = std::function<double(double t, std::span<const double> x)>;
  using GradFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

  StateFn value;
  /// V(t+, x). Empty means V is continuous in t at jumps (uses `value`).
  StateFn valueAfterJump;
  GradFn gradX;
  /// Partial g-derivative in t off jumps. Empty means zero.
  StateFn partialGT;
  ClassKFn lowerEnv;
  std::optional<ClassKFn> upperEnv;
  std::optional<ClassKFn> rate;
  std::optional<TwoBranchScalar> weight;
  /// Allow a central finite-difference gradient when gradX is empty.
  bool finiteDifferenceGradient = false;

  double at(double t, std::span<const double> x) const { return value(t, x); }
  double afterJump(double t, std::span<const double> x) const {
    return valueAfterJump ? valueAfterJump(t, x) : value(t, x);
  }
};

/// Total g-derivative of V along f at (t, x). At a jump this is the jump
/// quotient [V(t+, x + gap f) - V(t, x)] / gap. Throws ArgumentError inside a
/// plateau and ConfigError when no gradient is available.
double vDotAlong(const Derivator& d, const VectorField& f, const LyapunovCandidate& cand, double t,
                 std::span<const double> x);

/// Initial conditions fanned out for certificate checks. Every state is
/// simulated from every start time over `span` time units (0 means the
/// domain's horizon - t0).
struct TrajectoryGrid {
  std::vector<double> t0s;
  std::vector<std::vector<double>> states;
  double step = 1e-3;
  double span = 0.0;
};

/// Parameters of the divergence probe for int_[t0, t0+T) w dmu_g.
struct DivergenceProbe {
  double warmup = 10.0;
  int doublings = 12;
  /// Start times; empty means t0 + {0, 1, 10, 100, 1000, 10000} inside the window.
  std::vector<double> t0Grid;
  /// Inner radius delta for M = inf phi on [delta, r0); default half the smallest initial radius.
  std::optional<double> annulusInner;
  double targetFactor = 10.0;
};

enum class Verdict { Inconclusive, Stable, UniformlyStable, AsymptoticallyStable, UniformlyAsymptoticallyStable };

const char* toString(Verdict v) noexcept;

struct ConditionResult {
  std::string id;
  bool passed = true;
  /// Largest lhs - rhs seen (positive means violated before tolerance).
  double worstMargin = 0.0;
  double witnessT = 0.0;
  std::vector<double> witnessX;
  std::string note;
  bool gating = true;
  std::size_t samples = 0;
};

struct SamplingMeta {
  std::size_t trajectories = 0;
  std::size_t trajectorySamples = 0;
  std::size_t gridTimes = 0;
  std::size_t gridStates = 0;
  std::vector<double> probeT0s;
  std::vector<double> probeHorizons;
  bool finiteDifferenceGradient = false;
};

/// Outcome of sampled certificate checks. Certified on sampled evidence only.
struct CertificateReport {
  Verdict verdict = Verdict::Inconclusive;
  std::vector<ConditionResult> conditions;
  SamplingMeta meta;

  const ConditionResult* find(const std::string& id) const;
  bool passed(const std::string& id) const;
  /// Human-readable table.
  std::string table() const;
  /// key=value lines.
  std::string keyValue() const;
};

/// Sandwich a(|u|) <= V <= b(|u|), V(t, 0) = 0, class-K checks and
/// V'_g <= 0 along simulated trajectories (flow and jumps reported apart).
CertificateReport checkDecayCertificate(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                        const LyapunovCandidate& cand, const TrajectoryGrid& grid);

/// Everything in checkDecayCertificate plus V'_g <= -w phi along trajectories
/// and the fixed-t0 and uniform divergence probes of int w dmu_g.
CertificateReport checkAsymptoticCertificate(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                             const LyapunovCandidate& cand, const TrajectoryGrid& grid,
                                             const DivergenceProbe& probe = {});

struct StabilityProbeOptions {
  std::vector<double> eps;
  std::vector<double> t0s;
  /// Directions; each is rescaled to unit sup norm.
  std::vector<std::vector<double>> rays;
  double step = 1e-3;
  /// Time units simulated from each t0 (0 means horizon - t0 of the domain).
  double span = 0.0;
  /// Initial radius for sigma; 0 means half of r.
  double sigmaRadius = 0.0;
  int bisections = 12;
};

struct StabilityProbeRow {
  double eps = 0.0;
  double t0 = 0.0;
  double delta = 0.0;     // largest radius seen to keep every ray below eps
  double deltaUpper = 0.0;  // smallest radius seen to fail (== delta when resolved at the cap)
  bool deltaResolved = false;
  std::optional<double> sigma;  // elapsed time after which |x| < eps to the horizon
};

struct StabilityProbeResult {
  std::vector<StabilityProbeRow> rows;
  /// Per eps: max - min of delta across t0 and of sigma (when all finite).
  struct Spread {
    double eps = 0.0;
    double deltaSpread = 0.0;
    std::optional<double> sigmaSpread;
  };
  std::vector<Spread> spreads;
};

StabilityProbeResult empiricalStabilityProbe(const Derivator& d, const VectorField& f, const DomainSpec& dom,
                                             const StabilityProbeOptions& opts);

}  // namespace stieltjes
