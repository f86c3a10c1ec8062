#include "stieltjes/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "stieltjes/errors.hpp"
#include "stieltjes/gcalc.hpp"

namespace stieltjes {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool allFinite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

class Integrator {
 public:
  Integrator(const Derivator& d, const VectorField& f, const DomainSpec& dom, double step)
      : d_(d), f_(f), dom_(dom), h_(step), n_(f.dimension), k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_),
        jumpOut_(n_) {}

  Trajectory run(std::span<const double> x0) {
    traj_.dimension = n_;
    x_.assign(x0.begin(), x0.end());
    const double t0 = dom_.t0;
    record(t0);
    if (d_.jumpAt(t0) > 0.0 && !applyJump(t0)) return finish();
    for (const auto& seg : d_.segments(t0, dom_.horizon)) {
      if (!advance(seg)) return finish();
      if (d_.jumpAt(seg.end) > 0.0 && !applyJump(seg.end)) return finish();
    }
    traj_.termination = Termination::Horizon;
    traj_.omega = dom_.horizon;
    return finish();
  }

 private:
  Trajectory finish() { return std::move(traj_); }

  void record(double t) {
    traj_.times.push_back(t);
    traj_.gValues.push_back(d_.eval(t));
    traj_.left.insert(traj_.left.end(), x_.begin(), x_.end());
    traj_.right.insert(traj_.right.end(), x_.begin(), x_.end());
    traj_.jumps.push_back(0);
  }

  bool stop(Termination why, double t) {
    traj_.termination = why;
    traj_.omega = t;
    return false;
  }

  // Returns false when the trajectory terminated.
  bool advance(const Segment& seg) {
    const double len = seg.end - seg.start;
    const auto steps = static_cast<long long>(std::max(1.0, std::ceil(len / h_ - 1e-9)));
    double t = seg.start;
    for (long long k = 1; k <= steps; ++k) {
      const double tn = k == steps ? seg.end : seg.start + static_cast<double>(k) * h_;
      if (!seg.isPlateau()) rk4(seg, t, tn - t);
      record(tn);
      if (!allFinite(x_) || supDistance(x_, {}) > dom_.blowupThreshold) return stop(Termination::BlowUp, tn);
      if (supDistance(x_, dom_.center) > dom_.r0) return stop(Termination::DomainExitContinuous, tn);
      t = tn;
    }
    return true;
  }

  bool applyJump(double t) {
    const double gap = d_.jumpAt(t);
    f_.evalJump(t, x_, jumpOut_);
    for (std::size_t i = 0; i < n_; ++i) x_[i] += gap * jumpOut_[i];
    const std::size_t row = traj_.size() - 1;
    std::copy(x_.begin(), x_.end(), traj_.right.begin() + static_cast<std::ptrdiff_t>(row * n_));
    traj_.jumps[row] = 1;
    if (!allFinite(x_)) return stop(Termination::BlowUp, t);
    if (supDistance(x_, dom_.center) > dom_.r0) return stop(Termination::DomainExitJump, t);
    if (supDistance(x_, {}) > dom_.blowupThreshold) return stop(Termination::BlowUp, t);
    return true;
  }

  void slope(const Segment& seg, double t, std::span<const double> x, std::vector<double>& out) {
    f_.evalContinuous(t, x, out);
    const double gp = seg.slopeAt(t);
    for (auto& v : out) v *= gp;
  }

  void rk4(const Segment& seg, double t, double h) {
    slope(seg, t, x_, k1_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x_[i] + 0.5 * h * k1_[i];
    slope(seg, t + 0.5 * h, tmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x_[i] + 0.5 * h * k2_[i];
    slope(seg, t + 0.5 * h, tmp_, k3_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x_[i] + h * k3_[i];
    slope(seg, t + h, tmp_, k4_);
    for (std::size_t i = 0; i < n_; ++i) x_[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

  const Derivator& d_;
  const VectorField& f_;
  const DomainSpec& dom_;
  double h_;
  std::size_t n_;
  std::vector<double> x_, k1_, k2_, k3_, k4_, tmp_, jumpOut_;
  Trajectory traj_;
};

}  // namespace

const char* toString(Termination t) noexcept {
  switch (t) {
    case Termination::Horizon: return "Horizon";
    case Termination::BlowUp: return "BlowUp";
    case Termination::DomainExitContinuous: return "DomainExitContinuous";
    case Termination::DomainExitJump: return "DomainExitJump";
  }
  return "?";
}

void DomainSpec::validate(std::size_t n) const {
  if (!(t0 < horizon)) throw ArgumentError("domain: t0 must be < horizon");
  if (!(r > 0.0) || !(r <= r0)) throw ArgumentError("domain: need 0 < r <= r0");
  if (!(blowupThreshold > 0.0)) throw ArgumentError("domain: blowup threshold must be > 0");
  if (!center.empty() && center.size() != n) {
    throw ArgumentError("domain: center has " + std::to_string(center.size()) + " entries, system dimension is " +
                        std::to_string(n));
  }
}

double supDistance(std::span<const double> x, std::span<const double> center) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::abs(x[i] - (center.empty() ? 0.0 : center[i]));
    if (!(v <= m)) m = v;  // propagates NaN
  }
  return m;
}

std::vector<double> jumpMap(const Derivator& d, const VectorField& f, double t, std::span<const double> x) {
  const double gap = d.jumpAt(t);
  if (!(gap > 0.0)) throw ArgumentError("jumpMap: t=" + num(t) + " is not a jump time");
  std::vector<double> out(x.size());
  f.evalJump(t, x, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + gap * out[i];
  return out;
}

Trajectory solveIVP(const Derivator& d, const VectorField& f, const DomainSpec& dom, std::span<const double> x0,
                    double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("solveIVP: step must be > 0");
  if (!f.continuous) throw ArgumentError("solveIVP: vector field has no continuous branch");
  if (x0.size() != f.dimension) throw ArgumentError("solveIVP: x0 dimension does not match the vector field");
  dom.validate(f.dimension);
  if (!(supDistance(x0, dom.center) < dom.r)) {
    throw ArgumentError("solveIVP: initial state must satisfy |x0 - center| < r");
  }
  return Integrator(d, f, dom, step).run(x0);
}

double linearClosedForm(const Derivator& d, double c, double nu, double t0, double x0, double t) {
  return x0 * gExp(d, TwoBranchScalar::constants(c, nu), t0, t);
}

}  // namespace stieltjes
