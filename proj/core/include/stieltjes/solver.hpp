#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "stieltjes/derivator.hpp"

namespace stieltjes {

/// Right-hand side f(t, x) with separate branches off and on the jump set.
/// An empty `jump` branch falls back to `continuous`.
struct VectorField {
  using Map = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

  std::size_t dimension = 1;
  Map continuous;
  Map jump;

  void evalContinuous(double t, std::span<const double> x, std::span<double> out) const { continuous(t, x, out); }
  void evalJump(double t, std::span<const double> x, std::span<double> out) const {
    (jump ? jump : continuous)(t, x, out);
  }
};

/// Omega = [t0, horizon] x closed sup-norm ball of radius r0 around `center`.
/// Initial states must lie strictly inside the ball of radius r.
struct DomainSpec {
  double t0 = 0.0;
  double horizon = 1.0;
  std::vector<double> center;
  double r0 = 1.0;
  double r = 1.0;
  double blowupThreshold = 1e8;

  /// Throws ArgumentError unless 0 < r <= r0, t0 < horizon and center has n entries.
  void validate(std::size_t n) const;
};

enum class Termination { Horizon, BlowUp, DomainExitContinuous, DomainExitJump };

const char* toString(Termination t) noexcept;

/// Samples of a left-continuous solution. Sample i holds x(t_i) and x(t_i+);
/// the two differ only at jump times.
struct Trajectory {
  std::size_t dimension = 0;
  std::vector<double> times;
  std::vector<double> gValues;
  std::vector<double> left;   // row-major, size() * dimension
  std::vector<double> right;  // row-major, size() * dimension
  std::vector<char> jumps;    // 1 where t_i is a jump time
  Termination termination = Termination::Horizon;
  double omega = 0.0;

  std::size_t size() const noexcept { return times.size(); }
  std::span<const double> xLeft(std::size_t i) const { return {left.data() + i * dimension, dimension}; }
  std::span<const double> xRight(std::size_t i) const { return {right.data() + i * dimension, dimension}; }
  bool isJump(std::size_t i) const { return jumps[i] != 0; }
};

/// Sup norm of x - center (center may be empty, meaning the origin).
double supDistance(std::span<const double> x, std::span<const double> center);

/// x + gap(t) * f.jump(t, x). Throws ArgumentError when t is not a jump time.
std::vector<double> jumpMap(const Derivator& d, const VectorField& f, double t, std::span<const double> x);

/// Fixed-step RK4 on dx/dt = f(t,x) g'(t) between jumps, exact jump updates,
/// frozen state on plateaus. A jump at t0 is applied first; a jump at the
/// horizon is applied and recorded.
Trajectory solveIVP(const Derivator& d, const VectorField& f, const DomainSpec& dom, std::span<const double> x0,
                    double step = 1e-3);

/// x0 * e_p(t, t0) with p = c off jumps and nu at jumps: the left value of the
/// solution of x'_g = c x (nu x at jumps).
double linearClosedForm(const Derivator& d, double c, double nu, double t0, double x0, double t);

}  // namespace stieltjes
