#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace stieltjes {

/// Constant slope on a piece. A zero slope is normalized to Plateau.
struct Linear {
  double slope = 1.0;
};

/// g is frozen on the piece.
struct Plateau {};

/// Arbitrary smooth nondecreasing profile. `value` is any antiderivative of
/// `slope`; only its increments across the piece are used. Both maps receive
/// piece-local time (absolute time for non-repeating layouts).
struct Smooth {
  std::function<double(double)> value;
  std::function<double(double)> slope;
};

using Profile = std::variant<Linear, Plateau, Smooth>;

/// Continuous part of g on the half-open interval [start, end).
struct ContinuousPiece {
  double start = 0.0;
  double end = 0.0;
  Profile profile = Linear{};

  bool isPlateau() const noexcept { return std::holds_alternative<Plateau>(profile); }
  /// g' at (piece-local) time t.
  double slopeAt(double t) const;
  /// Increment of the continuous part between two (piece-local) times.
  double increment(double from, double to) const;
};

struct JumpEvent {
  double time = 0.0;
  double gap = 0.0;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// Finitely many jumps at explicit times.
struct ExplicitJumps {
  std::vector<JumpEvent> events;
};

/// Jumps at origin + offset_i + k * period for k = 0, 1, 2, ...
/// Offsets lie in [0, period); gaps[i] belongs to offsets[i].
struct PeriodicJumps {
  double period = 1.0;
  double origin = 0.0;
  std::vector<double> offsets;
  std::vector<double> gaps;
};

using JumpRule = std::variant<ExplicitJumps, PeriodicJumps>;

/// g(anchor.time) = anchor.value fixes the additive constant of g.
struct Anchor {
  double time = 0.0;
  double value = 0.0;
};

enum class PointKind { ContinuityPoint, JumpPoint, PlateauInterior, PlateauEndpoint };

const char* toString(PointKind kind) noexcept;

/// A stretch of [a, b) covered by a single piece with no jump in its
/// interior. `shift` maps absolute time to the piece's local time.
struct Segment {
  double start = 0.0;
  double end = 0.0;
  const ContinuousPiece* piece = nullptr;
  double shift = 0.0;

  bool isPlateau() const noexcept { return piece->isPlateau(); }
  double slopeAt(double t) const { return piece->slopeAt(t - shift); }
};

/// Left-continuous nondecreasing function g on a bounded working window,
/// assembled from continuous pieces and a jump rule.
///
/// Left continuity is structural: the gap of a jump at s contributes to g(t)
/// only for t > s, and is reported separately by jumpAt/rightLimit.
///
/// Immutable after construction; every query is const and thread-safe.
class Derivator {
 public:
  /// Pieces must tile [pieces.front().start, pieces.back().end) without gaps.
  explicit Derivator(std::vector<ContinuousPiece> pieces, JumpRule jumps = ExplicitJumps{},
                     Anchor anchor = {});

  /// Repeats `pattern` (local times tiling [0, period)) over [windowStart, windowEnd].
  static Derivator periodic(std::vector<ContinuousPiece> pattern, double period,
                            double windowStart, double windowEnd,
                            JumpRule jumps = ExplicitJumps{}, Anchor anchor = {});

  /// g(t) = t on [start, end].
  static Derivator identity(double start, double end);

  double windowStart() const noexcept { return windowStart_; }
  double windowEnd() const noexcept { return windowEnd_; }

  double eval(double t) const;
  double rightLimit(double t) const;
  double jumpAt(double t) const;
  double measureInterval(double a, double b) const;
  std::vector<JumpEvent> jumpsIn(double a, double b) const;
  PointKind classify(double t) const;

  /// g'(t) of the piece containing t (the piece to the right at boundaries).
  double slopeAt(double t) const;

  /// Splits [a, b) at piece boundaries and jump times.
  std::vector<Segment> segments(double a, double b) const;

  const std::vector<ContinuousPiece>& pieces() const noexcept { return pieces_; }
  std::optional<double> repeatPeriod() const noexcept { return period_; }
  const JumpRule& jumpRule() const noexcept { return jumps_; }

 private:
  Derivator() = default;
  void validateAndIndex();

  struct Located {
    std::size_t index;  // into pieces_
    double shift;       // absolute = local + shift
  };

  void requireInWindow(double t, const char* op) const;
  Located locate(double t) const;
  std::optional<Located> pieceEndingAt(double t) const;
  std::optional<Located> pieceStartingAt(double t) const;
  double continuousPart(double t) const;
  double jumpSumBefore(double t) const;
  double tolerance(double t) const noexcept;

  std::vector<ContinuousPiece> pieces_;
  std::optional<double> period_;
  double windowStart_ = 0.0;
  double windowEnd_ = 0.0;
  JumpRule jumps_;
  std::vector<double> starts_;      // local starts of pieces_
  std::vector<double> cumulative_;  // continuous increment from layout origin to piece start
  double periodIncrement_ = 0.0;
  std::vector<double> explicitPrefix_;  // prefix sums of explicit gaps
  double offset_ = 0.0;                 // anchor correction
};

}  // namespace stieltjes
