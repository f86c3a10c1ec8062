#include "stieltjes/derivator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "stieltjes/errors.hpp"

namespace stieltjes {

namespace {

// Number of probes used to sanity-check a Smooth profile for monotonicity.
constexpr int kSmoothProbes = 17;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* toString(PointKind kind) noexcept {
  switch (kind) {
    case PointKind::ContinuityPoint: return "ContinuityPoint";
    case PointKind::JumpPoint: return "JumpPoint";
    case PointKind::PlateauInterior: return "PlateauInterior";
    case PointKind::PlateauEndpoint: return "PlateauEndpoint";
  }
  return "?";
}

double ContinuousPiece::slopeAt(double t) const {
  return std::visit(Overloaded{
                        [](const Linear& l) { return l.slope; },
                        [](const Plateau&) { return 0.0; },
                        [t](const Smooth& s) { return s.slope(t); },
                    },
                    profile);
}

double ContinuousPiece::increment(double from, double to) const {
  return std::visit(Overloaded{
                        [&](const Linear& l) { return l.slope * (to - from); },
                        [](const Plateau&) { return 0.0; },
                        [&](const Smooth& s) { return from == to ? 0.0 : s.value(to) - s.value(from); },
                    },
                    profile);
}

Derivator::Derivator(std::vector<ContinuousPiece> pieces, JumpRule jumps, Anchor anchor)
    : pieces_(std::move(pieces)), jumps_(std::move(jumps)) {
  if (pieces_.empty()) throw ArgumentError("derivator needs at least one piece");
  windowStart_ = pieces_.front().start;
  windowEnd_ = pieces_.back().end;
  validateAndIndex();
  requireInWindow(anchor.time, "anchor");
  offset_ = anchor.value - (continuousPart(anchor.time) + jumpSumBefore(anchor.time));
}

Derivator Derivator::periodic(std::vector<ContinuousPiece> pattern, double period,
                              double windowStart, double windowEnd, JumpRule jumps,
                              Anchor anchor) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ArgumentError("repeat period must be > 0");
  if (pattern.empty()) throw ArgumentError("repeating layout needs at least one piece");
  if (pattern.front().start != 0.0 || std::abs(pattern.back().end - period) > 1e-12 * period) {
    throw ArgumentError("repeating pattern must tile [0, period)");
  }
  pattern.back().end = period;
  if (!(windowStart < windowEnd)) throw ArgumentError("window must satisfy start < end");
  Derivator d;
  d.pieces_ = std::move(pattern);
  d.period_ = period;
  d.windowStart_ = windowStart;
  d.windowEnd_ = windowEnd;
  d.jumps_ = std::move(jumps);
  d.validateAndIndex();
  d.requireInWindow(anchor.time, "anchor");
  d.offset_ = anchor.value - (d.continuousPart(anchor.time) + d.jumpSumBefore(anchor.time));
  return d;
}

Derivator Derivator::identity(double start, double end) {
  const double at = std::clamp(0.0, start, end);
  return Derivator({ContinuousPiece{start, end, Linear{1.0}}}, ExplicitJumps{}, Anchor{at, at});
}

void Derivator::validateAndIndex() {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    auto& p = pieces_[i];
    if (!std::isfinite(p.start) || !std::isfinite(p.end) || !(p.start < p.end)) {
      throw ArgumentError("piece " + std::to_string(i) + " must satisfy start < end");
    }
    if (i > 0) {
      const double prevEnd = pieces_[i - 1].end;
      if (std::abs(prevEnd - p.start) > tolerance(p.start)) {
        throw ArgumentError("pieces leave a gap or overlap at " + num(p.start));
      }
      p.start = prevEnd;
    }
    if (auto* lin = std::get_if<Linear>(&p.profile)) {
      if (!(lin->slope >= 0.0) || !std::isfinite(lin->slope)) {
        throw ArgumentError("piece " + std::to_string(i) + " has negative slope");
      }
      if (lin->slope == 0.0) p.profile = Plateau{};
    } else if (auto* sm = std::get_if<Smooth>(&p.profile)) {
      if (!sm->value || !sm->slope) {
        throw ArgumentError("smooth piece " + std::to_string(i) + " needs value and slope maps");
      }
      double prev = sm->value(p.start);
      for (int k = 0; k <= kSmoothProbes; ++k) {
        const double t = p.start + (p.end - p.start) * k / kSmoothProbes;
        const double s = sm->slope(t);
        const double v = sm->value(t);
        if (!std::isfinite(s) || !std::isfinite(v) || s < -1e-12 || v < prev - 1e-12 * (1 + std::abs(prev))) {
          throw ArgumentError("smooth piece " + std::to_string(i) + " is not nondecreasing near t=" + num(t));
        }
        prev = v;
      }
    }
  }

  starts_.clear();
  cumulative_.clear();
  double acc = 0.0;
  for (const auto& p : pieces_) {
    starts_.push_back(p.start);
    cumulative_.push_back(acc);
    acc += p.increment(p.start, p.end);
  }
  periodIncrement_ = acc;

  std::visit(Overloaded{
                 [this](ExplicitJumps& e) {
                   std::sort(e.events.begin(), e.events.end(),
                             [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
                   explicitPrefix_.assign(1, 0.0);
                   for (std::size_t i = 0; i < e.events.size(); ++i) {
                     const auto& ev = e.events[i];
                     if (!std::isfinite(ev.time) || !(ev.gap > 0.0) || !std::isfinite(ev.gap)) {
                       throw ArgumentError("jump at " + num(ev.time) + " must have a finite gap > 0");
                     }
                     if (i > 0 && ev.time - e.events[i - 1].time <= tolerance(ev.time)) {
                       throw ArgumentError("duplicate jump time " + num(ev.time));
                     }
                     explicitPrefix_.push_back(explicitPrefix_.back() + ev.gap);
                   }
                 },
                 [](PeriodicJumps& pj) {
                   if (!(pj.period > 0.0) || !std::isfinite(pj.period)) {
                     throw ArgumentError("jump period must be > 0");
                   }
                   if (pj.offsets.size() != pj.gaps.size() || pj.offsets.empty()) {
                     throw ArgumentError("periodic jumps need one gap per offset");
                   }
                   std::vector<std::size_t> order(pj.offsets.size());
                   for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                   std::sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return pj.offsets[a] < pj.offsets[b]; });
                   std::vector<double> offs, gaps;
                   for (auto i : order) {
                     if (!(pj.offsets[i] >= 0.0 && pj.offsets[i] < pj.period)) {
                       throw ArgumentError("jump offset " + num(pj.offsets[i]) + " outside [0, period)");
                     }
                     if (!(pj.gaps[i] > 0.0) || !std::isfinite(pj.gaps[i])) {
                       throw ArgumentError("periodic jump gaps must be finite and > 0");
                     }
                     if (!offs.empty() && pj.offsets[i] == offs.back()) {
                       throw ArgumentError("duplicate jump offset " + num(pj.offsets[i]));
                     }
                     offs.push_back(pj.offsets[i]);
                     gaps.push_back(pj.gaps[i]);
                   }
                   pj.offsets = std::move(offs);
                   pj.gaps = std::move(gaps);
                 },
             },
             jumps_);
}

double Derivator::tolerance(double t) const noexcept { return 1e-12 * std::max(1.0, std::abs(t)); }

void Derivator::requireInWindow(double t, const char* op) const {
  if (!(t >= windowStart_ && t <= windowEnd_)) {
    throw DomainError(std::string(op) + ": t=" + num(t) + " outside window [" + num(windowStart_) + ", " +
                          num(windowEnd_) + "]",
                      t);
  }
}

Derivator::Located Derivator::locate(double t) const {
  double local = t;
  double shift = 0.0;
  if (period_) {
    const double P = *period_;
    double k = std::floor((t - windowStart_) / P);
    local = t - windowStart_ - k * P;
    if (local >= P) {
      k += 1;
      local -= P;
    } else if (local < 0.0) {
      k -= 1;
      local += P;
    }
    shift = windowStart_ + k * P;
  }
  auto it = std::upper_bound(starts_.begin(), starts_.end(), local);
  std::size_t idx = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  return {idx, shift};
}

double Derivator::continuousPart(double t) const {
  const auto loc = locate(t);
  const auto& p = pieces_[loc.index];
  double base = cumulative_[loc.index];
  if (period_) base += std::round((loc.shift - windowStart_) / *period_) * periodIncrement_;
  return base + p.increment(p.start, t - loc.shift);
}

double Derivator::jumpSumBefore(double t) const {
  const double cut = t - tolerance(t);
  return std::visit(
      Overloaded{
          [&](const ExplicitJumps& e) {
            auto it = std::lower_bound(e.events.begin(), e.events.end(), cut,
                                       [](const JumpEvent& ev, double v) { return ev.time < v; });
            return explicitPrefix_[static_cast<std::size_t>(it - e.events.begin())];
          },
          [&](const PeriodicJumps& pj) {
            double sum = 0.0;
            for (std::size_t i = 0; i < pj.offsets.size(); ++i) {
              const double base = pj.origin + pj.offsets[i];
              if (cut <= base) continue;
              // events base + k*period < cut for k = 0..n-1
              double n = std::ceil((cut - base) / pj.period);
              while (n > 0 && base + (n - 1) * pj.period >= cut) n -= 1;
              while (base + n * pj.period < cut) n += 1;
              sum += n * pj.gaps[i];
            }
            return sum;
          },
      },
      jumps_);
}

double Derivator::eval(double t) const {
  requireInWindow(t, "eval");
  return offset_ + continuousPart(t) + jumpSumBefore(t);
}

double Derivator::rightLimit(double t) const {
  requireInWindow(t, "rightLimit");
  return eval(t) + jumpAt(t);
}

double Derivator::jumpAt(double t) const {
  requireInWindow(t, "jumpAt");
  const double tol = tolerance(t);
  return std::visit(
      Overloaded{
          [&](const ExplicitJumps& e) {
            auto it = std::lower_bound(e.events.begin(), e.events.end(), t - tol,
                                       [](const JumpEvent& ev, double v) { return ev.time < v; });
            if (it != e.events.end() && std::abs(it->time - t) <= tol) return it->gap;
            return 0.0;
          },
          [&](const PeriodicJumps& pj) {
            for (std::size_t i = 0; i < pj.offsets.size(); ++i) {
              const double base = pj.origin + pj.offsets[i];
              const double k = std::round((t - base) / pj.period);
              if (k >= 0 && std::abs(base + k * pj.period - t) <= tol) return pj.gaps[i];
            }
            return 0.0;
          },
      },
      jumps_);
}

double Derivator::measureInterval(double a, double b) const {
  if (a > b) throw ArgumentError("measureInterval: a=" + num(a) + " > b=" + num(b));
  if (a == b) {
    requireInWindow(a, "measureInterval");
    return 0.0;
  }
  return eval(b) - eval(a);
}

std::vector<JumpEvent> Derivator::jumpsIn(double a, double b) const {
  if (a > b) throw ArgumentError("jumpsIn: a=" + num(a) + " > b=" + num(b));
  requireInWindow(a, "jumpsIn");
  requireInWindow(b, "jumpsIn");
  std::vector<JumpEvent> out;
  if (a == b) return out;
  const double lo = a - tolerance(a);
  const double hi = b - tolerance(b);
  std::visit(Overloaded{
                 [&](const ExplicitJumps& e) {
                   auto it = std::lower_bound(e.events.begin(), e.events.end(), lo,
                                              [](const JumpEvent& ev, double v) { return ev.time < v; });
                   for (; it != e.events.end() && it->time < hi; ++it) out.push_back(*it);
                 },
                 [&](const PeriodicJumps& pj) {
                   for (std::size_t i = 0; i < pj.offsets.size(); ++i) {
                     const double base = pj.origin + pj.offsets[i];
                     double k = std::max(0.0, std::ceil((lo - base) / pj.period));
                     while (k > 0 && base + (k - 1) * pj.period >= lo) k -= 1;
                     while (base + k * pj.period < lo) k += 1;
                     for (double time = base + k * pj.period; time < hi; k += 1, time = base + k * pj.period) {
                       out.push_back({time, pj.gaps[i]});
                     }
                   }
                   if (pj.offsets.size() > 1) {
                     std::sort(out.begin(), out.end(),
                               [](const JumpEvent& x, const JumpEvent& y) { return x.time < y.time; });
                   }
                 },
             },
             jumps_);
  return out;
}

std::optional<Derivator::Located> Derivator::pieceEndingAt(double t) const {
  if (t <= windowStart_ + tolerance(t)) return std::nullopt;
  auto loc = locate(t);
  const auto& p = pieces_[loc.index];
  if (std::abs(p.end + loc.shift - t) <= tolerance(t)) return loc;
  if (std::abs(p.start + loc.shift - t) <= tolerance(t)) {
    if (loc.index > 0) return Located{loc.index - 1, loc.shift};
    if (period_) return Located{pieces_.size() - 1, loc.shift - *period_};
  }
  return std::nullopt;
}

std::optional<Derivator::Located> Derivator::pieceStartingAt(double t) const {
  if (t >= windowEnd_ - tolerance(t)) return std::nullopt;
  auto loc = locate(t);
  const auto& p = pieces_[loc.index];
  if (std::abs(p.start + loc.shift - t) <= tolerance(t)) return loc;
  if (std::abs(p.end + loc.shift - t) <= tolerance(t)) {
    if (loc.index + 1 < pieces_.size()) return Located{loc.index + 1, loc.shift};
    if (period_) return Located{0, loc.shift + *period_};
  }
  return std::nullopt;
}

PointKind Derivator::classify(double t) const {
  requireInWindow(t, "classify");
  if (jumpAt(t) > 0.0) return PointKind::JumpPoint;
  const auto left = pieceEndingAt(t);
  const auto right = pieceStartingAt(t);
  const bool atStart = t <= windowStart_ + tolerance(t);
  const bool atEnd = t >= windowEnd_ - tolerance(t);
  if (!left && !right && !atStart && !atEnd) {
    return pieces_[locate(t).index].isPlateau() ? PointKind::PlateauInterior : PointKind::ContinuityPoint;
  }
  const bool leftPlateau = left ? pieces_[left->index].isPlateau()
                                : (atEnd && pieces_[locate(t).index].isPlateau());
  const bool rightPlateau = right ? pieces_[right->index].isPlateau()
                                  : (atStart && pieces_[locate(t).index].isPlateau());
  if (left && right && leftPlateau && rightPlateau) return PointKind::PlateauInterior;
  if (leftPlateau || rightPlateau) return PointKind::PlateauEndpoint;
  return PointKind::ContinuityPoint;
}

double Derivator::slopeAt(double t) const {
  requireInWindow(t, "slopeAt");
  const auto loc = locate(t);
  return pieces_[loc.index].slopeAt(t - loc.shift);
}

std::vector<Segment> Derivator::segments(double a, double b) const {
  if (a > b) throw ArgumentError("segments: a=" + num(a) + " > b=" + num(b));
  requireInWindow(a, "segments");
  requireInWindow(b, "segments");
  std::vector<Segment> out;
  if (a == b) return out;

  const auto jumps = jumpsIn(a, b);
  auto nextJump = jumps.begin();
  if (nextJump != jumps.end() && std::abs(nextJump->time - a) <= tolerance(a)) ++nextJump;

  auto loc = locate(a);
  double t = a;
  while (t < b) {
    const auto& p = pieces_[loc.index];
    const double pieceEnd = std::min(p.end + loc.shift, b);
    while (t < pieceEnd) {
      double end = pieceEnd;
      if (nextJump != jumps.end() && nextJump->time < pieceEnd - tolerance(pieceEnd)) end = nextJump->time;
      if (end > t) out.push_back({t, end, &p, loc.shift});
      if (end < pieceEnd) ++nextJump;
      t = end;
    }
    // skip jumps sitting exactly on the boundary just crossed
    while (nextJump != jumps.end() && nextJump->time <= t + tolerance(t)) ++nextJump;
    if (loc.index + 1 < pieces_.size()) {
      ++loc.index;
    } else if (period_) {
      loc.index = 0;
      loc.shift += *period_;
    } else {
      break;
    }
    t = std::max(t, pieces_[loc.index].start + loc.shift);
  }
  return out;
}

}  // namespace stieltjes
