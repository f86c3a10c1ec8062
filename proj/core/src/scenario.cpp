#include "stieltjes/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "stieltjes/errors.hpp"
#include "stieltjes/parallel.hpp"

namespace stieltjes {

namespace {

using json = nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

// Strict accessors over a JSON object: every key must be known, every value
// must have the expected type.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError(join(path_, it.key()), "unknown key");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return join(path_, key); }

  double number(const char* key) const {
    if (!has(key)) throw ConfigError(path(key), "required");
    return asNumber(j_.at(key), path(key));
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::string string(const char* key) const {
    if (!has(key)) throw ConfigError(path(key), "required");
    return asString(j_.at(key), path(key));
  }
  std::string string(const char* key, const std::string& fallback) const { return has(key) ? string(key) : fallback; }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(path(key), "expected true or false");
    return j_.at(key).get<bool>();
  }

  std::vector<double> numbers(const char* key) const {
    if (!has(key)) return {};
    return asNumbers(j_.at(key), path(key));
  }

  std::vector<std::string> strings(const char* key) const {
    if (!has(key)) return {};
    const auto& a = j_.at(key);
    if (!a.is_array()) throw ConfigError(path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(asString(a[i], index(path(key), i)));
    return out;
  }

  std::vector<std::vector<double>> matrix(const char* key) const {
    if (!has(key)) return {};
    const auto& a = j_.at(key);
    if (!a.is_array()) throw ConfigError(path(key), "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(asNumbers(a[i], index(path(key), i)));
    return out;
  }

  static double asNumber(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }
  static std::string asString(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
  }
  static std::vector<double> asNumbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(asNumber(v[i], index(path, i)));
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

std::map<std::string, double> readParams(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object of numbers");
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = Obj::asNumber(it.value(), join(path, it.key()));
  return out;
}

PieceSpec readPiece(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(join(path, "kind"), "required");
  PieceSpec p;
  p.kind = Obj::asString(j.at("kind"), join(path, "kind"));
  if (p.kind == "linear") {
    Obj o(j, path, {"kind", "start", "end", "slope"});
    p.slope = o.number("slope", 1.0);
    p.start = o.number("start");
    p.end = o.number("end");
  } else if (p.kind == "plateau") {
    Obj o(j, path, {"kind", "start", "end"});
    p.start = o.number("start");
    p.end = o.number("end");
    p.slope = 0.0;
  } else if (p.kind == "smooth") {
    Obj o(j, path, {"kind", "start", "end", "value", "slope"});
    p.start = o.number("start");
    p.end = o.number("end");
    p.value = o.string("value");
    p.slopeExpr = o.string("slope");
    p.slope = 0.0;
  } else {
    throw ConfigError(join(path, "kind"), "expected linear, plateau or smooth, got '" + p.kind + "'");
  }
  return p;
}

JumpSpec readJumps(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(join(path, "kind"), "required");
  JumpSpec s;
  s.kind = Obj::asString(j.at("kind"), join(path, "kind"));
  if (s.kind == "none") {
    Obj o(j, path, {"kind"});
  } else if (s.kind == "list") {
    Obj o(j, path, {"kind", "events"});
    if (!o.has("events") || !o.raw("events").is_array()) throw ConfigError(o.path("events"), "expected an array");
    const auto& ev = o.raw("events");
    for (std::size_t i = 0; i < ev.size(); ++i) {
      Obj e(ev[i], index(o.path("events"), i), {"time", "gap"});
      s.events.push_back({e.number("time"), e.number("gap")});
    }
  } else if (s.kind == "periodic") {
    Obj o(j, path, {"kind", "period", "origin", "offsets", "gaps"});
    s.period = o.number("period");
    s.origin = o.number("origin", 0.0);
    s.offsets = o.numbers("offsets");
    s.gaps = o.numbers("gaps");
    if (s.offsets.empty()) throw ConfigError(o.path("offsets"), "required");
    if (s.gaps.size() == 1 && s.offsets.size() > 1) s.gaps.assign(s.offsets.size(), s.gaps[0]);
    if (s.gaps.size() != s.offsets.size()) throw ConfigError(o.path("gaps"), "need one gap per offset");
  } else {
    throw ConfigError(join(path, "kind"), "expected none, list or periodic, got '" + s.kind + "'");
  }
  return s;
}

DerivatorSpec readDerivator(const json& j, const std::string& path) {
  Obj o(j, path, {"window_start", "window_end", "repeat_period", "pieces", "jumps", "anchor"});
  DerivatorSpec d;
  d.windowStart = o.number("window_start");
  d.windowEnd = o.number("window_end");
  if (o.has("repeat_period")) d.repeatPeriod = o.number("repeat_period");
  if (!o.has("pieces") || !o.raw("pieces").is_array() || o.raw("pieces").empty()) {
    throw ConfigError(o.path("pieces"), "expected a nonempty array");
  }
  const auto& pieces = o.raw("pieces");
  for (std::size_t i = 0; i < pieces.size(); ++i) d.pieces.push_back(readPiece(pieces[i], index(o.path("pieces"), i)));
  if (o.has("jumps")) d.jumps = readJumps(o.raw("jumps"), o.path("jumps"));
  if (o.has("anchor")) {
    Obj a(o.raw("anchor"), o.path("anchor"), {"time", "value"});
    d.anchorTime = a.number("time", 0.0);
    d.anchorValue = a.number("value", 0.0);
  }
  return d;
}

SystemSpec readSystem(const json& j, const std::string& path) {
  Obj o(j, path, {"builtin", "params", "dimension", "continuous", "jump"});
  SystemSpec s;
  if (o.has("builtin")) {
    s.builtin = o.string("builtin");
    if (o.has("continuous") || o.has("jump") || o.has("dimension")) {
      throw ConfigError(path, "builtin systems take only 'params'");
    }
    if (o.has("params")) s.params = readParams(o.raw("params"), o.path("params"));
    s.dimension = builtinSystem(s.builtin).dimension;
  } else {
    if (o.has("params")) throw ConfigError(o.path("params"), "only builtin systems take params");
    s.continuous = o.strings("continuous");
    if (s.continuous.empty()) throw ConfigError(o.path("continuous"), "required");
    s.dimension = static_cast<std::size_t>(o.number("dimension", static_cast<double>(s.continuous.size())));
    s.jump = o.strings("jump");
  }
  return s;
}

DomainConfig readDomain(const json& j, const std::string& path) {
  Obj o(j, path, {"t0", "horizon", "center", "r0", "r", "blowup_threshold"});
  DomainConfig d;
  d.t0 = o.number("t0", 0.0);
  d.horizon = o.number("horizon");
  d.center = o.numbers("center");
  d.r0 = o.number("r0");
  d.r = o.number("r", d.r0);
  d.blowupThreshold = o.number("blowup_threshold", 1e8);
  return d;
}

InitialSpec readInitial(const json& j, const std::string& path) {
  Obj o(j, path, {"points", "radii", "rays"});
  InitialSpec s;
  s.points = o.matrix("points");
  s.radii = o.numbers("radii");
  s.rays = o.matrix("rays");
  return s;
}

CandidateSpec readCandidate(const json& j, const std::string& path) {
  Obj o(j, path,
        {"builtin", "params", "V", "V_plus", "grad", "partial_t", "lower", "upper", "rate", "weight", "weight_jump",
         "fd_gradient"});
  CandidateSpec c;
  if (o.has("builtin")) {
    c.builtin = o.string("builtin");
    for (const char* k : {"V", "V_plus", "grad", "partial_t", "lower", "upper", "rate", "weight", "weight_jump"}) {
      if (o.has(k)) throw ConfigError(o.path(k), "not allowed together with 'builtin'");
    }
    if (o.has("params")) c.params = readParams(o.raw("params"), o.path("params"));
    return c;
  }
  if (o.has("params")) throw ConfigError(o.path("params"), "only builtin candidates take params");
  c.V = o.string("V");
  c.VPlus = o.string("V_plus", "");
  c.grad = o.strings("grad");
  c.partialT = o.string("partial_t", "");
  c.lower = o.string("lower");
  c.upper = o.string("upper", "");
  c.rate = o.string("rate", "");
  c.weight = o.string("weight", "");
  c.weightJump = o.string("weight_jump", "");
  c.finiteDifferenceGradient = o.boolean("fd_gradient", false);
  return c;
}

StabilitySpec readStability(const json& j, const std::string& path) {
  Obj o(j, path, {"eps", "t0_grid", "probe_t0_grid", "warmup", "doublings", "annulus_inner", "sigma_radius"});
  StabilitySpec s;
  s.eps = o.numbers("eps");
  s.t0Grid = o.numbers("t0_grid");
  s.probeT0Grid = o.numbers("probe_t0_grid");
  s.warmup = o.number("warmup", 10.0);
  const double dbl = o.number("doublings", 12.0);
  if (dbl != std::floor(dbl) || dbl < 1 || dbl > 60) throw ConfigError(o.path("doublings"), "expected an integer in [1, 60]");
  s.doublings = static_cast<int>(dbl);
  if (o.has("annulus_inner")) s.annulusInner = o.number("annulus_inner");
  s.sigmaRadius = o.number("sigma_radius", 0.0);
  return s;
}

OutputSpec readOutput(const json& j, const std::string& path) {
  Obj o(j, path, {"directory", "emit_lyapunov"});
  OutputSpec s;
  s.directory = o.string("directory", "out");
  s.emitLyapunov = o.boolean("emit_lyapunov", true);
  return s;
}

json writeParams(const std::map<std::string, double>& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

json writePiece(const PieceSpec& p) {
  json j = {{"kind", p.kind}, {"start", p.start}, {"end", p.end}};
  if (p.kind == "linear") j["slope"] = p.slope;
  if (p.kind == "smooth") {
    j["value"] = p.value;
    j["slope"] = p.slopeExpr;
  }
  return j;
}

json writeJumps(const JumpSpec& s) {
  json j = {{"kind", s.kind}};
  if (s.kind == "list") {
    j["events"] = json::array();
    for (const auto& e : s.events) j["events"].push_back({{"time", e.time}, {"gap", e.gap}});
  } else if (s.kind == "periodic") {
    j["period"] = s.period;
    j["origin"] = s.origin;
    j["offsets"] = s.offsets;
    j["gaps"] = s.gaps;
  }
  return j;
}

// Compiles a time-only expression into a scalar map.
std::function<double(double)> timeFunction(const std::string& src, const std::string& path) {
  try {
    auto e = std::make_shared<Expr>(Expr::parse(src, 0));
    return [e](double t) { return e->eval(t, {}); };
  } catch (const ParseError& err) {
    throw ConfigError(path, err.what());
  }
}

std::function<double(double)> scalarFunction(const std::string& src, const std::string& path) {
  try {
    auto e = std::make_shared<Expr>(Expr::parseScalar(src));
    return [e](double s) { return (*e)(s); };
  } catch (const ParseError& err) {
    throw ConfigError(path, err.what());
  }
}

LyapunovCandidate::StateFn stateFunction(const std::string& src, std::size_t n, const std::string& path) {
  try {
    auto e = std::make_shared<Expr>(Expr::parse(src, n));
    return [e](double t, std::span<const double> x) { return e->eval(t, x); };
  } catch (const ParseError& err) {
    throw ConfigError(path, err.what());
  }
}

std::vector<double> unitRay(const std::vector<double>& ray, const std::string& path) {
  double m = 0.0;
  for (double v : ray) m = std::max(m, std::abs(v));
  if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError(path, "ray must be nonzero and finite");
  std::vector<double> u(ray);
  for (auto& v : u) v /= m;
  return u;
}

std::vector<std::vector<double>> initialStates(const ScenarioConfig& cfg, std::size_t n) {
  std::vector<double> center = cfg.domain.center.empty() ? std::vector<double>(n, 0.0) : cfg.domain.center;
  std::vector<std::vector<double>> out = cfg.initial.points;
  std::vector<std::vector<double>> rays;
  for (std::size_t i = 0; i < cfg.initial.rays.size(); ++i) {
    rays.push_back(unitRay(cfg.initial.rays[i], index("initial.rays", i)));
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
  for (double rad : cfg.initial.radii) {
    for (const auto& ray : rays) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = center[i] + rad * ray[i];
      out.push_back(std::move(x));
    }
  }
  return out;
}

std::string csvName(std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "trajectory_%03zu.csv", i);
  return buf;
}

}  // namespace

ScenarioConfig parseScenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  Obj o(j, "",
        {"name", "description", "derivator", "system", "domain", "initial", "step", "candidate", "stability",
         "output"});
  ScenarioConfig cfg;
  cfg.name = o.string("name");
  cfg.description = o.string("description", "");
  if (!o.has("derivator")) throw ConfigError("derivator", "required");
  cfg.derivator = readDerivator(o.raw("derivator"), "derivator");
  if (!o.has("system")) throw ConfigError("system", "required");
  cfg.system = readSystem(o.raw("system"), "system");
  if (!o.has("domain")) throw ConfigError("domain", "required");
  cfg.domain = readDomain(o.raw("domain"), "domain");
  if (o.has("initial")) cfg.initial = readInitial(o.raw("initial"), "initial");
  cfg.step = o.number("step", 1e-3);
  if (o.has("candidate")) cfg.candidate = readCandidate(o.raw("candidate"), "candidate");
  if (o.has("stability")) cfg.stability = readStability(o.raw("stability"), "stability");
  if (o.has("output")) cfg.output = readOutput(o.raw("output"), "output");
  validateScenario(cfg);
  return cfg;
}

std::string serializeScenario(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  if (!cfg.description.empty()) j["description"] = cfg.description;

  json d;
  d["window_start"] = cfg.derivator.windowStart;
  d["window_end"] = cfg.derivator.windowEnd;
  if (cfg.derivator.repeatPeriod) d["repeat_period"] = *cfg.derivator.repeatPeriod;
  d["pieces"] = json::array();
  for (const auto& p : cfg.derivator.pieces) d["pieces"].push_back(writePiece(p));
  d["jumps"] = writeJumps(cfg.derivator.jumps);
  d["anchor"] = {{"time", cfg.derivator.anchorTime}, {"value", cfg.derivator.anchorValue}};
  j["derivator"] = d;

  json s;
  if (!cfg.system.builtin.empty()) {
    s["builtin"] = cfg.system.builtin;
    if (!cfg.system.params.empty()) s["params"] = writeParams(cfg.system.params);
  } else {
    s["dimension"] = cfg.system.dimension;
    s["continuous"] = cfg.system.continuous;
    if (!cfg.system.jump.empty()) s["jump"] = cfg.system.jump;
  }
  j["system"] = s;

  j["domain"] = {{"t0", cfg.domain.t0},         {"horizon", cfg.domain.horizon}, {"center", cfg.domain.center},
                 {"r0", cfg.domain.r0},         {"r", cfg.domain.r},
                 {"blowup_threshold", cfg.domain.blowupThreshold}};

  json init = json::object();
  if (!cfg.initial.points.empty()) init["points"] = cfg.initial.points;
  if (!cfg.initial.radii.empty()) init["radii"] = cfg.initial.radii;
  if (!cfg.initial.rays.empty()) init["rays"] = cfg.initial.rays;
  j["initial"] = init;
  j["step"] = cfg.step;

  if (cfg.candidate) {
    const auto& c = *cfg.candidate;
    json cj;
    if (!c.builtin.empty()) {
      cj["builtin"] = c.builtin;
      if (!c.params.empty()) cj["params"] = writeParams(c.params);
    } else {
      cj["V"] = c.V;
      if (!c.VPlus.empty()) cj["V_plus"] = c.VPlus;
      if (!c.grad.empty()) cj["grad"] = c.grad;
      if (!c.partialT.empty()) cj["partial_t"] = c.partialT;
      cj["lower"] = c.lower;
      if (!c.upper.empty()) cj["upper"] = c.upper;
      if (!c.rate.empty()) cj["rate"] = c.rate;
      if (!c.weight.empty()) cj["weight"] = c.weight;
      if (!c.weightJump.empty()) cj["weight_jump"] = c.weightJump;
      if (c.finiteDifferenceGradient) cj["fd_gradient"] = true;
    }
    j["candidate"] = cj;
  }

  json st;
  if (!cfg.stability.eps.empty()) st["eps"] = cfg.stability.eps;
  if (!cfg.stability.t0Grid.empty()) st["t0_grid"] = cfg.stability.t0Grid;
  if (!cfg.stability.probeT0Grid.empty()) st["probe_t0_grid"] = cfg.stability.probeT0Grid;
  st["warmup"] = cfg.stability.warmup;
  st["doublings"] = cfg.stability.doublings;
  if (cfg.stability.annulusInner) st["annulus_inner"] = *cfg.stability.annulusInner;
  st["sigma_radius"] = cfg.stability.sigmaRadius;
  j["stability"] = st;

  j["output"] = {{"directory", cfg.output.directory}, {"emit_lyapunov", cfg.output.emitLyapunov}};
  return j.dump(2) + "\n";
}

ScenarioConfig loadScenario(const std::string& idOrPath) {
  if (isBuiltinScenario(idOrPath)) return builtinConfig(idOrPath);
  std::ifstream in(idOrPath, std::ios::binary);
  if (!in) throw ConfigError("", "no builtin scenario or readable file named '" + idOrPath + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseScenario(ss.str());
}

void validateScenario(const ScenarioConfig& cfg) {
  if (cfg.name.empty()) throw ConfigError("name", "must not be empty");
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) throw ConfigError("step", "must be > 0");

  const auto& sys = cfg.system;
  std::size_t n = sys.dimension;
  if (!sys.builtin.empty()) {
    if (!isBuiltinScenario(sys.builtin)) throw ConfigError("system.builtin", "unknown builtin '" + sys.builtin + "'");
    const auto defaults = builtinParams(sys.builtin);
    for (const auto& [k, v] : sys.params) {
      if (!defaults.count(k)) throw ConfigError("system.params." + k, "unknown parameter");
      if (!std::isfinite(v)) throw ConfigError("system.params." + k, "must be finite");
    }
    n = builtinSystem(sys.builtin).dimension;
    if (sys.dimension != n) throw ConfigError("system.dimension", "does not match the builtin system");
  } else {
    if (n == 0) throw ConfigError("system.dimension", "must be >= 1");
    if (sys.continuous.size() != n) {
      throw ConfigError("system.continuous", "expected " + std::to_string(n) + " expressions");
    }
    if (!sys.jump.empty() && sys.jump.size() != n) {
      throw ConfigError("system.jump", "expected " + std::to_string(n) + " expressions");
    }
  }

  const auto& dom = cfg.domain;
  if (!dom.center.empty() && dom.center.size() != n) {
    throw ConfigError("domain.center", "expected " + std::to_string(n) + " entries");
  }
  if (!(dom.t0 < dom.horizon)) throw ConfigError("domain.horizon", "must exceed t0");
  if (!(dom.r0 > 0.0)) throw ConfigError("domain.r0", "must be > 0");
  if (!(dom.r > 0.0) || dom.r > dom.r0) throw ConfigError("domain.r", "must satisfy 0 < r <= r0");
  if (!(dom.blowupThreshold > 0.0)) throw ConfigError("domain.blowup_threshold", "must be > 0");
  if (dom.t0 < cfg.derivator.windowStart || dom.horizon > cfg.derivator.windowEnd) {
    throw ConfigError("domain", "[t0, horizon] must lie inside the derivator window");
  }

  std::vector<double> center = dom.center.empty() ? std::vector<double>(n, 0.0) : dom.center;
  for (std::size_t i = 0; i < cfg.initial.points.size(); ++i) {
    const auto& p = cfg.initial.points[i];
    if (p.size() != n) throw ConfigError(index("initial.points", i), "expected " + std::to_string(n) + " entries");
    if (!(supDistance(p, center) < dom.r)) throw ConfigError(index("initial.points", i), "must lie within r of the center");
  }
  for (std::size_t i = 0; i < cfg.initial.rays.size(); ++i) {
    if (cfg.initial.rays[i].size() != n) {
      throw ConfigError(index("initial.rays", i), "expected " + std::to_string(n) + " entries");
    }
    unitRay(cfg.initial.rays[i], index("initial.rays", i));
  }
  for (std::size_t i = 0; i < cfg.initial.radii.size(); ++i) {
    const double r = cfg.initial.radii[i];
    if (!(r > 0.0 && r < dom.r)) throw ConfigError(index("initial.radii", i), "must lie in (0, r)");
  }

  if (cfg.candidate) {
    const auto& c = *cfg.candidate;
    if (!c.builtin.empty()) {
      if (!isBuiltinScenario(c.builtin)) throw ConfigError("candidate.builtin", "unknown builtin '" + c.builtin + "'");
      const auto defaults = builtinParams(c.builtin);
      for (const auto& [k, v] : c.params) {
        if (!defaults.count(k)) throw ConfigError("candidate.params." + k, "unknown parameter");
      }
      if (builtinSystem(c.builtin).dimension != n) throw ConfigError("candidate.builtin", "dimension mismatch");
    } else {
      if (!c.grad.empty() && c.grad.size() != n) {
        throw ConfigError("candidate.grad", "expected " + std::to_string(n) + " expressions");
      }
      if (c.grad.empty() && !c.finiteDifferenceGradient) {
        throw ConfigError("candidate.grad", "required unless fd_gradient is true");
      }
      if (!c.weightJump.empty() && c.weight.empty()) throw ConfigError("candidate.weight", "required with weight_jump");
    }
  }

  for (std::size_t i = 0; i < cfg.stability.eps.size(); ++i) {
    const double e = cfg.stability.eps[i];
    if (!(e > 0.0 && e <= dom.r0)) throw ConfigError(index("stability.eps", i), "must lie in (0, r0]");
  }
  if (!(cfg.stability.warmup > 0.0)) throw ConfigError("stability.warmup", "must be > 0");
  if (cfg.output.directory.empty()) throw ConfigError("output.directory", "must not be empty");

  // Compile everything once so expression and layout errors surface here.
  buildScenario(cfg);
}

Derivator buildDerivator(const DerivatorSpec& spec) {
  std::vector<ContinuousPiece> pieces;
  for (std::size_t i = 0; i < spec.pieces.size(); ++i) {
    const auto& p = spec.pieces[i];
    const std::string path = index("derivator.pieces", i);
    ContinuousPiece piece{p.start, p.end, Linear{p.slope}};
    if (p.kind == "plateau") {
      piece.profile = Plateau{};
    } else if (p.kind == "smooth") {
      piece.profile = Smooth{timeFunction(p.value, join(path, "value")), timeFunction(p.slopeExpr, join(path, "slope"))};
    } else if (p.kind != "linear") {
      throw ConfigError(join(path, "kind"), "unknown piece kind '" + p.kind + "'");
    }
    pieces.push_back(std::move(piece));
  }
  JumpRule jumps = ExplicitJumps{};
  if (spec.jumps.kind == "list") {
    jumps = ExplicitJumps{spec.jumps.events};
  } else if (spec.jumps.kind == "periodic") {
    jumps = PeriodicJumps{spec.jumps.period, spec.jumps.origin, spec.jumps.offsets, spec.jumps.gaps};
  } else if (spec.jumps.kind != "none") {
    throw ConfigError("derivator.jumps.kind", "unknown jump kind '" + spec.jumps.kind + "'");
  }
  try {
    const Anchor anchor{spec.anchorTime, spec.anchorValue};
    if (spec.repeatPeriod) {
      return Derivator::periodic(std::move(pieces), *spec.repeatPeriod, spec.windowStart, spec.windowEnd,
                                 std::move(jumps), anchor);
    }
    if (pieces.empty()) throw ConfigError("derivator.pieces", "expected a nonempty array");
    if (pieces.front().start != spec.windowStart || pieces.back().end != spec.windowEnd) {
      throw ConfigError("derivator.pieces", "pieces must cover [window_start, window_end] exactly");
    }
    return Derivator(std::move(pieces), std::move(jumps), anchor);
  } catch (const ArgumentError& e) {
    throw ConfigError("derivator", e.what());
  } catch (const DomainError& e) {
    throw ConfigError("derivator.anchor", e.what());
  }
}

VectorField buildSystem(const SystemSpec& spec) {
  if (!spec.builtin.empty()) return builtinSystem(spec.builtin, spec.params);
  const std::size_t n = spec.dimension;
  auto compile = [n](const std::vector<std::string>& src, const std::string& path) {
    auto exprs = std::make_shared<std::vector<Expr>>();
    for (std::size_t i = 0; i < src.size(); ++i) {
      try {
        exprs->push_back(Expr::parse(src[i], n));
      } catch (const ParseError& e) {
        throw ConfigError(index(path, i), e.what());
      }
    }
    return VectorField::Map([exprs](double t, std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < exprs->size(); ++i) out[i] = (*exprs)[i].eval(t, x);
    });
  };
  VectorField f;
  f.dimension = n;
  f.continuous = compile(spec.continuous, "system.continuous");
  if (!spec.jump.empty()) f.jump = compile(spec.jump, "system.jump");
  return f;
}

TwoBranchScalar buildTimeFunction(const std::string& continuous, const std::string& jump) {
  TwoBranchScalar s;
  s.continuous = timeFunction(continuous, "expr");
  if (!jump.empty()) s.jump = timeFunction(jump, "jump_expr");
  return s;
}

LyapunovCandidate buildCandidate(const CandidateSpec& spec, std::size_t n) {
  if (!spec.builtin.empty()) return builtinCandidate(spec.builtin, spec.params);
  LyapunovCandidate c;
  c.value = stateFunction(spec.V, n, "candidate.V");
  if (!spec.VPlus.empty()) c.valueAfterJump = stateFunction(spec.VPlus, n, "candidate.V_plus");
  if (!spec.grad.empty()) {
    auto g = std::make_shared<std::vector<Expr>>();
    for (std::size_t i = 0; i < spec.grad.size(); ++i) {
      try {
        g->push_back(Expr::parse(spec.grad[i], n));
      } catch (const ParseError& e) {
        throw ConfigError(index("candidate.grad", i), e.what());
      }
    }
    c.gradX = [g](double t, std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < g->size(); ++i) out[i] = (*g)[i].eval(t, x);
    };
  }
  c.finiteDifferenceGradient = spec.finiteDifferenceGradient;
  if (!spec.partialT.empty()) c.partialGT = stateFunction(spec.partialT, n, "candidate.partial_t");
  c.lowerEnv = {spec.lower, scalarFunction(spec.lower, "candidate.lower")};
  if (!spec.upper.empty()) c.upperEnv = ClassKFn{spec.upper, scalarFunction(spec.upper, "candidate.upper")};
  if (!spec.rate.empty()) c.rate = ClassKFn{spec.rate, scalarFunction(spec.rate, "candidate.rate")};
  if (!spec.weight.empty()) {
    TwoBranchScalar w;
    w.continuous = timeFunction(spec.weight, "candidate.weight");
    if (!spec.weightJump.empty()) w.jump = timeFunction(spec.weightJump, "candidate.weight_jump");
    c.weight = std::move(w);
  }
  return c;
}

Scenario buildScenario(const ScenarioConfig& cfg) {
  auto derivator = buildDerivator(cfg.derivator);
  auto field = buildSystem(cfg.system);
  const std::size_t n = field.dimension;
  DomainSpec dom;
  dom.t0 = cfg.domain.t0;
  dom.horizon = cfg.domain.horizon;
  dom.center = cfg.domain.center.empty() ? std::vector<double>(n, 0.0) : cfg.domain.center;
  dom.r0 = cfg.domain.r0;
  dom.r = cfg.domain.r;
  dom.blowupThreshold = cfg.domain.blowupThreshold;
  std::optional<LyapunovCandidate> cand;
  if (cfg.candidate) cand = buildCandidate(*cfg.candidate, n);
  return Scenario{cfg, std::move(derivator), std::move(field), std::move(dom), initialStates(cfg, n), std::move(cand)};
}

TrajectoryGrid Scenario::trajectoryGrid() const {
  TrajectoryGrid g;
  g.t0s = config.stability.t0Grid.empty() ? std::vector<double>{domain.t0} : config.stability.t0Grid;
  g.states = initialStates;
  g.step = config.step;
  g.span = domain.horizon - domain.t0;
  return g;
}

DivergenceProbe Scenario::divergenceProbe() const {
  DivergenceProbe p;
  p.warmup = config.stability.warmup;
  p.doublings = config.stability.doublings;
  p.t0Grid = config.stability.probeT0Grid;
  p.annulusInner = config.stability.annulusInner;
  return p;
}

std::string trajectoryCsv(const Trajectory& traj, const Derivator& d, const VectorField& f,
                          const LyapunovCandidate* cand) {
  const std::size_t n = traj.dimension;
  std::string out = "t,g";
  for (std::size_t i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  for (std::size_t i = 1; i <= n; ++i) out += ",x" + std::to_string(i) + "_plus";
  if (cand) out += ",V,dV_g";
  out += '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    put(t);
    out += ',';
    put(traj.gValues[k]);
    for (double v : traj.xLeft(k)) {
      out += ',';
      put(v);
    }
    for (double v : traj.xRight(k)) {
      out += ',';
      put(v);
    }
    if (cand) {
      const auto xl = traj.xLeft(k);
      const double v = cand->at(t, xl);
      double dv;
      if (traj.isJump(k)) {
        dv = (cand->afterJump(t, traj.xRight(k)) - v) / d.jumpAt(t);
      } else if (d.classify(t) == PointKind::PlateauInterior) {
        dv = std::nan("");
      } else {
        dv = vDotAlong(d, f, *cand, t, xl);
      }
      out += ',';
      put(v);
      out += ',';
      put(dv);
    }
    out += '\n';
  }
  return out;
}

RunArtifacts runScenario(const ScenarioConfig& cfg) {
  const auto sc = buildScenario(cfg);
  namespace fs = std::filesystem;
  RunArtifacts art;
  art.directory = cfg.output.directory;
  fs::create_directories(art.directory);

  const LyapunovCandidate* cand = sc.candidate && cfg.output.emitLyapunov ? &*sc.candidate : nullptr;
  const std::size_t count = sc.initialStates.size();
  std::vector<std::string> csv(count);
  art.trajectories.resize(count);
  parallelFor(count, [&](std::size_t i) {
    auto& o = art.trajectories[i];
    o.x0 = sc.initialStates[i];
    try {
      const auto traj = solveIVP(sc.derivator, sc.field, sc.domain, o.x0, cfg.step);
      o.termination = traj.termination;
      o.omega = traj.omega;
      o.samples = traj.size();
      csv[i] = trajectoryCsv(traj, sc.derivator, sc.field, cand);
    } catch (const Error& e) {
      o.error = e.what();
      csv[i].clear();
    }
  });

  for (std::size_t i = 0; i < count; ++i) {
    auto& o = art.trajectories[i];
    if (!o.error.empty()) continue;
    o.csvFile = csvName(i);
    std::ofstream f(fs::path(art.directory) / o.csvFile, std::ios::binary);
    f << csv[i];
  }

  std::string certError;
  if (sc.candidate && count > 0) {
    try {
      art.certificate = checkDecayCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, sc.trajectoryGrid());
    } catch (const Error& e) {
      certError = e.what();
    }
  }

  std::ostringstream s;
  s << "scenario=" << cfg.name << '\n';
  s << "step=" << num(cfg.step) << '\n';
  s << "t0=" << num(sc.domain.t0) << '\n';
  s << "horizon=" << num(sc.domain.horizon) << '\n';
  s << "trajectories=" << count << '\n';
  for (std::size_t i = 0; i < count; ++i) {
    const auto& o = art.trajectories[i];
    const std::string k = "trajectory." + std::to_string(i);
    s << k << ".x0=";
    for (std::size_t j = 0; j < o.x0.size(); ++j) s << (j ? ";" : "") << num(o.x0[j]);
    s << '\n';
    if (o.error.empty()) {
      s << k << ".termination=" << toString(*o.termination) << '\n';
      s << k << ".omega=" << num(o.omega) << '\n';
      s << k << ".samples=" << o.samples << '\n';
      s << k << ".csv=" << o.csvFile << '\n';
    } else {
      s << k << ".error=" << o.error << '\n';
    }
  }
  if (art.certificate) {
    std::istringstream lines(art.certificate->keyValue());
    for (std::string line; std::getline(lines, line);) s << "certificate." << line << '\n';
  } else if (!certError.empty()) {
    s << "certificate.error=" << certError << '\n';
  }
  art.summaryFile = (fs::path(art.directory) / "summary.txt").string();
  std::ofstream f(art.summaryFile, std::ios::binary);
  f << s.str();
  return art;
}

}  // namespace stieltjes
