// stieltjes: simulate and check scenarios from the command line.
//
//   stieltjes list-scenarios
//   stieltjes simulate <id|path> [--step H] [--horizon T] [--out DIR] [--x0 ...]
//   stieltjes check-stability <id|path> [--eps L] [--t0-grid G] [--horizon T] [--out DIR]
//   stieltjes integrate <id|path> --expr E [--jump-expr E] --from A --to B
//   stieltjes gexp <id|path> --p E [--p-jump E] --from A --to B
//
// Exit status: 0 ok, 2 bad input (config, expression, arguments), 3 numeric failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stieltjes/errors.hpp"
#include "stieltjes/gcalc.hpp"
#include "stieltjes/lyapunov.hpp"
#include "stieltjes/scenario.hpp"

namespace {

using namespace stieltjes;

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int listScenarios() {
  for (const auto& b : builtinScenarios()) std::cout << b.id << "  " << b.description << '\n';
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  std::optional<double> step;
  std::optional<double> horizon;
  std::string out;
  std::vector<double> x0;
};

int simulate(const SimulateArgs& a) {
  auto cfg = loadScenario(a.scenario);
  if (a.step) cfg.step = *a.step;
  if (a.horizon) cfg.domain.horizon = *a.horizon;
  if (!a.out.empty()) cfg.output.directory = a.out;
  if (!a.x0.empty()) {
    const std::size_t n = cfg.system.dimension;
    if (a.x0.size() % n != 0) throw ArgumentError("--x0 needs a multiple of " + std::to_string(n) + " values");
    cfg.initial = {};
    for (std::size_t i = 0; i < a.x0.size(); i += n) cfg.initial.points.emplace_back(a.x0.begin() + i, a.x0.begin() + i + n);
  }
  validateScenario(cfg);
  const auto art = runScenario(cfg);
  int failed = 0;
  for (std::size_t i = 0; i < art.trajectories.size(); ++i) {
    const auto& t = art.trajectories[i];
    std::cout << "trajectory " << i << ": ";
    if (t.error.empty()) {
      std::cout << toString(*t.termination) << " at t=" << fmt(t.omega, "%.6g") << " -> " << t.csvFile << '\n';
    } else {
      std::cout << "error: " << t.error << '\n';
      ++failed;
    }
  }
  if (art.certificate) std::cout << "certificate: " << toString(art.certificate->verdict) << '\n';
  std::cout << "summary: " << art.summaryFile << '\n';
  return failed == 0 ? 0 : 3;
}

struct StabilityArgs {
  std::string scenario;
  std::vector<double> eps;
  std::vector<double> t0Grid;
  std::optional<double> horizon;
  std::string out;
};

int checkStability(const StabilityArgs& a) {
  auto cfg = loadScenario(a.scenario);
  if (!a.eps.empty()) cfg.stability.eps = a.eps;
  if (!a.t0Grid.empty()) cfg.stability.t0Grid = a.t0Grid;
  if (a.horizon) cfg.domain.horizon = *a.horizon;
  if (!a.out.empty()) cfg.output.directory = a.out;
  validateScenario(cfg);
  const auto sc = buildScenario(cfg);
  if (!sc.candidate) throw ConfigError("candidate", "check-stability needs a Lyapunov candidate");

  const auto grid = sc.trajectoryGrid();
  const bool asymptotic = sc.candidate->rate && sc.candidate->weight;
  const auto report = asymptotic ? checkAsymptoticCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, grid,
                                                              sc.divergenceProbe())
                                 : checkDecayCertificate(sc.derivator, sc.field, sc.domain, *sc.candidate, grid);
  std::cout << report.table();

  std::string kv = "scenario=" + cfg.name + "\n" + report.keyValue();
  if (!cfg.stability.eps.empty()) {
    StabilityProbeOptions opts;
    opts.eps = cfg.stability.eps;
    opts.t0s = grid.t0s;
    opts.step = cfg.step;
    opts.sigmaRadius = cfg.stability.sigmaRadius;
    const auto probe = empiricalStabilityProbe(sc.derivator, sc.field, sc.domain, opts);
    std::cout << "\neps        t0         delta      sigma\n";
    for (std::size_t i = 0; i < probe.rows.size(); ++i) {
      const auto& r = probe.rows[i];
      const std::string delta = r.deltaResolved ? fmt(r.delta, "%.4g")
                                                : "[" + fmt(r.delta, "%.4g") + ", " + fmt(r.deltaUpper, "%.4g") + ")";
      const std::string sigma = r.sigma ? fmt(*r.sigma, "%.4g") : "none";
      std::printf("%-10.4g %-10.4g %-10s %s\n", r.eps, r.t0, delta.c_str(), sigma.c_str());
      const std::string k = "probe." + std::to_string(i);
      kv += k + ".eps=" + fmt(r.eps) + "\n" + k + ".t0=" + fmt(r.t0) + "\n" + k + ".delta=" + fmt(r.delta) + "\n" +
            k + ".delta_upper=" + fmt(r.deltaUpper) + "\n" + k + ".delta_resolved=" + (r.deltaResolved ? "1" : "0") +
            "\n" + k + ".sigma=" + (r.sigma ? fmt(*r.sigma) : "none") + "\n";
    }
    for (const auto& s : probe.spreads) {
      std::cout << "spread eps=" << fmt(s.eps, "%.4g") << ": delta " << fmt(s.deltaSpread, "%.4g") << ", sigma "
                << (s.sigmaSpread ? fmt(*s.sigmaSpread, "%.4g") : "n/a") << '\n';
    }
  }
  std::filesystem::create_directories(cfg.output.directory);
  const auto path = std::filesystem::path(cfg.output.directory) / "stability.txt";
  std::ofstream(path, std::ios::binary) << kv;
  std::cout << "report: " << path.string() << '\n';
  return 0;
}

struct IntegralArgs {
  std::string scenario;
  std::string expr;
  std::string jumpExpr;
  double from = 0.0;
  double to = 0.0;
};

int integrate(const IntegralArgs& a) {
  const auto cfg = loadScenario(a.scenario);
  const auto d = buildDerivator(cfg.derivator);
  const auto h = buildTimeFunction(a.expr, a.jumpExpr);
  std::cout << fmt(lsIntegrate(d, h, a.from, a.to), "%.15g") << '\n';
  return 0;
}

int gexp(const IntegralArgs& a) {
  const auto cfg = loadScenario(a.scenario);
  const auto d = buildDerivator(cfg.derivator);
  const auto p = buildTimeFunction(a.expr, a.jumpExpr);
  std::cout << fmt(gExp(d, p, a.from, a.to), "%.15g") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and certify systems driven by Stieltjes derivatives"};
  app.require_subcommand(1);

  app.add_subcommand("list-scenarios", "List builtin scenarios");

  SimulateArgs sim;
  auto* simCmd = app.add_subcommand("simulate", "Simulate every initial condition and write CSV files");
  simCmd->add_option("scenario", sim.scenario, "Builtin id or JSON file")->required();
  simCmd->add_option("--step", sim.step, "Solver step");
  simCmd->add_option("--horizon", sim.horizon, "Final time");
  simCmd->add_option("--out", sim.out, "Output directory");
  simCmd->add_option("--x0", sim.x0, "Initial states, flattened");

  StabilityArgs stab;
  auto* stabCmd = app.add_subcommand("check-stability", "Run the certificate checks and the stability probe");
  stabCmd->add_option("scenario", stab.scenario, "Builtin id or JSON file")->required();
  stabCmd->add_option("--eps", stab.eps, "Probe radii");
  stabCmd->add_option("--t0-grid", stab.t0Grid, "Start times");
  stabCmd->add_option("--horizon", stab.horizon, "Final time");
  stabCmd->add_option("--out", stab.out, "Output directory");

  IntegralArgs integ;
  auto* intCmd = app.add_subcommand("integrate", "Lebesgue-Stieltjes integral of h over [from, to)");
  intCmd->add_option("scenario", integ.scenario, "Builtin id or JSON file (its derivator is used)")->required();
  intCmd->add_option("--expr", integ.expr, "h(t) off jumps")->required();
  intCmd->add_option("--jump-expr", integ.jumpExpr, "h(t) at jumps");
  intCmd->add_option("--from", integ.from)->required();
  intCmd->add_option("--to", integ.to)->required();

  IntegralArgs ge;
  auto* gexpCmd = app.add_subcommand("gexp", "g-exponential of p from `from` to `to`");
  gexpCmd->add_option("scenario", ge.scenario, "Builtin id or JSON file (its derivator is used)")->required();
  gexpCmd->add_option("--p", ge.expr, "p(t) off jumps")->required();
  gexpCmd->add_option("--p-jump", ge.jumpExpr, "p(t) at jumps");
  gexpCmd->add_option("--from", ge.from)->required();
  gexpCmd->add_option("--to", ge.to)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("list-scenarios")) return listScenarios();
    if (simCmd->parsed()) return simulate(sim);
    if (stabCmd->parsed()) return checkStability(stab);
    if (intCmd->parsed()) return integrate(integ);
    return gexp(ge);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
