// Command-line driver.  Every subcommand resolves its configuration the same
// way (flags > DSWAVE_* environment variables > --config file > defaults),
// writes its artifacts plus a manifest.json into the output directory, and
// reports errors as a single machine-parsable line on stderr.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "dsw/bnorm.hpp"
#include "dsw/errors.hpp"
#include "dsw/fitting.hpp"
#include "dsw/hamilton.hpp"
#include "dsw/metric.hpp"
#include "dsw/picard.hpp"
#include "dsw/resonance.hpp"
#include "dsw/runio.hpp"
#include "dsw/wave.hpp"

using namespace dsw;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string flatten(const char* msg) {
  std::string out(msg);
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

// Shared command-line state.
struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> sets;  // key=value overrides, in parse order
};

std::string out_dir(const Common& com, const std::string& cmd) {
  return com.out.empty() ? "dswave-out/" + cmd : com.out;
}

Json gather_config(const Common& com, const std::string& command,
                   const std::vector<KeySpec>& schema) {
  Json cfg = Json::object();
  if (!com.config_path.empty())
    cfg = unwrap_manifest(read_json(com.config_path), command);
  apply_env_overrides(cfg, schema);
  for (const std::string& kv : com.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return resolve_config(cfg, schema);
}

// ---------------------------------------------------------------------------
// Shared ingredients.

// C-infinity compact bump on (-1, 1), the shape every forcing pulse uses.
double compact_bump(double s) {
  return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
}

// C-infinity ramp: 0 below 0, 1 above 1.
double smooth_ramp(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

std::function<double(double, double)> pulse_forcing(double amp, double tc,
                                                    double tw, double mc,
                                                    double mw) {
  return [=](double t, double mu) {
    return amp * compact_bump((t - tc) / tw) * compact_bump((mu - mc) / mw);
  };
}

MetricFamily family_from(const Json& rc) {
  const std::string kind = rc["family"].get<std::string>();
  const int n = rc["n"].get<int>();
  const double delta = rc["delta"].get<double>();
  const double c = rc["coupling"].get<double>();
  if (kind == "static") return MetricFamily::static_de_sitter(n, delta);
  if (kind == "quadratic")
    return MetricFamily::conformal([c](double u) { return 1.0 + c * u * u; },
                                   n, delta);
  if (kind == "linear")
    return MetricFamily::conformal([c](double u) { return 1.0 + c * u; }, n,
                                   delta);
  throw ConfigError("unknown family '" + kind +
                    "' (expected static, quadratic or linear)");
}

Nonlinearity coupling_from(const Json& rc) {
  const std::string kind = rc["nonlinearity"].get<std::string>();
  Nonlinearity q;
  if (kind == "none") return q;
  if (kind == "headline") {  // u * (tau d_tau u)
    q.terms.push_back({1.0, 1, {BDerivative::TauDtau}});
    return q;
  }
  if (kind == "velocity2") {  // (tau d_tau u)^2
    q.terms.push_back({1.0, 0, {BDerivative::TauDtau, BDerivative::TauDtau}});
    return q;
  }
  if (kind == "gradient2") {  // (d_mu u)^2
    q.terms.push_back({1.0, 0, {BDerivative::Dmu, BDerivative::Dmu}});
    return q;
  }
  if (kind == "box") {  // u * Box u, strengthened-norm control
    q.terms.push_back({1.0, 1, {}});
    q.box_term = true;
    return q;
  }
  throw ConfigError("unknown nonlinearity '" + kind +
                    "' (expected none, headline, velocity2, gradient2 or box)");
}

std::optional<LowerOrderTerm> lower_order_from(const Json& rc) {
  const double l0 = rc["l0"].get<double>();
  const double l1 = rc["l1"].get<double>();
  const double l2 = rc["l2"].get<double>();
  if (l0 == 0.0 && l1 == 0.0 && l2 == 0.0) return std::nullopt;
  return LowerOrderTerm{l0, l1, l2};
}

WaveGrid grid_from(const Json& rc, int store_stride) {
  WaveGrid grid;
  grid.n = rc["n"].get<int>();
  grid.delta = rc["delta"].get<double>();
  grid.t_start = rc["t_start"].get<double>();
  grid.t_end = rc["t_end"].get<double>();
  grid.n_mu = rc["n_mu"].get<int>();
  grid.cfl = rc["cfl"].get<double>();
  grid.store_stride = store_stride;
  return grid;
}

// ---------------------------------------------------------------------------
// Schemas.

std::vector<KeySpec> flow_schema() {
  return {{"n", "int", 4},
          {"seeds_per_component", "int", 500},
          {"seed", "int", 1},
          {"workers", "int", 1},
          {"delta", "number", 0.1},
          {"tau0", "number", 1.0},
          {"radial_tol", "number", 1e-6},
          {"max_steps", "int", 200000},
          {"radial_neighborhood", "number", 1e-2},
          {"perturbation", "number", 0.0},
          {"trajectory", "object", Json::object()}};
}

std::vector<KeySpec> trajectory_schema() {
  return {{"component", "int", 1}, {"seed_index", "int", 0}, {"stride", "int", 25}};
}

std::vector<KeySpec> resonances_schema() {
  return {{"n", "int", 4},          {"lambda", "number", 0.0},
          {"l", "int", -1},         {"N_max", "int", 8},
          {"numeric", "bool", false}, {"box", "object", Json::object()}};
}

std::vector<KeySpec> box_schema() {
  return {{"re_lo", "number", -0.5},
          {"re_hi", "number", 0.5},
          {"im_lo", "number", -2.5},
          {"im_hi", "number", 0.25}};
}

std::vector<KeySpec> solve_schema() {
  return {{"n", "int", 4},
          {"lambda", "number", 0.0},
          {"delta", "number", 0.1},
          {"t_start", "number", 0.0},
          {"t_end", "number", 20.0},
          {"n_mu", "int", 201},
          {"cfl", "number", 0.8},
          {"store_stride", "int", 1},
          {"dissipation", "number", 0.1},
          {"amplitude", "number", 1.0},
          {"t_center", "number", 1.5},
          {"t_halfwidth", "number", 1.0},
          {"mu_center", "number", 0.5},
          {"mu_halfwidth", "number", 0.2},
          {"l0", "number", 0.0},
          {"l1", "number", 0.0},
          {"l2", "number", 0.0},
          {"probe_mu", "number", 0.45},
          {"fit_t_lo", "number", -1.0},
          {"fit_t_hi", "number", -1.0},
          {"energy_weight", "number", 0.0}};
}

std::vector<KeySpec> iterate_schema() {
  return {{"n", "int", 4},
          {"lambda", "number", 0.0},
          {"delta", "number", 0.1},
          {"t_start", "number", 0.0},
          {"t_end", "number", 14.0},
          {"n_mu", "int", 201},
          {"cfl", "number", 0.8},
          {"amplitude", "number", 2.0},
          {"t_center", "number", 1.5},
          {"t_halfwidth", "number", 1.0},
          {"mu_center", "number", 0.5},
          {"mu_halfwidth", "number", 0.2},
          {"family", "string", "quadratic"},
          {"coupling", "number", 1.0},
          {"nonlinearity", "string", "headline"},
          {"tol", "number", 1e-9},
          {"max_iter", "int", 30},
          {"smallness_gate", "number", 10.0},
          {"r_star", "number", 0.5},
          {"l0", "number", 0.0},
          {"l1", "number", 0.0},
          {"l2", "number", 0.0},
          {"probe_mu", "number", 0.45},
          {"expansion", "bool", true},
          {"alpha", "number", 0.9},
          {"fit_t_lo", "number", -1.0},
          {"fit_t_hi", "number", -1.0},
          {"max_doublings", "int", 8},
          {"bisect_steps", "int", 5}};
}

std::vector<KeySpec> backward_schema() {
  return {{"n", "int", 4},
          {"lambda", "number", 0.0},
          {"delta", "number", 0.1},
          {"t_start", "number", 0.0},
          {"t_end", "number", 14.0},
          {"n_mu", "int", 201},
          {"cfl", "number", 0.8},
          {"family", "string", "static"},
          {"coupling", "number", 1.0},
          {"nonlinearity", "string", "none"},
          {"r", "number", 1.0},
          {"amplitude", "number", 1.0},
          {"decay", "number", 2.0},
          {"t_on", "number", 0.5},
          {"mu_center", "number", 0.5},
          {"mu_halfwidth", "number", 0.2},
          {"tol", "number", 1e-9},
          {"max_iter", "int", 30},
          {"smallness_gate", "number", 10.0},
          {"r_star", "number", 0.5},
          {"probe_mu", "number", 0.45}};
}

std::vector<KeySpec> norms_schema() {
  return {{"n", "int", 2},
          {"T", "number", 8.0},
          {"Nt", "int", 256},
          {"L", "number", 6.283185307179586},
          {"Ny", "int", 64},
          {"field", "string", "gaussian"},
          {"width", "number", 2.0},
          {"k", "int", 1},
          {"s", "number", 2.0},
          {"alpha", "number", 0.0},
          {"orders", "array", Json::array()},
          {"decay_gate", "bool", true}};
}

std::vector<KeySpec> regcheck_schema() {
  return {{"expression", "string", Json()}};
}

std::vector<KeySpec> sweep_schema() {
  return {{"axis", "string", Json()},
          {"values", "array", Json()},
          {"command", "string", "solve"},
          {"base", "object", Json::object()},
          {"workers", "int", 1}};
}

// ---------------------------------------------------------------------------
// Runners (shared between the full commands and sweep cells).

ScanReport run_flow(const Json& rc) {
  ScanConfig cfg;
  cfg.n = rc["n"].get<int>();
  const Domain dom{rc["delta"].get<double>(), rc["tau0"].get<double>()};
  cfg.domain = dom;
  cfg.seeds_per_component = rc["seeds_per_component"].get<int>();
  cfg.seed = rc["seed"].get<std::uint64_t>();
  cfg.workers = rc["workers"].get<int>();
  cfg.integrate.domain = dom;
  cfg.integrate.radial_tol = rc["radial_tol"].get<double>();
  cfg.integrate.max_steps = rc["max_steps"].get<std::size_t>();
  cfg.radial_neighborhood = rc["radial_neighborhood"].get<double>();
  const double p = rc["perturbation"].get<double>();
  if (p != 0.0) {
    auto fam = MetricFamily::conformal([p](double u) { return 1.0 + p * u; },
                                       cfg.n, dom.delta, dom.tau0);
    cfg.perturbed = FlowCoefficients::from_family(fam, 1.0);
  }
  return nontrapping_scan(cfg);
}

struct SolveOut {
  GridField u;
  DecayFit fit;
  EnergyReport energy;
  std::vector<double> pt, pu;
  double t_lo = 0.0, t_hi = 0.0;
};

SolveOut run_solve(const Json& rc) {
  LinearProblem prob;
  prob.grid = grid_from(rc, rc["store_stride"].get<int>());
  prob.lambda = rc["lambda"].get<double>();
  prob.dissipation = rc["dissipation"].get<double>();
  const double amp = rc["amplitude"].get<double>();
  const double tc = rc["t_center"].get<double>();
  const double tw = rc["t_halfwidth"].get<double>();
  if (amp != 0.0) {
    prob.forcing = pulse_forcing(amp, tc, tw, rc["mu_center"].get<double>(),
                                 rc["mu_halfwidth"].get<double>());
    prob.forcing_onset = tc - tw;
  }
  prob.lower_order = lower_order_from(rc);

  SolveOut out;
  out.u = solve_forward(prob);
  out.pt = out.u.times;
  out.pu = out.u.probe(rc["probe_mu"].get<double>());

  const double t_free = tc + tw;  // forcing support has ended here
  out.t_lo = rc["fit_t_lo"].get<double>();
  out.t_hi = rc["fit_t_hi"].get<double>();
  if (out.t_lo < 0.0) out.t_lo = t_free + 0.35 * (prob.grid.t_end - t_free);
  if (out.t_hi < 0.0) out.t_hi = prob.grid.t_end;
  auto [wt, wu] = window_series(out.pt, out.pu, out.t_lo, out.t_hi);
  out.fit = select_decay_fit(wt, wu);
  out.energy = energy_report(out.u, prob, rc["energy_weight"].get<double>());
  return out;
}

PicardOptions picard_options_from(const Json& rc, double forcing_onset) {
  PicardOptions opt;
  opt.grid = grid_from(rc, 1);
  opt.lambda = rc["lambda"].get<double>();
  opt.forcing_onset = forcing_onset;
  opt.tol = rc["tol"].get<double>();
  opt.max_iter = rc["max_iter"].get<int>();
  opt.smallness_gate = rc["smallness_gate"].get<double>();
  opt.r_star = rc["r_star"].get<double>();
  return opt;
}

struct IterateOut {
  GridField u;
  IterationReport rep;
  bool did_expansion = false;
  ExpansionResult ex;
};

IterateOut run_iterate(const Json& rc) {
  const MetricFamily fam = family_from(rc);
  const Nonlinearity q = coupling_from(rc);
  const double tc = rc["t_center"].get<double>();
  const double tw = rc["t_halfwidth"].get<double>();
  auto forcing = pulse_forcing(rc["amplitude"].get<double>(), tc, tw,
                               rc["mu_center"].get<double>(),
                               rc["mu_halfwidth"].get<double>());
  PicardOptions opt = picard_options_from(rc, tc - tw);
  opt.lower_order = lower_order_from(rc);

  IterateOut out;
  auto [u, rep] = picard_solve(fam, q, forcing, opt);
  out.u = std::move(u);
  out.rep = rep;

  if (rc["expansion"].get<bool>()) {
    const ResonanceLattice lattice =
        analytic_lattice(opt.grid.n, opt.lambda, 3);
    double t_lo = rc["fit_t_lo"].get<double>();
    double t_hi = rc["fit_t_hi"].get<double>();
    if (t_lo < 0.0) t_lo = 0.35 * opt.grid.t_end;
    if (t_hi < 0.0) t_hi = 0.72 * opt.grid.t_end;
    out.ex = extract_expansion(out.u, lattice, rc["alpha"].get<double>(),
                               rc["probe_mu"].get<double>(), t_lo, t_hi);
    out.did_expansion = true;
  }
  return out;
}

SweepResult run_bisect(const Json& rc) {
  const MetricFamily fam = family_from(rc);
  const Nonlinearity q = coupling_from(rc);
  const double tc = rc["t_center"].get<double>();
  const double tw = rc["t_halfwidth"].get<double>();
  // Unit-amplitude base pulse: the amplitude key seeds the doubling search.
  auto forcing = pulse_forcing(1.0, tc, tw, rc["mu_center"].get<double>(),
                               rc["mu_halfwidth"].get<double>());
  PicardOptions opt = picard_options_from(rc, tc - tw);
  opt.lower_order = lower_order_from(rc);
  return amplitude_sweep(fam, q, forcing, opt, rc["amplitude"].get<double>(),
                         rc["max_doublings"].get<int>(),
                         rc["bisect_steps"].get<int>());
}

struct BackwardOut {
  GridField u;
  IterationReport rep;
};

BackwardOut run_backward(const Json& rc) {
  const MetricFamily fam = family_from(rc);
  const Nonlinearity q = coupling_from(rc);
  const double amp = rc["amplitude"].get<double>();
  const double decay = rc["decay"].get<double>();
  const double t_on = rc["t_on"].get<double>();
  const double mc = rc["mu_center"].get<double>();
  const double mw = rc["mu_halfwidth"].get<double>();
  auto forcing = [=](double t, double mu) {
    return amp * smooth_ramp(t - t_on) * std::exp(-decay * t) *
           compact_bump((mu - mc) / mw);
  };
  PicardOptions opt = picard_options_from(rc, 0.0);

  BackwardOut out;
  auto [u, rep] =
      backward_quasilinear(fam, q, forcing, rc["r"].get<double>(), opt);
  out.u = std::move(u);
  out.rep = rep;
  return out;
}

HalfSpaceField norms_field(const Json& rc, const GridSpec& grid) {
  const std::string kind = rc["field"].get<std::string>();
  const double width = rc["width"].get<double>();
  const double L = grid.L;
  const int k = rc["k"].get<int>();
  if (kind == "gaussian") {
    return make_field(grid, [=](double t, const std::vector<double>& y) {
      double v = std::exp(-t * t / (2.0 * width * width));
      for (double yj : y) v *= std::cos(2.0 * M_PI * k * yj / L);
      return std::complex<double>(v, 0.0);
    });
  }
  if (kind == "lorentzian") {  // too little decay for the gate at large T
    return make_field(grid, [](double t, const std::vector<double>&) {
      return std::complex<double>(1.0 / (1.0 + t * t), 0.0);
    });
  }
  throw ConfigError("unknown field '" + kind +
                    "' (expected gaussian or lorentzian)");
}

std::vector<std::pair<NormSpec, double>> run_norms(const Json& rc,
                                                   HalfSpaceField* keep) {
  GridSpec grid;
  grid.n = rc["n"].get<int>();
  grid.T = rc["T"].get<double>();
  grid.Nt = rc["Nt"].get<int>();
  grid.L = rc["L"].get<double>();
  grid.Ny = rc["Ny"].get<int>();
  const HalfSpaceField u = norms_field(rc, grid);

  std::vector<double> orders;
  for (const Json& o : rc["orders"]) {
    if (!o.is_number()) throw ConfigError("orders must be numbers");
    orders.push_back(o.get<double>());
  }
  if (orders.empty()) orders.push_back(rc["s"].get<double>());

  const double alpha = rc["alpha"].get<double>();
  const bool gate = rc["decay_gate"].get<bool>();
  std::vector<std::pair<NormSpec, double>> entries;
  for (double s : orders) {
    const NormSpec spec{s, alpha};
    entries.emplace_back(spec, hb_norm(u, spec, gate));
  }
  if (keep) *keep = u;
  return entries;
}

// ---------------------------------------------------------------------------
// Full commands.

void cmd_flow(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "flow", flow_schema());
  const ScanReport rep = run_flow(rc);

  const std::string dir = out_dir(com, "flow");
  std::vector<std::string> artifacts{"scan.json"};
  write_json(dir + "/scan.json", scan_json(rep));

  if (!rc["trajectory"].empty()) {
    const Json tr = resolve_config(rc["trajectory"], trajectory_schema());
    const int comp = tr["component"].get<int>();
    if (comp != 1 && comp != -1)
      throw ConfigError("trajectory.component must be +1 or -1");
    const int n = rc["n"].get<int>();
    const Domain dom{rc["delta"].get<double>(), rc["tau0"].get<double>()};
    const CotangentPoint seed = random_characteristic_seed(
        n, dom, comp,
        rc["seed"].get<std::uint64_t>() + tr["seed_index"].get<std::uint64_t>());
    IntegrateOptions io;
    io.domain = dom;
    io.radial_tol = rc["radial_tol"].get<double>();
    io.max_steps = rc["max_steps"].get<std::size_t>();
    io.sample_stride = tr["stride"].get<std::size_t>();
    const Trajectory traj = integrate(seed, FlowDirection::Forward, io);

    std::vector<std::string> header{"s", "chart"};
    for (int i = 1; i < n; ++i) header.push_back("Y" + std::to_string(i));
    header.push_back("tau");
    for (int i = 1; i < n; ++i) header.push_back("zeta" + std::to_string(i));
    header.insert(header.end(), {"sigma", "p", "component"});
    std::vector<std::vector<std::string>> rows;
    for (const auto& smp : traj.samples) {
      const bool is_center = smp.base.center();
      const ChartPoint pt = is_center ? smp.base : to_center(smp.base);
      const Covector cv =
          is_center ? smp.fiber : to_center(smp.base, smp.fiber);
      std::vector<std::string> row{format_sci(smp.s),
                                   is_center ? "center" : "horizon"};
      for (int i = 0; i < n - 1; ++i) row.push_back(format_sci(pt.Y[i]));
      row.push_back(format_sci(pt.tau));
      for (int i = 0; i < n - 1; ++i) row.push_back(format_sci(cv.zeta[i]));
      row.push_back(format_sci(cv.sigma));
      row.push_back(format_sci(smp.p));
      row.push_back(std::to_string(traj.component));
      rows.push_back(std::move(row));
    }
    write_csv(dir + "/trajectory.csv", header, rows);
    artifacts.push_back("trajectory.csv");
    const std::string term = to_string(traj.termination);
    std::printf("trajectory: %zu samples, termination=%s\n",
                traj.samples.size(), term.c_str());
  }

  write_manifest(dir, "flow", rc, elapsed_ms(t0), artifacts);
  std::printf(
      "scan: total=%d reached_H1=%d reached_H2=%d converged_radial=%d "
      "neighborhood=%d failures=%zu\n",
      rep.total, rep.reached_H1, rep.reached_H2, rep.converged_radial,
      rep.neighborhood_hits, rep.failures.size());
}

void cmd_resonances(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "resonances", resonances_schema());
  const int n = rc["n"].get<int>();
  const double lambda = rc["lambda"].get<double>();
  const int l = rc["l"].get<int>();
  const int N = rc["N_max"].get<int>();

  const ResonanceLattice lat =
      l < 0 ? analytic_lattice(n, lambda, N) : mode_lattice(n, lambda, l, N);
  Json out = lattice_json(lat);
  out["kind"] = l < 0 ? "analytic" : "mode";
  if (l >= 0) out["l"] = l;
  if (rc["numeric"].get<bool>()) {
    if (l < 0)
      throw ConfigError("the numeric pole search needs a fixed mode (l >= 0)");
    const Json bj = resolve_config(rc["box"], box_schema());
    SearchBox box;
    box.re_lo = bj["re_lo"].get<double>();
    box.re_hi = bj["re_hi"].get<double>();
    box.im_lo = bj["im_lo"].get<double>();
    box.im_hi = bj["im_hi"].get<double>();
    Json arr = Json::array();
    for (const Cplx& z : numeric_poles(n, lambda, l, box)) {
      Json p;
      p["re"] = fixed_precision(z.real());
      p["im"] = fixed_precision(z.imag());
      arr.push_back(std::move(p));
    }
    out["numeric"] = std::move(arr);
  }

  const std::string dir = out_dir(com, "resonances");
  write_json(dir + "/resonances.json", out);
  write_manifest(dir, "resonances", rc, elapsed_ms(t0), {"resonances.json"});

  Json head;
  head["n"] = n;
  head["lambda"] = fixed_precision(lambda);
  Json lead = Json::array();
  for (std::size_t i = 0; i < lat.entries.size() && i < 6; ++i) {
    Json e;
    e["re"] = fixed_precision(lat.entries[i].sigma.real());
    e["im"] = fixed_precision(lat.entries[i].sigma.imag());
    e["multiplicity"] = lat.entries[i].multiplicity;
    lead.push_back(std::move(e));
  }
  head["leading"] = std::move(lead);
  std::printf("%s\n", head.dump().c_str());
}

void write_probe_csv(const std::string& path, const std::vector<double>& t,
                     const std::vector<double>& u) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    rows.push_back({format_sci(t[i]), format_sci(u[i])});
  write_csv(path, {"t", "u"}, rows);
}

void cmd_solve(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "solve", solve_schema());
  const SolveOut so = run_solve(rc);

  const std::string dir = out_dir(com, "solve");
  std::vector<std::string> artifacts{"field.bin", "field.json", "probe.csv",
                                     "fit.json"};
  write_field(dir + "/field", so.u, rc);
  write_probe_csv(dir + "/probe.csv", so.pt, so.pu);
  Json fj;
  fj["fit"] = fit_json(so.fit);
  Json ej;
  ej["sup_energy"] = fixed_precision(so.energy.sup_energy);
  ej["forcing_norm2"] = fixed_precision(so.energy.forcing_norm2);
  ej["fitted_c"] = fixed_precision(so.energy.fitted_c);
  fj["energy"] = std::move(ej);
  write_json(dir + "/fit.json", fj);
  write_manifest(dir, "solve", rc, elapsed_ms(t0), artifacts);

  const std::string model = to_string(so.fit.model);
  std::printf("fit: model=%s exponent=%.6f frequency=%.6f residual=%.4e\n",
              model.c_str(), so.fit.exponent, so.fit.frequency,
              so.fit.residual);
}

void cmd_iterate(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "iterate", iterate_schema());
  const IterateOut io = run_iterate(rc);

  const std::string dir = out_dir(com, "iterate");
  std::vector<std::string> artifacts{"field.bin", "field.json", "probe.csv",
                                     "report.json"};
  write_field(dir + "/field", io.u, rc);
  write_probe_csv(dir + "/probe.csv", io.u.times,
                  io.u.probe(rc["probe_mu"].get<double>()));
  write_json(dir + "/report.json", iteration_json(io.rep));
  if (io.did_expansion) {
    Json ex;
    ex["constant"] = fixed_precision(io.ex.constant);
    ex["remainder"] = fit_json(io.ex.remainder);
    ex["remainder_norm"] = fixed_precision(io.ex.remainder_norm);
    write_json(dir + "/expansion.json", ex);
    artifacts.push_back("expansion.json");
  }
  write_manifest(dir, "iterate", rc, elapsed_ms(t0), artifacts);

  std::printf("picard: iterates=%d ratio_last=%.4f residual=%.4e",
              io.rep.iterates,
              io.rep.contraction_ratios.empty()
                  ? 0.0
                  : io.rep.contraction_ratios.back(),
              io.rep.final_residual);
  if (io.did_expansion)
    std::printf(" constant=%.6e remainder_exponent=%.4f",
                io.ex.constant, io.ex.remainder.exponent);
  std::printf("\n");
}

void cmd_backward(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "backward", backward_schema());
  const BackwardOut bo = run_backward(rc);

  const std::string dir = out_dir(com, "backward");
  std::vector<std::string> artifacts{"field.bin", "field.json", "probe.csv",
                                     "report.json"};
  write_field(dir + "/field", bo.u, rc);
  write_probe_csv(dir + "/probe.csv", bo.u.times,
                  bo.u.probe(rc["probe_mu"].get<double>()));
  Json rj = iteration_json(bo.rep);
  rj["sup"] = fixed_precision(bo.u.max_abs());
  write_json(dir + "/report.json", rj);
  write_manifest(dir, "backward", rc, elapsed_ms(t0), artifacts);

  std::printf("backward: iterates=%d sup=%.6e residual=%.4e\n",
              bo.rep.iterates, bo.u.max_abs(), bo.rep.final_residual);
}

void cmd_norms(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "norms", norms_schema());
  HalfSpaceField u;
  const auto entries = run_norms(rc, &u);

  const std::string dir = out_dir(com, "norms");
  write_half_field(dir + "/field", u, rc);
  Json nj;
  Json gj;
  gj["n"] = u.grid.n;
  gj["T"] = fixed_precision(u.grid.T);
  gj["Nt"] = u.grid.Nt;
  gj["L"] = fixed_precision(u.grid.L);
  gj["Ny"] = u.grid.Ny;
  nj["grid"] = std::move(gj);
  nj["field"] = rc["field"];
  Json arr = Json::array();
  for (const auto& [spec, norm] : entries) {
    Json e;
    e["s"] = fixed_precision(spec.s);
    e["alpha"] = fixed_precision(spec.alpha);
    e["norm"] = fixed_precision(norm);
    arr.push_back(std::move(e));
  }
  nj["entries"] = std::move(arr);
  write_json(dir + "/norms.json", nj);
  write_manifest(dir, "norms", rc, elapsed_ms(t0),
                 {"field.bin", "field.json", "norms.json"});

  for (const auto& [spec, norm] : entries)
    std::printf("norm[s=%g,alpha=%g] = %.12e\n", spec.s, spec.alpha, norm);
}

void cmd_regcheck(const Common& com, const std::string& positional) {
  const auto t0 = Clock::now();
  Common c2 = com;
  if (!positional.empty()) c2.sets.push_back("expression=" + positional);
  const Json rc = gather_config(c2, "regcheck", regcheck_schema());
  const Json out = regcheck_eval(rc["expression"].get<std::string>());

  for (const Json& line : out["printed"])
    std::printf("%s\n", line.get<std::string>().c_str());

  const std::string dir = out_dir(com, "regcheck");
  write_json(dir + "/regcheck.json", out);
  write_manifest(dir, "regcheck", rc, elapsed_ms(t0), {"regcheck.json"});
}

// ---------------------------------------------------------------------------
// Sweep.

struct CellOut {
  std::string status = "ok";
  std::map<std::string, std::string> m;
};

CellOut run_cell(const std::string& command, const Json& cell_cfg) {
  CellOut c;
  if (command == "solve") {
    const SolveOut so = run_solve(resolve_config(cell_cfg, solve_schema()));
    c.m["decay_exponent"] = format_sci(so.fit.exponent);
    c.m["model"] = to_string(so.fit.model);
    c.m["frequency"] = format_sci(so.fit.frequency);
    c.m["constant"] = format_sci(so.fit.constant);
    c.m["fit_residual"] = format_sci(so.fit.residual);
    c.m["sup_energy"] = format_sci(so.energy.sup_energy);
  } else if (command == "iterate") {
    const IterateOut io =
        run_iterate(resolve_config(cell_cfg, iterate_schema()));
    c.m["iterates"] = std::to_string(io.rep.iterates);
    if (!io.rep.contraction_ratios.empty())
      c.m["contraction_ratio"] = format_sci(io.rep.contraction_ratios.back());
    c.m["final_residual"] = format_sci(io.rep.final_residual);
    if (io.did_expansion) {
      c.m["constant"] = format_sci(io.ex.constant);
      c.m["decay_exponent"] = format_sci(io.ex.remainder.exponent);
      c.m["model"] = to_string(io.ex.remainder.model);
    }
  } else if (command == "bisect") {
    const SweepResult sr =
        run_bisect(resolve_config(cell_cfg, iterate_schema()));
    c.m["smallness_radius"] = format_sci(sr.converged_amplitude);
    c.m["iterates"] = std::to_string(sr.probes.size());
  } else if (command == "norms") {
    const auto entries =
        run_norms(resolve_config(cell_cfg, norms_schema()), nullptr);
    if (!entries.empty()) c.m["norm"] = format_sci(entries.front().second);
  } else if (command == "flow") {
    const ScanReport rep = run_flow(resolve_config(cell_cfg, flow_schema()));
    c.m["failures"] = std::to_string(rep.failures.size());
  } else {
    throw ConfigError("unknown sweep command '" + command +
                      "' (expected solve, iterate, bisect, norms or flow)");
  }
  return c;
}

void cmd_sweep(const Common& com) {
  const auto t0 = Clock::now();
  const Json rc = gather_config(com, "sweep", sweep_schema());
  const std::string axis = rc["axis"].get<std::string>();
  const std::string command = rc["command"].get<std::string>();
  const Json& values = rc["values"];
  const Json& base = rc["base"];
  for (const Json& v : values)
    if (!v.is_number()) throw ConfigError("sweep values must be numbers");

  const int n_cells = static_cast<int>(values.size());
  std::vector<CellOut> cells(static_cast<std::size_t>(n_cells));
  auto work = [&](int i) {
    Json cc = base;
    cc[axis] = values[i];
    try {
      cells[static_cast<std::size_t>(i)] = run_cell(command, cc);
    } catch (const Error& e) {
      cells[static_cast<std::size_t>(i)].status =
          std::string("error:") + e.category();
    } catch (const std::exception&) {
      cells[static_cast<std::size_t>(i)].status = "error:InternalError";
    }
  };
  // The spectral norms use planned transforms whose setup is not
  // thread-safe; everything else parallelizes cell by cell.
  int workers = command == "norms" ? 1 : rc["workers"].get<int>();
  workers = std::max(1, std::min(workers, n_cells));
  if (workers <= 1) {
    for (int i = 0; i < n_cells; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < n_cells; i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }

  const std::vector<std::string> cols{
      "index",          "value",          "status",
      "decay_exponent", "model",          "frequency",
      "constant",       "fit_residual",   "iterates",
      "contraction_ratio", "final_residual", "smallness_radius",
      "norm",           "sup_energy",     "failures"};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<double>> drows;
  int ok = 0;
  for (int i = 0; i < n_cells; ++i) {
    const CellOut& c = cells[static_cast<std::size_t>(i)];
    if (c.status == "ok") ++ok;
    std::vector<std::string> row{std::to_string(i),
                                 format_sci(values[i].get<double>()),
                                 c.status};
    std::vector<double> drow{static_cast<double>(i),
                             values[i].get<double>()};
    for (std::size_t j = 3; j < cols.size(); ++j) {
      const auto it = c.m.find(cols[j]);
      row.push_back(it == c.m.end() ? "" : it->second);
      if (cols[j] != "model") {
        drow.push_back(it == c.m.end() ? std::nan("")
                                       : std::strtod(it->second.c_str(),
                                                     nullptr));
      }
    }
    rows.push_back(std::move(row));
    drows.push_back(std::move(drow));
  }

  const std::string dir = out_dir(com, "sweep");
  write_csv(dir + "/sweep.csv", cols, rows);
  std::vector<std::string> dcols;
  for (const std::string& cname : cols)
    if (cname != "status" && cname != "model") dcols.push_back(cname);
  write_dat(dir + "/sweep.dat", dcols, drows);
  write_manifest(dir, "sweep", rc, elapsed_ms(t0), {"sweep.csv", "sweep.dat"});

  std::printf("sweep: cells=%d ok=%d failed=%d\n", n_cells, ok, n_cells - ok);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wave-flow toolkit for the static cosmological patch"};
  app.require_subcommand(1);
  app.footer(
      "Config precedence: flags > DSWAVE_* environment variables > --config "
      "file > defaults.\nEvery config key KEY of the chosen subcommand can be "
      "overridden by the environment\nvariable DSWAVE_KEY (key uppercased). "
      "A previous run's manifest.json can be passed\nback via --config to "
      "reproduce that run.");

  Common com;
  std::string regcheck_expr;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", com.config_path,
                    "JSON config file (a manifest.json is accepted)");
    sub->add_option("--out", com.out,
                    "output directory (default dswave-out/<command>)");
    sub->add_option("--set", com.sets,
                    "override a config key, key=value (repeatable)");
  };
  auto int_flag = [&](CLI::App* sub, const std::string& flag,
                      const std::string& key, const std::string& help) {
    sub->add_option_function<long long>(
        flag,
        [&com, key](const long long& v) {
          com.sets.push_back(key + "=" + std::to_string(v));
        },
        help);
  };
  auto num_flag = [&](CLI::App* sub, const std::string& flag,
                      const std::string& key, const std::string& help) {
    sub->add_option_function<double>(
        flag,
        [&com, key](const double& v) {
          char b[40];
          std::snprintf(b, sizeof b, "%.17g", v);
          com.sets.push_back(key + "=" + b);
        },
        help);
  };

  CLI::App* flow =
      app.add_subcommand("flow", "null-bicharacteristic non-trapping scan");
  add_common(flow);
  int_flag(flow, "--n", "n", "spatial dimension");
  int_flag(flow, "--seed", "seed", "base random seed");
  int_flag(flow, "--workers", "workers", "scan worker threads");
  flow->callback([&] { cmd_flow(com); });

  CLI::App* res = app.add_subcommand(
      "resonances", "quasinormal lattice (analytic, per mode, or numeric)");
  add_common(res);
  int_flag(res, "--n", "n", "spatial dimension");
  num_flag(res, "--lambda", "lambda", "Klein-Gordon parameter");
  int_flag(res, "--l", "l", "spherical mode (-1 = all modes)");
  res->add_flag_function(
      "--numeric",
      [&com](std::int64_t) { com.sets.push_back("numeric=true"); },
      "run the numeric pole search (needs --l)");
  res->callback([&] { cmd_resonances(com); });

  CLI::App* solve = app.add_subcommand(
      "solve", "forward linear solve with late-time decay fit");
  add_common(solve);
  int_flag(solve, "--n", "n", "spatial dimension");
  num_flag(solve, "--lambda", "lambda", "Klein-Gordon parameter");
  solve->callback([&] { cmd_solve(com); });

  CLI::App* iter = app.add_subcommand(
      "iterate", "quasilinear fixed-point iteration with expansion split");
  add_common(iter);
  num_flag(iter, "--lambda", "lambda", "Klein-Gordon parameter");
  num_flag(iter, "--amplitude", "amplitude", "forcing amplitude");
  iter->callback([&] { cmd_iterate(com); });

  CLI::App* bwd = app.add_subcommand(
      "backward", "reverse-time solve with prescribed decay weight");
  add_common(bwd);
  num_flag(bwd, "--r", "r", "decay weight of the recovered solution");
  bwd->callback([&] { cmd_backward(com); });

  CLI::App* norms =
      app.add_subcommand("norms", "weighted b-Sobolev norms on the half-space");
  add_common(norms);
  num_flag(norms, "--s", "s", "Sobolev order");
  num_flag(norms, "--alpha", "alpha", "Mellin weight");
  norms->callback([&] { cmd_norms(com); });

  CLI::App* reg = app.add_subcommand(
      "regcheck", "operator-class calculus queries (compose, map, threshold)");
  add_common(reg);
  reg->add_option("expression", regcheck_expr,
                  "query, e.g. \"threshold_real_principal(stilde=2)\"");
  reg->callback([&] { cmd_regcheck(com, regcheck_expr); });

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run a subcommand over a list of values, one CSV row each");
  add_common(sweep);
  int_flag(sweep, "--workers", "workers", "concurrent cells");
  sweep->callback([&] { cmd_sweep(com); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.category(),
                 flatten(e.what()).c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: InternalError: %s\n",
                 flatten(e.what()).c_str());
    return 2;
  }
  return 0;
}
