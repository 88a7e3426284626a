#include "dsw/hamilton.hpp"

#include <algorithm>
#include <atomic>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>
#include <thread>

namespace dsw {

namespace {

using State = std::vector<double>;
namespace ode = boost::numeric::odeint;

// Center-chart packing: [Y(0..m-1), tau, zeta(0..m-1), sigma], m = n-1.
struct CenterState {
  int m;
  explicit CenterState(int n) : m(n - 1) {}
  double tau(const State& x) const { return x[m]; }
  double sigma(const State& x) const { return x[2 * m + 1]; }
  Eigen::Map<const Vec> Y(const State& x) const {
    return Eigen::Map<const Vec>(x.data(), m);
  }
  Eigen::Map<const Vec> zeta(const State& x) const {
    return Eigen::Map<const Vec>(x.data() + m + 1, m);
  }
};

void center_field(const CenterState& cs, const State& x, State& dxdt,
                  double direction) {
  auto Y = cs.Y(x);
  auto zeta = cs.zeta(x);
  double q = Y.dot(zeta) - cs.sigma(x);
  Eigen::Map<Vec> dY(dxdt.data(), cs.m);
  Eigen::Map<Vec> dzeta(dxdt.data() + cs.m + 1, cs.m);
  dY = direction * (2.0 * q * Y - 2.0 * zeta);
  dzeta = direction * (-2.0 * q) * zeta;
  dxdt[cs.m] = direction * (-2.0 * q) * cs.tau(x);  // tau
  dxdt[2 * cs.m + 1] = 0.0;                         // sigma: conserved
}

double p_normalized(const CenterState& cs, const State& x) {
  auto Y = cs.Y(x);
  auto zeta = cs.zeta(x);
  double q = Y.dot(zeta) - cs.sigma(x);
  double z2 = zeta.squaredNorm();
  return (q * q - z2) / (1.0 + z2);
}

struct RadialDistance {
  double residual;  // |mu| + tau + |eta_hat| + |sigma_hat|
  double d_plus;    // |Y + zeta/|zeta||
  double d_minus;   // |Y - zeta/|zeta||
};

RadialDistance radial_distance(const CenterState& cs, const State& x) {
  RadialDistance out{1e300, 1e300, 1e300};
  auto Y = cs.Y(x);
  auto zeta = cs.zeta(x);
  double r = Y.norm();
  double zn = zeta.norm();
  if (r <= 0.0 || zn <= 0.0) return out;
  double radial = zeta.dot(Y) / r;  // zeta . omega
  double xi = -radial / (2.0 * r);
  if (xi == 0.0) return out;
  Vec omega = Y / r;
  Vec eta = r * (zeta - radial * omega);
  double mu = 1.0 - r * r;
  out.residual = std::abs(mu) + cs.tau(x) + eta.norm() / std::abs(xi) +
                 std::abs(cs.sigma(x)) / std::abs(xi);
  out.d_plus = (Y + zeta / zn).norm();
  out.d_minus = (Y - zeta / zn).norm();
  return out;
}

ChartPoint center_point(const CenterState& cs, const State& x, int n) {
  return ChartPoint::center(n, Vec(cs.Y(x)), std::max(0.0, cs.tau(x)));
}

Covector center_cov(const CenterState& cs, const State& x) {
  return Covector::center(Vec(cs.zeta(x)), cs.sigma(x));
}

}  // namespace

HamiltonField hamilton_field(const CotangentPoint& pt) {
  HamiltonField f;
  f.chart = pt.fiber.chart;
  if (f.chart == Chart::Center) {
    ChartPoint c = to_center(pt.base);
    double q = c.Y.dot(pt.fiber.zeta) - pt.fiber.sigma;
    f.dY = 2.0 * q * c.Y - 2.0 * pt.fiber.zeta;
    f.dzeta = -2.0 * q * pt.fiber.zeta;
    f.tau_coeff = -2.0 * q;
    f.dsigma = 0.0;  // H_p sigma = 0: sigma is conserved
    return f;
  }
  const ChartPoint& h = pt.base;
  if (h.chart != Chart::Horizon)
    throw ChartDomainError("fiber chart must match base chart");
  double r2 = 1.0 - h.mu;
  double eta2 = pt.fiber.eta.squaredNorm();
  if (r2 <= 0.0 && eta2 != 0.0)
    throw ChartDomainError("hamilton_field: needs mu < 1 when eta != 0");
  double xi = pt.fiber.xi, sigma = pt.fiber.sigma;
  f.dmu = 4.0 * r2 * (-2.0 * h.mu * xi + sigma);
  double angular = (eta2 != 0.0) ? eta2 / (r2 * r2) : 0.0;
  f.dxi = -(4.0 * xi * xi * (1.0 - 2.0 * r2) - 4.0 * sigma * xi - angular);
  f.tau_coeff = 4.0 * r2 * xi + 2.0 * sigma;
  f.dsigma = 0.0;  // H_p sigma = 0: sigma is conserved
  if (eta2 != 0.0) {
    f.domega = -(2.0 / r2) * pt.fiber.eta;
    f.deta = (2.0 / r2) * eta2 * h.omega;
  } else {
    f.domega = Vec::Zero(h.omega.size());
    f.deta = Vec::Zero(h.omega.size());
  }
  return f;
}

double radial_set_residual(const CotangentPoint& pt) {
  ChartPoint h = to_horizon(pt.base);
  Covector cv = to_horizon(pt.base, pt.fiber);
  if (cv.xi == 0.0)
    throw ChartDomainError("radial_set_residual: xi = 0 not in the chart of R");
  return std::abs(h.mu) + h.tau + cv.eta.norm() / std::abs(cv.xi) +
         std::abs(cv.sigma) / std::abs(cv.xi);
}

namespace {

// Rescaled (projectivized) field in the chart
// (mu, tau, rho_hat, sigma_hat, u, v): u parameterizes omega through
// normalize(omega0 + sum u_a e_a) and v parameterizes eta_hat through the
// tangential projection of sum v_a e_a.  Everything is smooth across the
// radial set, where the linearization is evaluated.
struct RescaledChart {
  int n;
  Vec omega0;
  Eigen::MatrixXd basis;  // (n-1) x (n-2) orthonormal, perpendicular to omega0

  explicit RescaledChart(int n_, Vec omega0_)
      : n(n_), omega0(std::move(omega0_)) {
    int m = n - 1;
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(omega0)
                            .householderQ();
    basis = q.rightCols(m - 1);
  }

  int dim() const { return 2 * n; }

  void field(const State& x, State& out) const {
    double mu = x[0], tau = x[1], rho = x[2], sig = x[3];
    int m = n - 1, k = n - 2;
    Vec omega = omega0;
    for (int a = 0; a < k; ++a) omega += x[4 + a] * basis.col(a);
    omega.normalize();
    Vec etah = Vec::Zero(m);
    for (int a = 0; a < k; ++a) etah += x[4 + k + a] * basis.col(a);
    etah -= omega.dot(etah) * omega;

    double r2 = 1.0 - mu;
    double eh2 = etah.squaredNorm();
    double h = 4.0 * (1.0 - 2.0 * r2) - 4.0 * sig - eh2 / (r2 * r2);
    out.assign(dim(), 0.0);
    out[0] = 4.0 * r2 * (-2.0 * mu + sig);
    out[1] = (4.0 * r2 + 2.0 * sig) * tau;
    out[2] = rho * h;
    out[3] = sig * h;
    Vec fomega = -(2.0 / r2) * etah;
    Vec fetah = (2.0 / r2) * eh2 * omega + h * etah;
    double owo = omega0.dot(omega);
    for (int a = 0; a < k; ++a) {
      const Vec ea = basis.col(a);
      out[4 + a] = (ea.dot(fomega) * owo - ea.dot(omega) * omega0.dot(fomega)) /
                   (owo * owo);
      out[4 + k + a] = ea.dot(fetah);
    }
  }
};

}  // namespace

double rescaled_drift(const CotangentPoint& pt) {
  ChartPoint h = to_horizon(pt.base);
  Covector cv = to_horizon(pt.base, pt.fiber);
  if (cv.xi == 0.0)
    throw ChartDomainError("rescaled_drift: xi = 0 not in the chart of R");
  RescaledChart chart(h.n, h.omega);
  State x(chart.dim(), 0.0), f;
  x[0] = h.mu;
  x[1] = h.tau;
  x[2] = 1.0 / cv.xi;
  x[3] = cv.sigma / cv.xi;
  Vec etah = cv.eta / cv.xi;
  for (int a = 0; a < h.n - 2; ++a)
    x[4 + (h.n - 2) + a] = chart.basis.col(a).dot(etah);
  chart.field(x, f);
  f[2] = 0.0;  // drop the fiber-dilation component
  double norm = 0.0;
  for (double c : f) norm += c * c;
  return std::sqrt(norm);
}

std::vector<double> linearization_eigenvalues(const CotangentPoint& pt,
                                              double fd_step) {
  if (radial_set_residual(pt) >= 1e-10)
    throw ChartDomainError(
        "linearization_eigenvalues: point is not on the radial set");
  ChartPoint h = to_horizon(pt.base);
  Covector cv = to_horizon(pt.base, pt.fiber);
  RescaledChart chart(h.n, h.omega);
  int d = chart.dim();
  State base(d, 0.0);
  base[2] = 1.0 / cv.xi;  // rho_hat at the (finite-xi) radial point

  Eigen::MatrixXd J(d, d);
  State xp, xm, fp(d), fm(d);
  for (int j = 0; j < d; ++j) {
    xp = base;
    xm = base;
    xp[j] += fd_step;
    xm[j] -= fd_step;
    chart.field(xp, fp);
    chart.field(xm, fm);
    for (int i = 0; i < d; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * fd_step);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> ev(d);
  for (int i = 0; i < d; ++i) {
    if (std::abs(es.eigenvalues()[i].imag()) > 1e-6)
      throw ConvergenceError("unexpected complex eigenvalue in linearization");
    ev[i] = es.eigenvalues()[i].real();
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::HitH1: return "HitH1";
    case Termination::HitH2: return "HitH2";
    case Termination::ConvergedToLplus: return "ConvergedToLplus";
    case Termination::ConvergedToLminus: return "ConvergedToLminus";
    case Termination::MaxSteps: return "MaxSteps";
    case Termination::LeftChart: return "LeftChart";
  }
  return "?";
}

Trajectory integrate(const CotangentPoint& start, FlowDirection dir,
                     const IntegrateOptions& opt) {
  ChartPoint base = to_center(start.base);
  Covector fiber = to_center(start.base, start.fiber);
  int n = base.n;
  CenterState cs(n);
  State x(2 * n, 0.0);
  for (int i = 0; i < n - 1; ++i) x[i] = base.Y[i];
  x[n - 1] = base.tau;
  for (int i = 0; i < n - 1; ++i) x[n + i] = fiber.zeta[i];
  x[2 * n - 1] = fiber.sigma;

  // Seed must lie on the characteristic set; project sigma onto the nearest
  // root of p = 0 when it is only slightly off.
  {
    auto Y = cs.Y(x);
    auto zeta = cs.zeta(x);
    double zn = zeta.norm();
    if (zn <= 0.0)
      throw ChartDomainError("integrate: zero covector is not characteristic");
    if (opt.project_to_sigma) {
      double lo = Y.dot(zeta) - zn, hi = Y.dot(zeta) + zn;
      double s0 = cs.sigma(x);
      x[2 * n - 1] = (std::abs(s0 - lo) < std::abs(s0 - hi)) ? lo : hi;
    }
    if (std::abs(p_normalized(cs, x)) > 1e-10)
      throw ChartDomainError("integrate: seed is not on the characteristic set");
  }

  Trajectory traj;
  {
    auto Y = cs.Y(x);
    double q = cs.sigma(x) - Y.dot(cs.zeta(x));
    traj.component = q > 0 ? +1 : -1;
  }
  double direction = (dir == FlowDirection::Forward) ? 1.0 : -1.0;
  auto system = [&](const State& y, State& dydt, double) {
    dydt.assign(y.size(), 0.0);
    center_field(cs, y, dydt, direction);
  };

  auto stepper = ode::make_controlled(
      opt.abs_tol, opt.rel_tol, ode::runge_kutta_dopri5<State>());
  double s = 0.0, ds = 1e-3;
  double p0 = p_normalized(cs, x);
  double sigma_ref = cs.sigma(x);
  auto push_sample = [&]() {
    TrajectorySample smp;
    smp.s = s;
    smp.base = center_point(cs, x, n);
    smp.fiber = center_cov(cs, x);
    smp.p = p_normalized(cs, x);
    traj.samples.push_back(std::move(smp));
  };
  push_sample();

  const Domain& dom = opt.domain;
  for (std::size_t step = 0; step < opt.max_steps; ++step) {
    ode::controlled_step_result res;
    int attempts = 0;
    do {
      res = stepper.try_step(system, x, s, ds);
      if (ds < 1e-16 || ++attempts > 200)
        throw IntegratorError("integrate: step size underflow");
    } while (res == ode::controlled_step_result::fail);
    ++traj.steps;

    traj.p_drift =
        std::max(traj.p_drift, std::abs(p_normalized(cs, x) - p0));
    traj.sigma_drift = std::max(
        traj.sigma_drift,
        std::abs(cs.sigma(x) - sigma_ref) / (1.0 + std::abs(sigma_ref)));

    double zn = cs.zeta(x).norm();
    if (zn > 1e8) {
      // Renormalize the fiber: the flow is fiber-homogeneous, and this keeps
      // the compactified trajectory representable near fiber infinity.
      for (int i = n; i < 2 * n; ++i) x[i] /= zn;
      sigma_ref = cs.sigma(x);
      p0 = p_normalized(cs, x);
    } else if (zn < 1e-10) {
      traj.termination = Termination::LeftChart;
      push_sample();
      return traj;
    }

    if (step % opt.sample_stride == 0) push_sample();

    double tau = cs.tau(x);
    double mu = 1.0 - cs.Y(x).squaredNorm();
    if (tau >= dom.tau0) {
      traj.termination = Termination::HitH1;
      push_sample();
      return traj;
    }
    if (mu <= -dom.delta) {
      traj.termination = Termination::HitH2;
      push_sample();
      return traj;
    }
    RadialDistance rd = radial_distance(cs, x);
    if (rd.residual < opt.radial_tol &&
        std::min(rd.d_plus, rd.d_minus) < opt.radial_tol) {
      traj.termination = rd.d_plus < rd.d_minus
                             ? Termination::ConvergedToLplus
                             : Termination::ConvergedToLminus;
      push_sample();
      return traj;
    }
  }
  traj.termination = Termination::MaxSteps;
  push_sample();
  return traj;
}

// ---------------------------------------------------------------------------

FlowCoefficients FlowCoefficients::static_de_sitter() {
  FlowCoefficients fc;
  fc.A = [](double mu) { return -4.0 * (1.0 - mu) * mu; };
  fc.B = [](double mu) { return 2.0 * (1.0 - mu); };
  fc.C = [](double) { return 1.0; };
  fc.S = [](double mu) { return 1.0 - mu; };
  fc.dA = [](double mu) { return 8.0 * mu - 4.0; };
  fc.dB = [](double) { return -2.0; };
  fc.dC = [](double) { return 0.0; };
  fc.dS = [](double) { return -1.0; };
  return fc;
}

FlowCoefficients FlowCoefficients::from_family(const MetricFamily& fam,
                                               double u_value) {
  auto dual = [fam, u_value](double mu) {
    double cf[4];
    fam.coeffs_at(u_value, mu, cf);
    double det = cf[0] * cf[2] - cf[1] * cf[1];
    struct {
      double A, B, C, S;
    } d{cf[2] / det, -cf[1] / det, cf[0] / det, cf[3] * (1.0 - mu)};
    return d;
  };
  FlowCoefficients fc;
  fc.A = [dual](double mu) { return dual(mu).A; };
  fc.B = [dual](double mu) { return dual(mu).B; };
  fc.C = [dual](double mu) { return dual(mu).C; };
  fc.S = [dual](double mu) { return dual(mu).S; };
  constexpr double h = 1e-6;
  fc.dA = [dual](double mu) { return (dual(mu + h).A - dual(mu - h).A) / (2 * h); };
  fc.dB = [dual](double mu) { return (dual(mu + h).B - dual(mu - h).B) / (2 * h); };
  fc.dC = [dual](double mu) { return (dual(mu + h).C - dual(mu - h).C) / (2 * h); };
  fc.dS = [dual](double mu) { return (dual(mu + h).S - dual(mu - h).S) / (2 * h); };
  return fc;
}

namespace {

// Horizon-chart integration with general coefficients (perturbed scans).
// Packing: [mu, tau, xi, sigma, omega(m), eta(m)].
struct PerturbedRun {
  const FlowCoefficients& fc;
  int n;
  double direction;

  void operator()(const State& x, State& dxdt, double) const {
    int m = n - 1;
    double mu = x[0], tau = x[1], xi = x[2], sigma = x[3];
    Eigen::Map<const Vec> omega(x.data() + 4, m), eta(x.data() + 4 + m, m);
    double A = fc.A(mu), B = fc.B(mu), C = fc.C(mu), S = fc.S(mu);
    double eta2 = eta.squaredNorm();
    dxdt.assign(x.size(), 0.0);
    dxdt[0] = direction * (2.0 * A * xi + 2.0 * B * sigma);
    dxdt[1] = direction * (2.0 * B * xi + 2.0 * C * sigma) * tau;
    dxdt[2] = direction * -(fc.dA(mu) * xi * xi +
                            2.0 * fc.dB(mu) * xi * sigma +
                            fc.dC(mu) * sigma * sigma +
                            eta2 * fc.dS(mu) / (S * S));
    dxdt[3] = 0.0;
    Eigen::Map<Vec> domega(dxdt.data() + 4, m), deta(dxdt.data() + 4 + m, m);
    domega = direction * (-(2.0 / S) * eta);
    deta = direction * ((2.0 / S) * eta2) * omega;
  }
};

Termination run_perturbed(const FlowCoefficients& fc, State x, int n,
                          const ScanConfig& cfg) {
  PerturbedRun sys{fc, n, 1.0};
  auto stepper = ode::make_controlled(cfg.integrate.abs_tol,
                                      cfg.integrate.rel_tol,
                                      ode::runge_kutta_dopri5<State>());
  double s = 0.0, ds = 1e-3;
  for (std::size_t step = 0; step < cfg.integrate.max_steps; ++step) {
    ode::controlled_step_result res;
    int attempts = 0;
    do {
      res = stepper.try_step(sys, x, s, ds);
      if (ds < 1e-16 || ++attempts > 200)
        throw IntegratorError("perturbed scan: step size underflow");
    } while (res == ode::controlled_step_result::fail);

    double mu = x[0], tau = x[1], xi = x[2];
    if (tau >= cfg.domain.tau0) return Termination::HitH1;
    if (mu <= -cfg.domain.delta) return Termination::HitH2;
    if (mu >= 1.0 - 1e-9) return Termination::LeftChart;
    int m = n - 1;
    Eigen::Map<const Vec> eta(x.data() + 4 + m, m);
    double fiber = std::abs(xi) + std::abs(x[3]) + eta.norm();
    if (fiber > 1e8) {
      // Fiber-homogeneous flow: rescaling keeps the state representable.
      x[2] /= fiber;
      x[3] /= fiber;
      for (int i = 4 + m; i < 4 + 2 * m; ++i) x[i] /= fiber;
    }
    if (xi != 0.0) {
      double resid = std::abs(mu) + tau +
                     eta.norm() / std::abs(x[2]) + std::abs(x[3]) / std::abs(x[2]);
      if (resid < cfg.radial_neighborhood)
        return x[2] > 0 ? Termination::ConvergedToLplus
                        : Termination::ConvergedToLminus;
    }
  }
  return Termination::MaxSteps;
}

}  // namespace

CotangentPoint random_characteristic_seed(int n, const Domain& dom,
                                          int component,
                                          std::uint64_t seed_value) {
  std::mt19937_64 rng(seed_value);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int m = n - 1;
  double limit = std::sqrt(1.0 + 0.9 * dom.delta);
  Vec Y(m);
  for (;;) {
    for (int i = 0; i < m; ++i) Y[i] = limit * (2.0 * unif(rng) - 1.0);
    if (Y.norm() <= limit) break;
  }
  double tau = (unif(rng) < 0.3) ? 0.0 : 0.9 * dom.tau0 * unif(rng);
  Vec zeta(m);
  do {
    for (int i = 0; i < m; ++i) zeta[i] = gauss(rng);
  } while (zeta.norm() < 1e-8);
  zeta.normalize();
  double sigma = Y.dot(zeta) + component;  // |zeta| = 1: puts p = 0 exactly
  CotangentPoint pt;
  pt.base = ChartPoint::center(n, std::move(Y), tau);
  pt.fiber = Covector::center(std::move(zeta), sigma);
  return pt;
}

ScanReport nontrapping_scan(const ScanConfig& cfg) {
  int per = cfg.seeds_per_component;
  int total = 2 * per;
  std::vector<Termination> outcome(total, Termination::MaxSteps);
  std::vector<std::string> errors(total);

  auto work = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      int component = i < per ? +1 : -1;
      std::uint64_t seed_value =
          cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(i);
      try {
        CotangentPoint seed =
            random_characteristic_seed(cfg.n, cfg.domain, component, seed_value);
        if (cfg.perturbed) {
          ChartPoint h = to_horizon(seed.base);
          Covector cv = to_horizon(seed.base, seed.fiber);
          State x(4 + 2 * (cfg.n - 1), 0.0);
          x[0] = h.mu;
          x[1] = h.tau;
          x[2] = cv.xi;
          x[3] = cv.sigma;
          for (int k = 0; k < cfg.n - 1; ++k) x[4 + k] = h.omega[k];
          for (int k = 0; k < cfg.n - 1; ++k) x[4 + cfg.n - 1 + k] = cv.eta[k];
          // Re-project sigma onto the perturbed characteristic set.
          double A = cfg.perturbed->A(h.mu), B = cfg.perturbed->B(h.mu),
                 C = cfg.perturbed->C(h.mu), S = cfg.perturbed->S(h.mu);
          double eta2 = cv.eta.squaredNorm();
          double disc = B * B * cv.xi * cv.xi - C * (A * cv.xi * cv.xi - eta2 / S);
          if (disc < 0.0) throw ChartDomainError("no characteristic sigma");
          double root = (-B * cv.xi + component * std::sqrt(disc)) / C;
          x[3] = root;
          outcome[i] = run_perturbed(*cfg.perturbed, std::move(x), cfg.n, cfg);
        } else {
          IntegrateOptions opt = cfg.integrate;
          opt.domain = cfg.domain;
          opt.sample_stride = 1u << 30;  // scan keeps no per-step samples
          Trajectory t = integrate(seed, FlowDirection::Forward, opt);
          outcome[i] = t.termination;
        }
      } catch (const Error& e) {
        errors[i] = std::string(e.category()) + ": " + e.what();
      }
    }
  };

  int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    int chunk = (total + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      int lo = w * chunk, hi = std::min(total, lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  ScanReport rep;
  rep.total = total;
  for (int i = 0; i < total; ++i) {
    if (!errors[i].empty()) {
      rep.failures.push_back("seed " + std::to_string(i) + ": " + errors[i]);
      continue;
    }
    switch (outcome[i]) {
      case Termination::HitH1: ++rep.reached_H1; break;
      case Termination::HitH2: ++rep.reached_H2; break;
      case Termination::ConvergedToLplus:
      case Termination::ConvergedToLminus:
        if (cfg.perturbed) ++rep.neighborhood_hits;
        else ++rep.converged_radial;
        break;
      default:
        rep.failures.push_back("seed " + std::to_string(i) + ": " +
                               to_string(outcome[i]));
    }
  }
  if (cfg.perturbed) rep.converged_radial = rep.neighborhood_hits;
  return rep;
}

}  // namespace dsw
