#include "dsw/metric.hpp"

#include <cmath>

namespace dsw {

double dual_quadform(const ChartPoint& pt, const Covector& cv) {
  if (cv.chart == Chart::Center) {
    const ChartPoint c = to_center(pt);
    double a = c.Y.dot(cv.zeta) - cv.sigma;
    return a * a - cv.zeta.squaredNorm();
  }
  // Horizon chart.
  double r2 = 1.0 - pt.mu;
  double eta2 = cv.eta.size() ? cv.eta.squaredNorm() : 0.0;
  if (r2 <= 0.0) {
    if (eta2 != 0.0)
      throw ChartDomainError(
          "dual_quadform: r^{-2}|eta|^2 singular at mu >= 1 with eta != 0");
    // eta = 0: the angular term vanishes and the rest extends continuously.
    return -4.0 * r2 * pt.mu * cv.xi * cv.xi + 4.0 * r2 * cv.sigma * cv.xi +
           cv.sigma * cv.sigma;
  }
  return -4.0 * r2 * pt.mu * cv.xi * cv.xi + 4.0 * r2 * cv.sigma * cv.xi +
         cv.sigma * cv.sigma - eta2 / r2;
}

double dual_pairing(const ChartPoint& pt, const Covector& a,
                    const Covector& b) {
  if (a.chart != b.chart)
    throw ChartDomainError("dual_pairing: covectors must share a chart");
  Covector sum = a;
  if (a.chart == Chart::Horizon) {
    sum.xi += b.xi;
    sum.sigma += b.sigma;
    if (sum.eta.size() == 0) sum.eta = b.eta;
    else if (b.eta.size()) sum.eta += b.eta;
  } else {
    sum.sigma += b.sigma;
    sum.zeta += b.zeta;
  }
  return dual_quadform(pt, sum) - dual_quadform(pt, a) - dual_quadform(pt, b);
}

namespace {
Covector boundary_covector(BoundaryCovector which, const ChartPoint& pt,
                           int n) {
  Vec zero = Vec::Zero(n - 1);
  switch (which) {
    case BoundaryCovector::DtauOverTau:
      return Covector::horizon(0.0, zero, 1.0);
    case BoundaryCovector::Dt1:
      // t1 = tau0 - tau, so b-d t1 = -tau dtau/tau.
      return Covector::horizon(0.0, zero, -pt.tau);
    case BoundaryCovector::Dt2:
      // t2 = mu + delta, so d t2 = dmu.
      return Covector::horizon(1.0, zero, 0.0);
  }
  throw ChartDomainError("unknown boundary covector");
}
}  // namespace

double timelike_character(BoundaryCovector cov, const ChartPoint& pt,
                          const Domain& dom) {
  (void)dom;
  ChartPoint h = to_horizon(pt);
  return dual_quadform(h, boundary_covector(cov, h, h.n));
}

double timelike_character(BoundaryCovector a, BoundaryCovector b,
                          const ChartPoint& pt, const Domain& dom) {
  (void)dom;
  ChartPoint h = to_horizon(pt);
  return dual_pairing(h, boundary_covector(a, h, h.n),
                      boundary_covector(b, h, h.n));
}

// ---------------------------------------------------------------------------

BMetricCoeffs static_de_sitter_coeffs() {
  BMetricCoeffs g;
  g.g_mumu = [](double mu) { return -1.0 / (4.0 * (1.0 - mu)); };
  g.g_mutau = [](double) { return 0.5; };
  g.g_tautau = [](double mu) { return mu; };
  g.g_sphere = [](double) { return 1.0; };
  return g;
}

MetricFamily MetricFamily::static_de_sitter(int n, double delta, double tau0) {
  return conformal([](double) { return 1.0; }, n, delta, tau0);
}

MetricFamily MetricFamily::conformal(std::function<double(double)> mu_fn,
                                     int n, double delta, double tau0) {
  MetricFamily fam;
  fam.n = n;
  fam.kind = Kind::Conformal;
  fam.delta = delta;
  fam.tau0 = tau0;
  fam.mu_fn = std::move(mu_fn);
  fam.g0 = static_de_sitter_coeffs();
  return fam;
}

MetricFamily MetricFamily::polynomial(
    std::vector<std::function<double(double)>> c,
    std::vector<BMetricCoeffs> g, int n, double delta, double tau0) {
  if (c.size() != g.size())
    throw ConfigError("polynomial family needs matching c_k and g_k lists");
  MetricFamily fam;
  fam.n = n;
  fam.kind = Kind::Polynomial;
  fam.delta = delta;
  fam.tau0 = tau0;
  fam.c = std::move(c);
  fam.g = std::move(g);
  return fam;
}

void MetricFamily::coeffs_at(double u_value, double mu, double out[4]) const {
  out[0] = out[1] = out[2] = out[3] = 0.0;
  if (kind == Kind::Conformal) {
    double m = mu_fn(u_value);
    out[0] = m * g0.g_mumu(mu);
    out[1] = m * g0.g_mutau(mu);
    out[2] = m * g0.g_tautau(mu);
    out[3] = m * g0.g_sphere(mu);
    return;
  }
  for (size_t k = 0; k < c.size(); ++k) {
    double ck = c[k](u_value);
    out[0] += ck * g[k].g_mumu(mu);
    out[1] += ck * g[k].g_mutau(mu);
    out[2] += ck * g[k].g_tautau(mu);
    out[3] += ck * g[k].g_sphere(mu);
  }
}

void check_lorentzian(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  int pos = 0, neg = 0;
  for (int i = 0; i < g.rows(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev > 0) ++pos;
    else if (ev < 0) ++neg;
  }
  if (pos != 1 || neg != g.rows() - 1)
    throw SignatureError("metric signature is not Lorentzian (1, n-1)");
}

Eigen::MatrixXd metric_at(const MetricFamily& fam, double u_value,
                          const ChartPoint& pt) {
  ChartPoint h = to_horizon(pt);  // b-frame needs r > 0
  double cf[4];
  fam.coeffs_at(u_value, h.mu, cf);
  int n = fam.n;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g(0, 0) = cf[0];
  g(0, 1) = g(1, 0) = cf[1];
  g(1, 1) = cf[2];
  for (int i = 2; i < n; ++i) g(i, i) = -cf[3];
  check_lorentzian(g);
  return g;
}

}  // namespace dsw
