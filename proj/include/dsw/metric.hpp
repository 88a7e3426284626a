// The static de Sitter b-metric, its dual quadratic form, metric
// perturbation families, and the domain with its spacelike boundaries.
//
// Dual metric (quadratic form on b-covectors):
//   p = -4 r^2 mu xi^2 + 4 r^2 sigma xi + sigma^2 - r^{-2} |eta|^2
//     = (Y.zeta - sigma)^2 - |zeta|^2                 (center chart)
// b-frame components of the metric itself, in the coframe
// (dmu, dtau/tau, r domega):
//   g_mumu = -1/(4 r^2), g_mutau = 1/2, g_tautau = mu, sphere block = -Id.
#pragma once

#include <functional>

#include <Eigen/Dense>

#include "dsw/chart.hpp"

namespace dsw {

// Evaluate the dual quadratic form p at (pt, cv).  Both chart formulas are
// implemented; they agree on the chart overlap.
double dual_quadform(const ChartPoint& pt, const Covector& cv);

// Polarized pairing G(a, b) reported as q(a+b) - q(a) - q(b); diagonal
// entries G(a, a) = q(a).  (Cross pairings are twice the symmetric bilinear
// form; this is the convention used for the boundary-character table.)
double dual_pairing(const ChartPoint& pt, const Covector& a,
                    const Covector& b);

// Domain Omega = {t1 >= 0} n {t2 >= 0} with boundary defining functions
// t1 = tau0 - tau (initial slice H1), t2 = mu + delta (outer slice H2).
struct Domain {
  double delta = 0.1;
  double tau0 = 1.0;

  double t1(const ChartPoint& pt) const { return tau0 - pt.tau; }
  double t2(const ChartPoint& pt) const { return (1.0 - pt.r2()) + delta; }
  bool contains(const ChartPoint& pt) const {
    return t1(pt) >= 0.0 && t2(pt) >= 0.0;
  }
};

// One of the three reference covectors whose timelike character certifies
// the causal setup of the domain.
enum class BoundaryCovector { DtauOverTau, Dt1, Dt2 };

// G-norm-squared of the covector at a point on the relevant zero set.
double timelike_character(BoundaryCovector cov, const ChartPoint& pt,
                          const Domain& dom);
// Cross pairing (polarized, see dual_pairing) of two boundary covectors.
double timelike_character(BoundaryCovector a, BoundaryCovector b,
                          const ChartPoint& pt, const Domain& dom);

// ---------------------------------------------------------------------------
// Metric perturbation families g(u).

// Coefficients of a b-metric in the (dmu, dtau/tau, r domega) coframe,
// as functions of mu: the symmetric 2x2 block on (dmu, dtau/tau) plus the
// scalar multiple of the round sphere block.
struct BMetricCoeffs {
  std::function<double(double)> g_mumu;
  std::function<double(double)> g_mutau;
  std::function<double(double)> g_tautau;
  std::function<double(double)> g_sphere;  // multiplies -(r domega)^2
};

BMetricCoeffs static_de_sitter_coeffs();

struct MetricFamily {
  enum class Kind { Polynomial, Conformal };

  int n = 4;
  Kind kind = Kind::Conformal;
  double delta = 0.1;
  double tau0 = 1.0;

  // Polynomial: g(u) = sum_k c_k(u) g_k.
  std::vector<std::function<double(double)>> c;  // c_k(u)
  std::vector<BMetricCoeffs> g;                  // g_k

  // Conformal: g(u) = mu_fn(u) * g0.
  std::function<double(double)> mu_fn;
  BMetricCoeffs g0;

  static MetricFamily static_de_sitter(int n = 4, double delta = 0.1,
                                       double tau0 = 1.0);
  static MetricFamily conformal(std::function<double(double)> mu_fn, int n = 4,
                                double delta = 0.1, double tau0 = 1.0);
  static MetricFamily polynomial(std::vector<std::function<double(double)>> c,
                                 std::vector<BMetricCoeffs> g, int n = 4,
                                 double delta = 0.1, double tau0 = 1.0);

  Domain domain() const { return Domain{delta, tau0}; }

  // Metric coefficients of g(u) at mu, in the same coframe layout.
  // (block + sphere scalar; the full matrix is assembled by metric_at).
  void coeffs_at(double u_value, double mu, double out[4]) const;
};

// Full (n x n) b-frame matrix of g(u) at the point; throws SignatureError
// if the result is not Lorentzian of signature (1, n-1).
Eigen::MatrixXd metric_at(const MetricFamily& fam, double u_value,
                          const ChartPoint& pt);

// Signature check used by metric_at; exposed for grid sweeps.
void check_lorentzian(const Eigen::MatrixXd& g);

}  // namespace dsw
