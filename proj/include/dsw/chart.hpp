// Coordinate charts on the compactified static patch and its b-cotangent
// bundle.
//
// Horizon chart:  (mu, omega, tau) with mu in (-delta, 1), omega a unit
//                 vector on S^{n-2} (embedded in R^{n-1}), tau >= 0, and
//                 r^2 = 1 - mu.  Covectors are written
//                 xi dmu + eta domega + sigma dtau/tau with eta tangent to
//                 the sphere (eta . omega = 0).
// Center chart:   (Y, tau) with Y = r omega in R^{n-1}; covectors
//                 zeta dY + sigma dtau/tau.  This chart is global (it covers
//                 the center r = 0 where the horizon chart degenerates).
#pragma once

#include <Eigen/Dense>

#include "dsw/errors.hpp"

namespace dsw {

using Vec = Eigen::VectorXd;

enum class Chart { Horizon, Center };

struct ChartPoint {
  Chart chart = Chart::Horizon;
  int n = 4;     // spacetime dimension; sphere is S^{n-2} in R^{n-1}
  double mu = 0.0;
  Vec omega;     // unit vector, size n-1 (Horizon only)
  Vec Y;         // size n-1 (Center only)
  double tau = 0.0;

  static ChartPoint horizon(int n, double mu, Vec omega, double tau);
  static ChartPoint center(int n, Vec Y, double tau);

  double r2() const;  // 1 - mu in either chart
  double r() const;
};

struct Covector {
  Chart chart = Chart::Horizon;
  double xi = 0.0;
  Vec eta;       // size n-1, tangent to sphere (Horizon only)
  Vec zeta;      // size n-1 (Center only)
  double sigma = 0.0;

  static Covector horizon(double xi, Vec eta, double sigma);
  static Covector center(Vec zeta, double sigma);
};

// Chart transition maps.  Converting to the horizon chart requires r > 0.
ChartPoint to_center(const ChartPoint& pt);
ChartPoint to_horizon(const ChartPoint& pt);
Covector to_center(const ChartPoint& pt, const Covector& cv);
Covector to_horizon(const ChartPoint& pt, const Covector& cv);

// A point of the b-cotangent bundle.
struct CotangentPoint {
  ChartPoint base;
  Covector fiber;

  // Fiber-rescaled coordinates rho_hat = 1/xi, eta_hat = eta/xi,
  // sigma_hat = sigma/xi; defined only when xi != 0 (horizon chart).
  bool has_rescaled() const;
  double rho_hat() const;
  Vec eta_hat() const;
  double sigma_hat() const;
};

}  // namespace dsw
