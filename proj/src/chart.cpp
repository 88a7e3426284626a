#include "dsw/chart.hpp"

#include <cmath>

namespace dsw {

namespace {
void check_dim(int n) {
  if (n < 2) throw ChartDomainError("spacetime dimension must be >= 2");
}
}  // namespace

ChartPoint ChartPoint::horizon(int n, double mu, Vec omega, double tau) {
  check_dim(n);
  if (omega.size() != n - 1)
    throw ChartDomainError("omega must be an embedding vector of size n-1");
  if (mu >= 1.0)
    throw ChartDomainError("horizon chart requires mu < 1 (r > 0)");
  if (tau < 0.0) throw ChartDomainError("tau must be nonnegative");
  double norm = omega.norm();
  if (std::abs(norm - 1.0) > 1e-8)
    throw ChartDomainError("omega must be a unit vector");
  ChartPoint pt;
  pt.chart = Chart::Horizon;
  pt.n = n;
  pt.mu = mu;
  pt.omega = omega / norm;
  pt.tau = tau;
  return pt;
}

ChartPoint ChartPoint::center(int n, Vec Y, double tau) {
  check_dim(n);
  if (Y.size() != n - 1)
    throw ChartDomainError("Y must have size n-1");
  if (tau < 0.0) throw ChartDomainError("tau must be nonnegative");
  ChartPoint pt;
  pt.chart = Chart::Center;
  pt.n = n;
  pt.Y = std::move(Y);
  pt.tau = tau;
  return pt;
}

double ChartPoint::r2() const {
  return chart == Chart::Horizon ? 1.0 - mu : Y.squaredNorm();
}

double ChartPoint::r() const { return std::sqrt(r2()); }

Covector Covector::horizon(double xi, Vec eta, double sigma) {
  Covector cv;
  cv.chart = Chart::Horizon;
  cv.xi = xi;
  cv.eta = std::move(eta);
  cv.sigma = sigma;
  return cv;
}

Covector Covector::center(Vec zeta, double sigma) {
  Covector cv;
  cv.chart = Chart::Center;
  cv.zeta = std::move(zeta);
  cv.sigma = sigma;
  return cv;
}

ChartPoint to_center(const ChartPoint& pt) {
  if (pt.chart == Chart::Center) return pt;
  return ChartPoint::center(pt.n, pt.r() * pt.omega, pt.tau);
}

ChartPoint to_horizon(const ChartPoint& pt) {
  if (pt.chart == Chart::Horizon) return pt;
  double r = pt.Y.norm();
  if (r <= 0.0)
    throw ChartDomainError("horizon chart degenerates at the center r = 0");
  return ChartPoint::horizon(pt.n, 1.0 - r * r, pt.Y / r, pt.tau);
}

// Covector transition.  With Y = r omega and dmu = -2r dr the pairing
// xi dmu + eta domega = zeta dY forces
//   zeta = -2 r xi omega + eta / r,
//   xi   = -(zeta . omega) / (2r),   eta = r (zeta - (zeta . omega) omega).
Covector to_center(const ChartPoint& pt, const Covector& cv) {
  if (cv.chart == Chart::Center) return cv;
  ChartPoint h = to_horizon(pt);
  double r = h.r();
  if (r <= 0.0)
    throw ChartDomainError("covector conversion needs r > 0");
  Vec zeta = -2.0 * r * cv.xi * h.omega + cv.eta / r;
  return Covector::center(std::move(zeta), cv.sigma);
}

Covector to_horizon(const ChartPoint& pt, const Covector& cv) {
  if (cv.chart == Chart::Horizon) return cv;
  ChartPoint h = to_horizon(pt);  // throws at r = 0
  double r = h.r();
  double radial = cv.zeta.dot(h.omega);
  double xi = -radial / (2.0 * r);
  Vec eta = r * (cv.zeta - radial * h.omega);
  return Covector::horizon(xi, std::move(eta), cv.sigma);
}

bool CotangentPoint::has_rescaled() const {
  return fiber.chart == Chart::Horizon && fiber.xi != 0.0;
}

double CotangentPoint::rho_hat() const {
  if (!has_rescaled())
    throw ChartDomainError("rescaled coordinates need xi != 0");
  return 1.0 / fiber.xi;
}

Vec CotangentPoint::eta_hat() const {
  if (!has_rescaled())
    throw ChartDomainError("rescaled coordinates need xi != 0");
  return fiber.eta / fiber.xi;
}

double CotangentPoint::sigma_hat() const {
  if (!has_rescaled())
    throw ChartDomainError("rescaled coordinates need xi != 0");
  return fiber.sigma / fiber.xi;
}

}  // namespace dsw
