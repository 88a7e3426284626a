#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dsw/metric.hpp"

using namespace dsw;

namespace {

Vec e(int i, int m) {
  Vec v = Vec::Zero(m);
  v[i] = 1.0;
  return v;
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("dual quadratic form: pinned horizon-chart values") {
  // At mu = 0 the dmu direction is null: p(xi dmu) = 0.
  auto pt = ChartPoint::horizon(4, 0.0, e(0, 3), 0.5);
  CHECK(dual_quadform(pt, Covector::horizon(1.0, Vec::Zero(3), 0.0)) == 0.0);

  // The zero covector is characteristic everywhere.
  CHECK(dual_quadform(pt, Covector::horizon(0.0, Vec::Zero(3), 0.0)) == 0.0);

  // xi = 1, sigma = -4 at mu = 0: 4 r^2 sigma xi + sigma^2 = -16 + 16 = 0.
  CHECK(dual_quadform(pt, Covector::horizon(1.0, Vec::Zero(3), -4.0)) ==
        doctest::Approx(0.0).epsilon(1e-14));

  // Generic value, frozen: mu = 0.19, xi = 1.5, sigma = 0.7, |eta| = 0.4:
  //   -4 (0.81)(0.19)(2.25) + 4 (0.81)(0.7)(1.5) + 0.49 - 0.16/0.81
  auto pt2 = ChartPoint::horizon(4, 0.19, e(0, 3), 0.2);
  auto cv2 = Covector::horizon(1.5, 0.4 * e(1, 3), 0.7);
  CHECK(std::abs(dual_quadform(pt2, cv2) - 2.3093691358024691) < 1e-13);
}

TEST_CASE("dual quadratic form: pinned center-chart value") {
  auto pt = ChartPoint::center(4, vec3(0.3, -0.2, 0.1), 0.4);
  auto cv = Covector::center(vec3(1.0, 2.0, -1.0), 0.5);
  // (Y.zeta - sigma)^2 - |zeta|^2 = (-0.2 - 0.5)^2 - 6 = -5.51
  CHECK(std::abs(dual_quadform(pt, cv) - (-5.51)) < 1e-13);
}

TEST_CASE("chart transitions: pinned images and round trips") {
  auto pt = ChartPoint::horizon(4, 0.0, e(0, 3), 0.3);
  auto cv = Covector::horizon(1.0, 0.4 * e(1, 3), 0.3);

  auto ptc = to_center(pt);
  CHECK((ptc.Y - e(0, 3)).norm() < 1e-14);  // Y = r omega, r = 1

  auto cvc = to_center(pt, cv);
  // zeta = -2 r xi omega + eta / r = (-2, 0.4, 0); sigma unchanged.
  CHECK(std::abs(cvc.zeta[0] - (-2.0)) < 1e-14);
  CHECK(std::abs(cvc.zeta[1] - 0.4) < 1e-14);
  CHECK(std::abs(cvc.zeta[2]) < 1e-14);
  CHECK(cvc.sigma == cv.sigma);

  auto ptb = to_horizon(ptc);
  auto cvb = to_horizon(ptc, cvc);
  CHECK(std::abs(ptb.mu - pt.mu) < 1e-12);
  CHECK((ptb.omega - pt.omega).norm() < 1e-12);
  CHECK(std::abs(cvb.xi - cv.xi) < 1e-12);
  CHECK((cvb.eta - cv.eta).norm() < 1e-12);
  CHECK(std::abs(cvb.sigma - cv.sigma) < 1e-12);
}

TEST_CASE("chart overlap: quadratic form agrees on 10^4 random covectors") {
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    double mu = -0.1 + 1.08 * unif(rng);  // stay away from r = 0
    Vec omega(3);
    do {
      for (int i = 0; i < 3; ++i) omega[i] = gauss(rng);
    } while (omega.norm() < 1e-6);
    omega.normalize();
    Vec eta(3);
    for (int i = 0; i < 3; ++i) eta[i] = gauss(rng);
    eta -= eta.dot(omega) * omega;
    double xi = 3.0 * gauss(rng), sigma = 3.0 * gauss(rng);

    auto pt = ChartPoint::horizon(4, mu, omega, unif(rng));
    auto cv = Covector::horizon(xi, eta, sigma);
    double ph = dual_quadform(pt, cv);
    double pc = dual_quadform(to_center(pt), to_center(pt, cv));
    worst = std::max(worst, std::abs(ph - pc) / (1.0 + std::abs(ph)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("boundary covector characters are pinned") {
  Domain dom;  // delta = 0.1, tau0 = 1
  // dtau/tau has G-square 1 everywhere.
  auto interior = ChartPoint::horizon(4, 0.3, e(0, 3), 0.5);
  CHECK(std::abs(timelike_character(BoundaryCovector::DtauOverTau, interior,
                                    dom) - 1.0) < 1e-14);

  // d t2 = dmu on H2 (mu = -delta): 4 delta (1 + delta) = 0.44.
  auto on_h2 = ChartPoint::horizon(4, -0.1, e(0, 3), 0.5);
  CHECK(std::abs(timelike_character(BoundaryCovector::Dt2, on_h2, dom) -
                 0.44) < 1e-14);

  // d t1 = -dtau on H1 (tau = tau0): tau0^2.
  auto on_h1 = ChartPoint::horizon(4, 0.3, e(0, 3), 1.0);
  CHECK(std::abs(timelike_character(BoundaryCovector::Dt1, on_h1, dom) -
                 1.0) < 1e-14);

  // Polarized cross pairing at the corner: -4 (1 + delta) tau0 = -4.4.
  auto corner = ChartPoint::horizon(4, -0.1, e(0, 3), 1.0);
  CHECK(std::abs(timelike_character(BoundaryCovector::Dt1,
                                    BoundaryCovector::Dt2, corner, dom) -
                 (-4.4)) < 1e-14);
}

TEST_CASE("b-frame coefficients invert the dual block") {
  auto gc = static_de_sitter_coeffs();
  CHECK(std::abs(gc.g_mumu(0.5) - (-0.5)) < 1e-15);
  CHECK(std::abs(gc.g_mutau(0.5) - 0.5) < 1e-15);
  CHECK(std::abs(gc.g_tautau(0.5) - 0.5) < 1e-15);
  CHECK(std::abs(gc.g_sphere(0.5) - 1.0) < 1e-15);

  for (double mu : {-0.05, 0.3, 0.9}) {
    double r2 = 1.0 - mu;
    Eigen::Matrix2d g;
    g << gc.g_mumu(mu), gc.g_mutau(mu), gc.g_mutau(mu), gc.g_tautau(mu);
    Eigen::Matrix2d G;  // dual block in (xi, sigma)
    G << -4.0 * r2 * mu, 2.0 * r2, 2.0 * r2, 1.0;
    CHECK((g * G - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("metric_at assembles the full b-frame matrix") {
  auto fam = MetricFamily::static_de_sitter(4);
  auto pt = ChartPoint::horizon(4, 0.5, e(0, 3), 0.2);
  Eigen::MatrixXd g = metric_at(fam, 0.0, pt);
  REQUIRE(g.rows() == 4);
  Eigen::MatrixXd expect(4, 4);
  expect << -0.5, 0.5, 0.0, 0.0,
             0.5, 0.5, 0.0, 0.0,
             0.0, 0.0, -1.0, 0.0,
             0.0, 0.0, 0.0, -1.0;
  CHECK((g - expect).norm() < 1e-14);
}

TEST_CASE("conformal family scales the static metric") {
  auto fam = MetricFamily::conformal(
      [](double u) { return 1.0 + 0.1 * u; }, 4);
  auto pt = ChartPoint::horizon(4, 0.5, e(0, 3), 0.2);
  Eigen::MatrixXd g1 = metric_at(fam, 1.0, pt);
  Eigen::MatrixXd g0 = metric_at(fam, 0.0, pt);
  CHECK((g1 - 1.1 * g0).norm() < 1e-13);
}

TEST_CASE("polynomial family combines generators") {
  auto base = static_de_sitter_coeffs();
  BMetricCoeffs bump;
  bump.g_mumu = [](double mu) { return 0.05 * mu; };
  bump.g_mutau = [](double) { return 0.0; };
  bump.g_tautau = [](double) { return 0.02; };
  bump.g_sphere = [](double) { return 0.0; };
  auto fam = MetricFamily::polynomial(
      {[](double) { return 1.0; }, [](double u) { return u * u; }},
      {base, bump}, 4);
  double cf[4];
  fam.coeffs_at(2.0, 0.5, cf);
  CHECK(std::abs(cf[0] - (-0.5 + 4.0 * 0.025)) < 1e-14);
  CHECK(std::abs(cf[1] - 0.5) < 1e-14);
  CHECK(std::abs(cf[2] - (0.5 + 0.08)) < 1e-14);
  CHECK(std::abs(cf[3] - 1.0) < 1e-14);
}

TEST_CASE("signature check rejects a non-Lorentzian matrix") {
  BMetricCoeffs bad;
  bad.g_mumu = [](double) { return -1.0; };
  bad.g_mutau = [](double) { return 0.0; };
  bad.g_tautau = [](double) { return -1.0; };
  bad.g_sphere = [](double) { return 1.0; };
  auto fam = MetricFamily::polynomial({[](double) { return 1.0; }}, {bad}, 4);
  auto pt = ChartPoint::horizon(4, 0.5, e(0, 3), 0.2);
  CHECK_THROWS_AS(metric_at(fam, 0.0, pt), SignatureError);
}

TEST_CASE("chart validation") {
  CHECK_THROWS_AS(ChartPoint::horizon(4, 1.0, e(0, 3), 0.0),
                  ChartDomainError);
  CHECK_THROWS_AS(ChartPoint::horizon(4, 0.0, e(0, 3), -0.5),
                  ChartDomainError);
  CHECK_THROWS_AS(ChartPoint::horizon(4, 0.0, 2.0 * e(0, 3), 0.0),
                  ChartDomainError);
  CHECK_THROWS_AS(to_horizon(ChartPoint::center(4, Vec::Zero(3), 0.1)),
                  ChartDomainError);

  CotangentPoint at_center_face;
  at_center_face.base = ChartPoint::horizon(4, 0.2, e(0, 3), 0.1);
  at_center_face.fiber = Covector::horizon(0.0, Vec::Zero(3), 1.0);
  CHECK(!at_center_face.has_rescaled());
  CHECK_THROWS_AS(at_center_face.rho_hat(), ChartDomainError);
}

TEST_CASE("domain membership") {
  Domain dom;
  CHECK(dom.contains(ChartPoint::horizon(4, 0.3, e(0, 3), 0.5)));
  CHECK(!dom.contains(ChartPoint::horizon(4, 0.3, e(0, 3), 1.5)));
  CHECK(!dom.contains(ChartPoint::horizon(4, -0.2, e(0, 3), 0.5)));
  CHECK(std::abs(dom.t2(ChartPoint::horizon(4, -0.1, e(0, 3), 0.0))) <
        1e-15);
}
