#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dsw/hamilton.hpp"

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

CotangentPoint radial_point(int n, double xi) {
  CotangentPoint pt;
  pt.base = ChartPoint::horizon(n, 0.0, e(0, n - 1), 0.0);
  pt.fiber = Covector::horizon(xi, Vec::Zero(n - 1), 0.0);
  return pt;
}

}  // namespace

TEST_CASE("hamilton field at the radial set generates 4 xi^2 d_xi + 4 xi tau d_tau") {
  auto f = hamilton_field(radial_point(4, 1.0));
  CHECK(f.dmu == 0.0);
  CHECK(f.dxi == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(f.tau_coeff == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(f.dsigma == 0.0);
  CHECK(f.domega.norm() == 0.0);
  CHECK(f.deta.norm() == 0.0);

  // Fiber homogeneity degree 1 in the base components, 2 in d_xi.
  auto f3 = hamilton_field(radial_point(4, 3.0));
  CHECK(f3.dxi == doctest::Approx(36.0).epsilon(1e-14));
  CHECK(f3.tau_coeff == doctest::Approx(12.0).epsilon(1e-14));
}

TEST_CASE("hamilton field: pinned generic horizon-chart value") {
  CotangentPoint pt;
  pt.base = ChartPoint::horizon(4, 0.19, e(0, 3), 0.2);
  pt.fiber = Covector::horizon(1.5, 0.4 * e(1, 3), 0.7);
  auto f = hamilton_field(pt);
  CHECK(std::abs(f.dmu - 0.4212) < 1e-13);
  CHECK(std::abs(f.dxi - 10.023865264441396) < 1e-12);
  CHECK(std::abs(f.tau_coeff - 6.26) < 1e-13);
  CHECK(f.dsigma == 0.0);
  CHECK(std::abs(f.domega[1] - (-0.98765432098765432)) < 1e-13);
  CHECK(std::abs(f.domega[0]) < 1e-15);
  CHECK(std::abs(f.deta[0] - 0.39506172839506173) < 1e-13);
}

TEST_CASE("hamilton field: pinned center-chart value") {
  CotangentPoint pt;
  pt.base = ChartPoint::center(4, vec3(0.3, -0.2, 0.1), 0.4);
  pt.fiber = Covector::center(vec3(1.0, 2.0, -1.0), 0.5);
  auto f = hamilton_field(pt);
  // q = Y.zeta - sigma = -0.7
  CHECK((f.dY - vec3(-2.42, -3.72, 1.86)).norm() < 1e-13);
  CHECK((f.dzeta - vec3(1.4, 2.8, -1.4)).norm() < 1e-13);
  CHECK(std::abs(f.tau_coeff - 1.4) < 1e-14);
  CHECK(f.dsigma == 0.0);
}

TEST_CASE("radial set residual") {
  CHECK(radial_set_residual(radial_point(4, 2.0)) == 0.0);

  CotangentPoint pt;
  pt.base = ChartPoint::horizon(4, 0.19, e(0, 3), 0.2);
  pt.fiber = Covector::horizon(1.5, 0.4 * e(1, 3), 0.7);
  // |mu| + tau + |eta|/|xi| + |sigma|/|xi| = 0.19 + 0.2 + 1.1/1.5
  CHECK(std::abs(radial_set_residual(pt) - 1.1233333333333333) < 1e-13);

  CotangentPoint bad;
  bad.base = ChartPoint::horizon(4, 0.0, e(0, 3), 0.0);
  bad.fiber = Covector::horizon(0.0, Vec::Zero(3), 1.0);
  CHECK_THROWS_AS(radial_set_residual(bad), ChartDomainError);
}

TEST_CASE("rescaled drift vanishes exactly on the radial set") {
  CHECK(rescaled_drift(radial_point(4, 1.0)) < 1e-12);
  CHECK(rescaled_drift(radial_point(4, -2.5)) < 1e-12);
  CHECK(rescaled_drift(radial_point(2, 1.0)) < 1e-12);

  CotangentPoint off;
  off.base = ChartPoint::horizon(4, 0.1, e(0, 3), 0.0);
  off.fiber = Covector::horizon(1.0, Vec::Zero(3), 0.0);
  CHECK(rescaled_drift(off) > 0.1);
}

TEST_CASE("linearization eigenvalues at the radial set, n = 4") {
  auto ev = linearization_eigenvalues(radial_point(4, 3.0));
  REQUIRE(ev.size() == 8);
  const double expect[8] = {-8.0, -4.0, -4.0, -4.0, -4.0, 0.0, 0.0, 4.0};
  for (int i = 0; i < 8; ++i) CHECK(std::abs(ev[i] - expect[i]) < 1e-5);

  // The spectrum does not depend on where along the fiber ray it is taken.
  auto ev2 = linearization_eigenvalues(radial_point(4, 0.5));
  for (int i = 0; i < 8; ++i) CHECK(std::abs(ev2[i] - expect[i]) < 1e-5);
}

TEST_CASE("linearization eigenvalues at the radial set, n = 2") {
  auto ev = linearization_eigenvalues(radial_point(2, 1.0));
  REQUIRE(ev.size() == 4);
  const double expect[4] = {-8.0, -4.0, -4.0, 4.0};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(ev[i] - expect[i]) < 1e-5);
}

TEST_CASE("linearization rejects points away from the radial set") {
  CotangentPoint off;
  off.base = ChartPoint::horizon(4, 0.1, e(0, 3), 0.0);
  off.fiber = Covector::horizon(1.0, Vec::Zero(3), 0.0);
  CHECK_THROWS_AS(linearization_eigenvalues(off), ChartDomainError);
}

namespace {

CotangentPoint center_seed(Vec Y, double tau, Vec zeta, int component) {
  CotangentPoint pt;
  double sigma = Y.dot(zeta) + component * zeta.norm();
  pt.base = ChartPoint::center(4, std::move(Y), tau);
  pt.fiber = Covector::center(std::move(zeta), sigma);
  return pt;
}

}  // namespace

TEST_CASE("forward flow from the expanding component reaches the initial slice") {
  auto seed = center_seed(vec3(0.5, 0.0, 0.0), 0.2, vec3(0.0, 1.0, 0.0), +1);
  IntegrateOptions opt;
  auto traj = integrate(seed, FlowDirection::Forward, opt);
  CHECK(traj.termination == Termination::HitH1);
  CHECK(traj.component == +1);
  CHECK(traj.p_drift < 1e-8);
  CHECK(traj.sigma_drift < 1e-8);
  REQUIRE(traj.samples.size() >= 2);
  CHECK(traj.samples.front().s == 0.0);
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    CHECK(traj.samples[i].s >= traj.samples[i - 1].s);
  CHECK(traj.samples.back().base.tau >= opt.domain.tau0 * (1.0 - 1e-9));
}

TEST_CASE("forward flow from the contracting component leaves through H2 or the radial set") {
  auto seed = center_seed(vec3(0.5, 0.0, 0.0), 0.2, vec3(0.0, 1.0, 0.0), -1);
  auto traj = integrate(seed, FlowDirection::Forward, IntegrateOptions{});
  CHECK(traj.component == -1);
  bool ok = traj.termination == Termination::HitH2 ||
            traj.termination == Termination::ConvergedToLminus;
  CHECK(ok);
  CHECK(traj.p_drift < 1e-8);
  CHECK(traj.sigma_drift < 1e-8);
}

TEST_CASE("forward flow inside the tau = 0 face converges to the radial source") {
  auto seed = center_seed(vec3(0.5, 0.1, 0.0), 0.0, vec3(0.0, 1.0, 0.2), +1);
  auto traj = integrate(seed, FlowDirection::Forward, IntegrateOptions{});
  CHECK(traj.termination == Termination::ConvergedToLplus);
  // tau = 0 is invariant.
  for (const auto& s : traj.samples) CHECK(s.base.tau == 0.0);
  CHECK(traj.p_drift < 1e-8);
}

TEST_CASE("seeds off the characteristic set are rejected unless projected") {
  CotangentPoint off;
  off.base = ChartPoint::center(4, vec3(0.5, 0.0, 0.0), 0.2);
  off.fiber = Covector::center(vec3(0.0, 1.0, 0.0), 0.37);  // p != 0
  IntegrateOptions strict;
  strict.project_to_sigma = false;
  CHECK_THROWS_AS(integrate(off, FlowDirection::Forward, strict),
                  ChartDomainError);
  // With projection the sigma slot snaps to the nearest root of p = 0.
  auto traj = integrate(off, FlowDirection::Forward, IntegrateOptions{});
  CHECK(std::abs(traj.samples.front().p) < 1e-10);
}

TEST_CASE("random characteristic seeds are deterministic and characteristic") {
  Domain dom;
  auto a = random_characteristic_seed(4, dom, +1, 42);
  auto b = random_characteristic_seed(4, dom, +1, 42);
  CHECK((a.base.Y - b.base.Y).norm() == 0.0);
  CHECK(a.fiber.sigma == b.fiber.sigma);
  CHECK(std::abs(dual_quadform(a.base, a.fiber)) < 1e-12);
  auto c = random_characteristic_seed(4, dom, -1, 42);
  CHECK(c.fiber.sigma != a.fiber.sigma);
}

TEST_CASE("non-trapping scan: every trajectory is accounted for") {
  ScanConfig cfg;
  cfg.seeds_per_component = 25;
  cfg.workers = 2;
  auto rep = nontrapping_scan(cfg);
  CHECK(rep.total == 50);
  CHECK(rep.failures.empty());
  CHECK(rep.reached_H1 + rep.reached_H2 + rep.converged_radial == rep.total);
  CHECK(rep.reached_H1 > 0);

  // Merged reports are independent of the worker split.
  ScanConfig cfg1 = cfg;
  cfg1.workers = 1;
  auto rep1 = nontrapping_scan(cfg1);
  CHECK(rep1.reached_H1 == rep.reached_H1);
  CHECK(rep1.reached_H2 == rep.reached_H2);
  CHECK(rep1.converged_radial == rep.converged_radial);
}

TEST_CASE("general-coefficient scan reproduces the exact one for the static metric") {
  ScanConfig cfg;
  cfg.seeds_per_component = 10;
  cfg.perturbed = FlowCoefficients::static_de_sitter();
  auto rep = nontrapping_scan(cfg);
  CHECK(rep.total == 20);
  CHECK(rep.failures.empty());
  CHECK(rep.reached_H1 + rep.reached_H2 + rep.neighborhood_hits == rep.total);
}

TEST_CASE("perturbed scan on a conformal family stays non-trapped") {
  auto fam = MetricFamily::conformal([](double u) { return 1.0 + 0.2 * u; });
  ScanConfig cfg;
  cfg.seeds_per_component = 10;
  cfg.perturbed = FlowCoefficients::from_family(fam, 1.0);
  auto rep = nontrapping_scan(cfg);
  CHECK(rep.failures.empty());
  CHECK(rep.reached_H1 + rep.reached_H2 + rep.neighborhood_hits == rep.total);
}

TEST_CASE("flow coefficient tables match the closed forms") {
  auto fc = FlowCoefficients::static_de_sitter();
  auto fd = FlowCoefficients::from_family(MetricFamily::static_de_sitter(),
                                          0.0);
  for (double mu : {-0.05, 0.0, 0.4, 0.9}) {
    CHECK(std::abs(fc.A(mu) - fd.A(mu)) < 1e-10);
    CHECK(std::abs(fc.B(mu) - fd.B(mu)) < 1e-10);
    CHECK(std::abs(fc.C(mu) - fd.C(mu)) < 1e-10);
    CHECK(std::abs(fc.S(mu) - fd.S(mu)) < 1e-10);
    CHECK(std::abs(fc.dA(mu) - fd.dA(mu)) < 1e-6);
    CHECK(std::abs(fc.dB(mu) - fd.dB(mu)) < 1e-6);
    CHECK(std::abs(fc.dC(mu) - fd.dC(mu)) < 1e-6);
    CHECK(std::abs(fc.dS(mu) - fd.dS(mu)) < 1e-6);
  }
}
