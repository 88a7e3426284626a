#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "dsw/errors.hpp"
#include "dsw/fitting.hpp"
#include "dsw/resonance.hpp"

using namespace dsw;

TEST_CASE("complex log-gamma agrees with the real gamma function") {
  for (double x : {0.7, 1.0, 2.5, 5.3, 11.0}) {
    double got = std::exp(log_gamma(Cplx(x, 0.0))).real();
    CHECK(std::abs(got - std::tgamma(x)) < 1e-12 * std::tgamma(x));
  }
  // |Gamma(1+i)|^2 = pi / sinh(pi).
  double mod = std::abs(gamma(Cplx(1.0, 1.0)));
  CHECK(std::abs(mod - std::sqrt(M_PI / std::sinh(M_PI))) < 1e-12);
  // Reflection: Gamma(z) Gamma(1-z) sin(pi z) = pi.
  Cplx z(0.3, 0.4);
  Cplx lhs = gamma(z) * gamma(1.0 - z) * std::sin(M_PI * z);
  CHECK(std::abs(lhs - Cplx(M_PI, 0.0)) < 1e-12);
}

TEST_CASE("reciprocal gamma is entire with zeros at the poles") {
  CHECK(reciprocal_gamma(Cplx(-3.0, 0.0)) == Cplx(0.0, 0.0));
  CHECK(reciprocal_gamma(Cplx(0.0, 0.0)) == Cplx(0.0, 0.0));
  CHECK(std::abs(reciprocal_gamma(Cplx(1.0, 0.0)) - 1.0) < 1e-14);
  CHECK(std::abs(reciprocal_gamma(Cplx(0.5, 0.0)) - 1.0 / std::sqrt(M_PI)) <
        1e-14);
}

TEST_CASE("hypergeometric series reproduces closed forms") {
  // 2F1(a, b; b; z) = (1-z)^{-a}.
  double a = 0.37, z = 0.05;
  auto r = hyp2f1_series(Cplx(a, 0.0), Cplx(1.2, 0.0), Cplx(1.2, 0.0), z);
  CHECK(std::abs(r.value - std::pow(1.0 - z, -a)) < 1e-13);
  CHECK(std::abs(r.derivative - a * std::pow(1.0 - z, -a - 1.0)) < 1e-12);

  // 2F1(1, 1; 2; z) = -log(1-z)/z.
  auto r2 = hyp2f1_series(1.0, 1.0, 2.0, z);
  CHECK(std::abs(r2.value - (-std::log(1.0 - z) / z)) < 1e-13);
}

TEST_CASE("indicial roots at the pinned mass parameters") {
  auto [p0, m0] = indicial_roots(4, 0.0);
  CHECK(p0 == Cplx(0.0, 0.0));
  CHECK(m0 == Cplx(-3.0, 0.0));
  auto [p2, m2] = indicial_roots(4, 2.0);
  CHECK(std::abs(p2 - Cplx(-1.0, 0.0)) < 1e-14);
  CHECK(std::abs(m2 - Cplx(-2.0, 0.0)) < 1e-14);
  auto [pc, mc] = indicial_roots(4, 2.25);
  CHECK(std::abs(pc - Cplx(-1.5, 0.0)) < 1e-14);
  CHECK(pc == mc);
  auto [po, mo] = indicial_roots(4, 3.25);
  CHECK(std::abs(po - Cplx(-1.5, 1.0)) < 1e-14);
  CHECK(std::abs(mo - Cplx(-1.5, -1.0)) < 1e-14);
  // Vieta: the roots sum to -(n-1) exactly.
  CHECK(po + mo == Cplx(-3.0, 0.0));
}

TEST_CASE("analytic lattice: massless case") {
  auto lat = analytic_lattice(4, 0.0, 4);
  REQUIRE(!lat.entries.empty());
  CHECK(lat.entries[0].sigma == Cplx(0.0, 0.0));
  CHECK(lat.entries[0].multiplicity == 1);
  // Branch collision at -3i.
  bool found = false;
  for (const auto& e : lat.entries)
    if (std::abs(e.sigma - Cplx(0.0, -3.0)) < 1e-12) {
      CHECK(e.multiplicity == 2);
      found = true;
    }
  CHECK(found);
  // All nonzero entries decay at least like tau^1.
  for (const auto& e : lat.entries)
    if (std::abs(e.sigma) > 1e-12) CHECK(e.sigma.imag() <= -1.0 + 1e-12);
}

TEST_CASE("analytic lattice: double pole at the critical mass") {
  auto lat = analytic_lattice(4, 2.25, 3);
  CHECK(std::abs(lat.entries[0].sigma - Cplx(0.0, -1.5)) < 1e-12);
  CHECK(lat.entries[0].multiplicity == 2);
  for (const auto& e : lat.entries) CHECK(e.multiplicity == 2);
}

TEST_CASE("analytic lattice: lambda = 2 leading pole is simple") {
  auto lat = analytic_lattice(4, 2.0, 3);
  CHECK(std::abs(lat.entries[0].sigma - Cplx(0.0, -1.0)) < 1e-12);
  CHECK(lat.entries[0].multiplicity == 1);
}

TEST_CASE("analytic lattice: oscillatory masses come in mirror pairs") {
  auto lat = analytic_lattice(4, 3.25, 3);
  CHECK(std::abs(lat.entries[0].sigma - Cplx(-1.0, -1.5)) < 1e-12);
  CHECK(std::abs(lat.entries[1].sigma - Cplx(1.0, -1.5)) < 1e-12);
  for (const auto& e : lat.entries) {
    bool mirrored = false;
    for (const auto& f : lat.entries)
      if (std::abs(f.sigma + std::conj(e.sigma)) < 1e-12) mirrored = true;
    CHECK(mirrored);
  }
}

TEST_CASE("mode lattice thins by l and steps by 2") {
  auto l0 = mode_lattice(4, 0.0, 0, 3);
  REQUIRE(l0.size() >= 2);
  CHECK(std::abs(l0[0].sigma) < 1e-12);
  CHECK(std::abs(l0[1].sigma - Cplx(0.0, -2.0)) < 1e-12);
  // The spherically symmetric massless mode skips -i entirely.
  for (const auto& e : l0) CHECK(std::abs(e.sigma - Cplx(0.0, -1.0)) > 0.5);

  auto l1 = mode_lattice(4, 0.0, 1, 1);
  CHECK(std::abs(l1[0].sigma - Cplx(0.0, -1.0)) < 1e-12);
  CHECK(std::abs(l1[1].sigma - Cplx(0.0, -3.0)) < 1e-12);
}

TEST_CASE("mode wronskian matches the gamma-function closed form") {
  // lambda = 2, l = 0, sigma = -i/2: a = 3/4, b = 1/4, c = 3/2, and
  //   Z = -Gamma(c) / (Gamma(a) Gamma(b)) * y^{-c} (1-y)^{c-a-b-1}
  // at the matching radius y = 1/2, all arguments real.
  Cplx z = mode_wronskian(4, 2.0, 0, Cplx(0.0, -0.5));
  double expect = -std::tgamma(1.5) / (std::tgamma(0.75) * std::tgamma(0.25)) *
                  std::pow(2.0, 1.5) * std::pow(2.0, 0.5);
  CHECK(std::abs(z.real() - expect) < 1e-9 * std::abs(expect));
  CHECK(std::abs(z.imag()) < 1e-9 * std::abs(expect));

  // Purely imaginary sigma below the critical mass keeps everything real.
  Cplx z2 = mode_wronskian(4, 2.0, 0, Cplx(0.0, -0.7));
  CHECK(std::abs(z2.imag()) < 1e-9 * (1.0 + std::abs(z2)));

  // Mirror symmetry Z(-conj(sigma)) = conj(Z(sigma)) for real lambda.
  Cplx s(0.3, -0.7);
  Cplx zp = mode_wronskian(4, 3.25, 1, s);
  Cplx zm = mode_wronskian(4, 3.25, 1, -std::conj(s));
  CHECK(std::abs(zm - std::conj(zp)) < 1e-9 * (1.0 + std::abs(zp)));
}

TEST_CASE("mode wronskian vanishes exactly at mode resonances") {
  double scale = std::abs(mode_wronskian(4, 2.0, 0, Cplx(0.0, -0.5)));
  CHECK(std::abs(mode_wronskian(4, 2.0, 0, Cplx(0.0, -1.0))) < 1e-8 * scale);
  double scale0 = std::abs(mode_wronskian(4, 0.0, 0, Cplx(0.0, -0.5)));
  CHECK(std::abs(mode_wronskian(4, 0.0, 0, Cplx(0.0, 0.0))) < 1e-8 * scale0);
  // Non-resonant points stay away from zero.
  CHECK(std::abs(mode_wronskian(4, 2.0, 0, Cplx(0.0, -0.5))) > 1e-3);
}

TEST_CASE("numeric poles: lambda = 2, l = 0 finds -i and -2i") {
  SearchBox box{-0.5, 0.5, -2.5, 0.25};
  auto poles = numeric_poles(4, 2.0, 0, box);
  REQUIRE(poles.size() == 2);
  CHECK(std::abs(poles[0] - Cplx(0.0, -1.0)) < 1e-7);
  CHECK(std::abs(poles[1] - Cplx(0.0, -2.0)) < 1e-7);
}

TEST_CASE("numeric poles: massless spherical mode skips -i") {
  SearchBox box{-0.5, 0.5, -2.5, 0.25};
  auto poles = numeric_poles(4, 0.0, 0, box);
  REQUIRE(poles.size() == 2);
  CHECK(std::abs(poles[0]) < 1e-7);
  CHECK(std::abs(poles[1] - Cplx(0.0, -2.0)) < 1e-7);
  for (const auto& s : poles) CHECK(std::abs(s - Cplx(0.0, -1.0)) > 0.3);

  // ... but the l = 1 mode owns it.
  auto poles1 = numeric_poles(4, 0.0, 1, box);
  REQUIRE(poles1.size() == 1);
  CHECK(std::abs(poles1[0] - Cplx(0.0, -1.0)) < 1e-7);
}

TEST_CASE("numeric poles: double zero at the critical mass") {
  SearchBox box{-0.5, 0.5, -2.0, -1.0};
  auto poles = numeric_poles(4, 2.25, 0, box);
  REQUIRE(poles.size() == 1);
  CHECK(std::abs(poles[0] - Cplx(0.0, -1.5)) < 1e-5);
}

TEST_CASE("numeric poles: oscillatory pair straddles the axis") {
  SearchBox box{-1.5, 1.5, -2.0, -1.0};
  auto poles = numeric_poles(4, 3.25, 0, box);
  REQUIRE(poles.size() == 2);
  CHECK(std::abs(poles[0] - Cplx(-1.0, -1.5)) < 1e-7);
  CHECK(std::abs(poles[1] - Cplx(1.0, -1.5)) < 1e-7);
}

TEST_CASE("numeric poles: box away from the lattice returns nothing") {
  SearchBox box{5.0, 6.0, -0.5, -0.4};
  auto poles = numeric_poles(4, 0.0, 0, box);
  CHECK(poles.empty());
}

TEST_CASE("numeric poles sit on the analytic lattice") {
  auto lat = analytic_lattice(4, 2.0, 6);
  for (int l : {0, 1}) {
    auto poles = numeric_poles(4, 2.0, l, SearchBox{-0.5, 0.5, -2.5, 0.25});
    for (const auto& s : poles) {
      double best = 1e300;
      for (const auto& e : lat.entries)
        best = std::min(best, std::abs(s - e.sigma));
      CHECK(best < 1e-3);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

std::pair<std::vector<double>, std::vector<double>> sample(
    double t_lo, double t_hi, int m, const std::function<double(double)>& f) {
  std::vector<double> t(m), u(m);
  for (int i = 0; i < m; ++i) {
    t[i] = t_lo + (t_hi - t_lo) * i / (m - 1);
    u[i] = f(t[i]);
  }
  return {t, u};
}

}  // namespace

TEST_CASE("fit_decay: constant plus decay") {
  auto [t, u] = sample(2.0, 8.0, 600, [](double tt) {
    return 2.0 + 0.5 * std::exp(-tt);
  });
  auto fit = fit_decay(t, u, DecayModel::PowerPlusConstant);
  CHECK(std::abs(fit.constant - 2.0) < 1e-7);
  CHECK(std::abs(fit.exponent - 1.0) < 1e-5);
  CHECK(std::abs(fit.amplitude - 0.5) < 1e-5);
  CHECK(fit.residual < 1e-10);
  CHECK(fit.t_lo == 2.0);
  CHECK(fit.t_hi == 8.0);
}

TEST_CASE("fit_decay: oscillatory model recovers rate and frequency") {
  auto [t, u] = sample(2.0, 10.0, 800, [](double tt) {
    return std::exp(-1.5 * tt) * std::cos(tt);
  });
  auto fit = fit_decay(t, u, DecayModel::OscillatoryPower);
  CHECK(std::abs(fit.exponent - 1.5) < 1e-4);
  CHECK(std::abs(fit.frequency - 1.0) < 1e-4);
  CHECK(fit.residual < 1e-8);
}

TEST_CASE("fit_decay: log correction wins exactly when present") {
  auto [t, u] = sample(2.0, 9.0, 700, [](double tt) {
    return (2.0 + 3.0 * tt) * std::exp(-2.0 * tt);
  });
  auto log_fit = fit_decay(t, u, DecayModel::PowerLog);
  CHECK(std::abs(log_fit.exponent - 2.0) < 1e-5);
  CHECK(log_fit.log_correction);
  auto pure_fit = fit_decay(t, u, DecayModel::PurePower);
  CHECK(log_fit.residual < 0.01 * pure_fit.residual);
}

TEST_CASE("fit_decay: pure power") {
  auto [t, u] = sample(1.0, 7.0, 500, [](double tt) {
    return 5.0 * std::exp(-0.7 * tt);
  });
  auto fit = fit_decay(t, u, DecayModel::PurePower);
  CHECK(std::abs(fit.exponent - 0.7) < 1e-6);
  CHECK(std::abs(fit.amplitude - 5.0) < 1e-4);
}

TEST_CASE("fit_decay: small noise barely moves the exponent") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jitter(-1e-8, 1e-8);
  auto [t, u] = sample(2.0, 8.0, 600, [](double tt) {
    return 2.0 + 0.5 * std::exp(-tt);
  });
  for (auto& v : u) v += jitter(rng);
  auto fit = fit_decay(t, u, DecayModel::PowerPlusConstant);
  CHECK(std::abs(fit.exponent - 1.0) < 1e-4);
}

TEST_CASE("fit_decay: error paths") {
  auto [t, u] = sample(2.0, 10.0, 400, [](double tt) { return std::cos(tt); });
  CHECK_THROWS_AS(fit_decay(t, u, DecayModel::PurePower, 1e-3), FitError);

  auto [ts, us] = sample(2.0, 4.0, 100, [](double tt) {
    return std::exp(-tt);
  });
  CHECK_THROWS_AS(fit_decay(ts, us, DecayModel::PurePower), ConfigError);
}
