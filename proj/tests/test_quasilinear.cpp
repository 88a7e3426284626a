#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "dsw/errors.hpp"
#include "dsw/picard.hpp"
#include "dsw/resonance.hpp"
#include "dsw/wave.hpp"

using namespace dsw;

namespace {

struct Bump {
  double center, halfwidth;
  double raw(double s) const {
    return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
  }
  double val(double x) const { return raw((x - center) / halfwidth); }
};

// The forcing family every case scales: a compact pulse over t in
// [0.5, 2.5] centered on the mu = 0.5 column.
std::function<double(double, double)> pulse_forcing(double amplitude) {
  Bump bt{1.5, 1.0}, bm{0.5, 0.2};
  return [=](double t, double mu) { return amplitude * bt.val(t) * bm.val(mu); };
}

MetricFamily quadratic_family() {
  return MetricFamily::conformal([](double u) { return 1.0 + u * u; });
}

Nonlinearity velocity_coupling() {
  Nonlinearity q;
  q.terms.push_back({1.0, 1, {BDerivative::TauDtau}});  // u * (tau d_tau u)
  return q;
}

PicardOptions small_options(int n_mu = 101, double t_end = 6.0) {
  PicardOptions opt;
  opt.grid.n_mu = n_mu;
  opt.grid.t_end = t_end;
  opt.forcing_onset = 0.5;
  return opt;
}

}  // namespace

TEST_CASE("empty nonlinearity on the trivial family is the linear solve") {
  PicardOptions opt = small_options(151, 6.0);
  auto forcing = pulse_forcing(1.0);
  auto [u, rep] = picard_solve(MetricFamily::static_de_sitter(), {}, forcing, opt);

  LinearProblem ref;
  ref.grid = opt.grid;
  ref.grid.store_stride = 1;
  ref.forcing = forcing;
  ref.forcing_onset = opt.forcing_onset;
  GridField v = solve_forward(ref);

  REQUIRE(u.values.size() == v.values.size());
  CHECK(std::memcmp(u.values.data(), v.values.data(),
                    u.values.size() * sizeof(double)) == 0);
  CHECK(rep.iterates == 2);  // the repeat pass only certifies the fixed point
  REQUIRE(rep.deltas.size() == 2);
  CHECK(rep.deltas[1] == 0.0);
}

TEST_CASE("zero forcing returns the zero solution after one iterate") {
  auto [u, rep] = picard_solve(quadratic_family(), velocity_coupling(), {},
                               small_options());
  CHECK(rep.iterates == 1);
  CHECK(u.max_abs() == 0.0);
}

TEST_CASE("quadratic-metric run contracts onto a constant plus fast tail") {
  PicardOptions opt = small_options(201, 14.0);
  auto [u, rep] =
      picard_solve(quadratic_family(), velocity_coupling(), pulse_forcing(2.0), opt);

  CHECK(rep.iterates <= 10);
  REQUIRE(rep.contraction_ratios.size() >= 3);
  for (double r : rep.contraction_ratios) CHECK(r < 0.5);

  const double h = u.dmu();
  CHECK(rep.final_residual < 5.0 * h * h);

  // u = c + u': the constant is the only lattice term below the target
  // weight, and the remainder must beat it by a clear margin.
  ResonanceLattice lattice = analytic_lattice(4, 0.0, 3);
  ExpansionResult ex = extract_expansion(u, lattice, 0.9, 0.45, 4.8, 10.0);
  CHECK(std::abs(ex.constant) > 1e-3);
  CHECK(ex.remainder.exponent >= 0.8);
  CHECK(ex.remainder.exponent < 3.0);
  CHECK(ex.remainder_norm < 0.1 * std::abs(ex.constant));
}

TEST_CASE("independent residual certifies the linear solver at second order") {
  double res[2];
  double h2[2];
  int k = 0;
  for (int nm : {101, 201}) {
    PicardOptions opt = small_options(nm, 6.0);
    auto [u, rep] =
        picard_solve(MetricFamily::static_de_sitter(), {}, pulse_forcing(1.0), opt);
    res[k] = rep.final_residual;
    h2[k] = u.dmu() * u.dmu();
    ++k;
  }
  CHECK(res[0] < 5.0 * h2[0]);
  CHECK(res[1] < 5.0 * h2[1]);
  const double rate = res[0] / res[1];
  CHECK(rate > 2.5);  // second-order collapse, nominal factor 4
  CHECK(rate < 6.5);
}

TEST_CASE("forcing above the smallness gate is rejected") {
  PicardOptions opt = small_options();
  opt.smallness_gate = 0.04;
  CHECK_THROWS_AS(
      picard_solve(quadratic_family(), velocity_coupling(), pulse_forcing(1.0), opt),
      SmallnessError);
}

TEST_CASE("malformed nonlinearities are rejected") {
  PicardOptions opt = small_options();

  SUBCASE("a term of total degree one") {
    Nonlinearity q;
    q.terms.push_back({1.0, 0, {BDerivative::TauDtau}});
    CHECK_THROWS_AS(picard_solve(quadratic_family(), q, pulse_forcing(1.0), opt),
                    ConfigError);
  }
  SUBCASE("a derivative-free term without the box factor") {
    Nonlinearity q;
    q.terms.push_back({1.0, 2, {}});
    CHECK_THROWS_AS(picard_solve(quadratic_family(), q, pulse_forcing(1.0), opt),
                    ConfigError);
  }
  SUBCASE("a box-term coupling on a non-conformal family") {
    std::vector<std::function<double(double)>> c = {[](double) { return 1.0; }};
    MetricFamily fam =
        MetricFamily::polynomial(c, {static_de_sitter_coeffs()});
    Nonlinearity q = velocity_coupling();
    q.box_term = true;
    CHECK_THROWS_AS(picard_solve(fam, q, pulse_forcing(1.0), opt), ConfigError);
  }
}

TEST_CASE("large forcing leaves the contraction regime at a finite amplitude") {
  PicardOptions opt = small_options(101, 6.0);
  opt.max_iter = 14;
  SweepResult sweep = amplitude_sweep(quadratic_family(), velocity_coupling(),
                                      pulse_forcing(1.0), opt, 4.0, 7, 2);
  CHECK(sweep.converged_amplitude > 0.0);
  CHECK(sweep.diverged_amplitude > sweep.converged_amplitude);
  CHECK(sweep.probes.size() >= 3);
}

TEST_CASE("halving the forcing never worsens the contraction ratio") {
  PicardOptions opt = small_options(101, 6.0);
  double last[3];
  int k = 0;
  for (double amp : {8.0, 4.0, 2.0}) {
    auto [u, rep] = picard_solve(quadratic_family(), velocity_coupling(),
                                 pulse_forcing(amp), opt);
    REQUIRE(!rep.contraction_ratios.empty());
    last[k++] = rep.contraction_ratios.back();
  }
  CHECK(last[1] <= last[0] * 1.05);
  CHECK(last[2] <= last[1] * 1.05);
}

TEST_CASE("perturbation response stays Lipschitz across the dyadic sweep") {
  PicardOptions opt = small_options(101, 6.0);
  Bump dt_{2.5, 0.8}, dm{0.3, 0.15};
  auto delta_f = [=](double t, double mu) { return dt_.val(t) * dm.val(mu); };

  std::vector<double> ratios;
  for (double eps : {1e-2, 1e-3, 1e-4})
    ratios.push_back(stability_probe(quadratic_family(), velocity_coupling(),
                                     pulse_forcing(2.0), delta_f, eps, opt));
  double mean = (ratios[0] + ratios[1] + ratios[2]) / 3.0;
  REQUIRE(mean > 0.0);
  for (double r : ratios) CHECK(std::abs(r - mean) <= 0.2 * mean);

  SUBCASE("a zero perturbation produces a zero quotient") {
    CHECK(stability_probe(quadratic_family(), velocity_coupling(),
                          pulse_forcing(2.0), {}, 1e-3, opt) == 0.0);
  }
}

TEST_CASE("box-factor coupling converges in the strengthened norm") {
  PicardOptions opt = small_options(101, 6.0);
  Nonlinearity q;
  q.terms.push_back({0.5, 1, {}});  // q = 0.5 u * Box_{g(u)} u
  q.box_term = true;
  auto [u, rep] = picard_solve(quadratic_family(), q, pulse_forcing(1.0), opt);
  CHECK(rep.strengthened);
  CHECK(rep.iterates <= 10);
  for (double r : rep.contraction_ratios) CHECK(r < 0.5);
  CHECK(u.max_abs() > 1e-4);
}

TEST_CASE("backward iteration recovers a decaying source") {
  PicardOptions opt = small_options(151, 8.0);
  opt.forcing_onset = 0.0;
  Bump bm{0.5, 0.2};
  auto forcing = [bm](double t, double mu) {
    return 0.5 * std::exp(-2.0 * t) * bm.val(mu);
  };

  SUBCASE("a weight below the family threshold is rejected") {
    CHECK_THROWS_AS(backward_quasilinear(quadratic_family(), velocity_coupling(),
                                         forcing, 0.4, opt),
                    LowerBoundError);
  }

  SUBCASE("the iteration converges and the answer decays") {
    auto [u, rep] = backward_quasilinear(quadratic_family(), velocity_coupling(),
                                         forcing, 1.5, opt);
    CHECK(rep.iterates <= 10);
    for (double r : rep.contraction_ratios) CHECK(r < 0.5);
    const double h = u.dmu();
    CHECK(rep.final_residual < 5.0 * h * h);

    // late-time slices sit far below the early ones
    auto series = u.probe(0.45);
    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      double t = u.times[i];
      if (t < 1.0) early = std::max(early, std::abs(series[i]));
      if (t > 6.0) late = std::max(late, std::abs(series[i]));
    }
    CHECK(early > 1e-6);
    CHECK(late < 1e-2 * early);
  }
}
