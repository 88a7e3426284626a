// Global iteration for quasilinear wave problems on the static patch.
//
// The equation Box_{g(u)} u - lambda u + L u = f + q(u, bdu) is solved by
// freezing the metric at the previous iterate: each step runs the linear
// solver with coefficients from g(u_k) and the nonlinearity q(u_k) moved
// to the right-hand side, until the working-norm correction stalls below
// tolerance.  Convergence is certified a posteriori by an independent
// residual evaluation that shares no stencils with the marching scheme.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "dsw/fitting.hpp"
#include "dsw/metric.hpp"
#include "dsw/resonance.hpp"
#include "dsw/wave.hpp"

namespace dsw {

// First-order b-derivative factors available to nonlinear terms.
enum class BDerivative { TauDtau, Dmu };

// One monomial coeff * u^exponent * prod_k (X_k u).
struct NonlinearTerm {
  double coefficient = 1.0;
  int exponent = 0;
  std::vector<BDerivative> factors;
};

// q(u, bdu) = sum of terms; every term needs at least one derivative
// factor and total degree exponent + #factors >= 2.  With box_term set,
// each term picks up an extra factor Box_{g(u)} u (conformal families
// only), which counts toward both requirements, and iteration control
// switches to the strengthened norm that includes || Box_{g0} u ||.
struct Nonlinearity {
  std::vector<NonlinearTerm> terms;
  bool box_term = false;

  bool empty() const { return terms.empty(); }
  void validate() const;  // throws ConfigError
};

struct PicardOptions {
  WaveGrid grid;               // store_stride is forced to 1 internally
  double lambda = 0.0;
  double forcing_onset = 0.0;
  double tol = 1e-9;           // relative working-norm delta target
  int max_iter = 30;
  double smallness_gate = 10.0;  // bound on the forcing working norm
  double r_star = 0.5;           // backward variant: smallest usable weight
  std::optional<LowerOrderTerm> lower_order;
};

struct IterationReport {
  int iterates = 0;                        // linear solves performed
  std::vector<double> deltas;              // ||u_{k} - u_{k-1}||, k = 1..
  std::vector<double> contraction_ratios;  // deltas[k] / deltas[k-1]
  double forcing_norm = 0.0;
  double final_residual = 0.0;  // independent-stencil RMS residual
  bool strengthened = false;    // deltas measured in the BoxTerm norm
};

// Discrete H_b^1-type working norm: weighted spacetime L^2 of the field
// and its first differences, weight r^{n-3}.
double working_norm(const GridField& f, int n);

// Forward problem with zero data on the initial slice.  Throws
// SmallnessError when the forcing norm exceeds the gate, DivergenceError
// when the correction ratios sit at >= 1 for five consecutive steps, and
// ConvergenceError when max_iter passes without reaching tol.  With
// empty q and a u-independent family the loop reproduces the plain
// linear solve bit for bit.
std::pair<GridField, IterationReport> picard_solve(
    const MetricFamily& fam, const Nonlinearity& q,
    std::function<double(double t, double mu)> forcing,
    const PicardOptions& opt);

// Reverse-time variant: zero data at grid.t_end, decay weight r.  The
// forcing must itself decay at rate >= r; requires r > opt.r_star.
std::pair<GridField, IterationReport> backward_quasilinear(
    const MetricFamily& fam, const Nonlinearity& q,
    std::function<double(double t, double mu)> forcing, double r,
    const PicardOptions& opt);

// RMS of Box_{g(u)} u - lambda u + L u - f - q(u) over the interior of
// the stored grid, evaluated with direct central differences in t and mu
// on the slices (nothing shared with the first-order marching scheme).
// The boundary-closure strips at both mu ends are excluded by a fixed
// physical margin; time_stride subsamples the slices entering the average.
double nonlinear_residual(const MetricFamily& fam, const Nonlinearity& q,
                          const std::function<double(double, double)>& forcing,
                          const GridField& u, double lambda,
                          const std::optional<LowerOrderTerm>& lower_order = {},
                          int time_stride = 8);

// Splits u = c + u' along the resonance expansion: lattice entries with
// decay rate below alpha are fitted and removed at the probe column, and
// the remainder tail is fitted over [t_lo, t_hi].  Only the constant
// (sigma = 0) term can be split off; a lattice demanding more throws
// NoCaseError.  Throws FitError when the remainder decays slower than
// alpha - 0.1.
struct ExpansionResult {
  double constant = 0.0;   // coefficient of the rate-zero term (0 if none)
  DecayFit remainder;      // tail fit of the remainder series
  double remainder_norm = 0.0;  // RMS of the windowed remainder
};

ExpansionResult extract_expansion(const GridField& u,
                                  const ResonanceLattice& lattice, double alpha,
                                  double probe_mu, double t_lo, double t_hi);

// Lipschitz quotient || u(f + eps df) - u(f) || / (eps ||df||) of the
// forward solve in the working norm.
double stability_probe(const MetricFamily& fam, const Nonlinearity& q,
                       const std::function<double(double, double)>& forcing,
                       const std::function<double(double, double)>& delta_f,
                       double eps, const PicardOptions& opt);

// Empirical contraction radius: the base forcing is scaled up by powers
// of two until the iteration diverges (or blows up), then the boundary is
// bisected.  Probes record (amplitude, converged).
struct SweepResult {
  double converged_amplitude = 0.0;  // largest amplitude seen converging
  double diverged_amplitude = 0.0;   // smallest amplitude seen diverging
  std::vector<std::pair<double, bool>> probes;
};

SweepResult amplitude_sweep(const MetricFamily& fam, const Nonlinearity& q,
                            const std::function<double(double, double)>& forcing,
                            const PicardOptions& opt, double start_amplitude,
                            int max_doublings, int bisect_steps);

}  // namespace dsw
