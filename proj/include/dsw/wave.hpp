#pragma once

// Forward and backward solver for linear wave / Klein-Gordon equations
// Box_g u - lambda u + L u = f on the spherically symmetric sector of the
// static patch, in the compactified coordinates (t = -log tau, mu).
//
// The operator is discretized in divergence form.  With the dual-metric
// block [[A, B], [B, C]] in the (d mu, d tau/tau) frame and the volume
// weight W = W_hat * r^{n-3} (r^2 = 1 - mu), the first-order reduction
// evolves (u, w = du/dmu, pi = B w - C v) where v = du/dt:
//
//   du/dt  = v,          v = (B w - pi) / C
//   dw/dt  = d(v)/dmu
//   dpi/dt = d(A w - B v)/dmu + (dlog W_hat/dmu)(A w - B v)
//            - (n-3)/2 (a_hat w - b_hat v) - pi * dlog W_hat/dt
//            + lambda u - L u + f
//
// where a_hat = A / r^2 and b_hat = B / r^2 stay smooth at the center
// mu = 1, so the geometric source term is regular there.  The boundary
// mu = -delta is spacelike outflow (one-sided stencils, no condition);
// mu = 1 is characteristic.  Time stepping is RK4 method-of-lines with a
// CFL-limited step.  The backward solve integrates the same system in
// reverse time from zero data, pinning the state to zero at mu = -delta
// (the backward problem is supported at that boundary).

#include <functional>
#include <optional>
#include <vector>

namespace dsw {

struct WaveGrid {
  int n = 4;             // spacetime dimension (>= 3)
  double delta = 0.1;    // domain mu in [-delta, 1]
  double t_start = 0.0;
  double t_end = 20.0;
  int n_mu = 201;
  double cfl = 0.8;      // fraction of the stability limit
  int store_stride = 0;  // 0 = choose automatically (~1600 stored slices)
};

// Sampled solution slices; row-major with time slowest.
struct GridField {
  std::vector<double> times;
  int n_mu = 0;
  double mu_min = 0.0, mu_max = 0.0;
  double weight_tag = 0.0;  // exponential weight already applied to values
  std::vector<double> values;

  double dmu() const { return (mu_max - mu_min) / (n_mu - 1); }
  double mu(int j) const { return mu_min + dmu() * j; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n_mu + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n_mu + j]; }
  int column_near(double mu_probe) const;
  std::vector<double> probe(double mu_probe) const;  // time series at nearest column
  double max_abs() const;
};

// Per-slice metric data delivered to the solver.  All vectors have one
// entry per mu grid point.
struct SliceCoefficients {
  std::vector<double> A, B, C;          // dual-metric block
  std::vector<double> a_hat, b_hat;     // A / r^2, B / r^2 (regular at mu = 1)
  std::vector<double> dlogw_mu;         // d/dmu of log W_hat
  std::vector<double> dlogw_dt;         // d/dt of log W_hat
  void resize(std::size_t m);
};

using CoefficientProvider =
    std::function<void(double t, const std::vector<double>& mu, SliceCoefficients& out)>;

// First-order perturbation L = l0 + l1 (tau d_tau) + l2 d_mu.
struct LowerOrderTerm {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0;
};

struct LinearProblem {
  WaveGrid grid;
  double lambda = 0.0;
  std::function<double(double t, double mu)> forcing;  // empty = 0
  CoefficientProvider coefficients;                    // empty = static metric
  std::optional<LowerOrderTerm> lower_order;
  double forcing_onset = 0.0;  // earliest time the forcing may be nonzero
  double blowup_guard = 1e8;
  double dt_override = 0.0;    // 0 = CFL-chosen step
  // Fourth-difference damping strength; unset means 0.1.  The one-sided
  // closure at the degenerate-characteristic center hosts a weakly growing
  // boundary mode in forward runs, and reverse-time integration blue-shifts
  // grid modes through the horizon; the damping controls both while staying
  // an O(h^3) perturbation.  Set 0.0 to run the undamped scheme.
  std::optional<double> dissipation;
};

// Fills the static de Sitter coefficients for dimension n.
void static_coefficients(int n, const std::vector<double>& mu, SliceCoefficients& out);

// Conformal family g -> factor * g: dual block scales by 1 / factor and
// log W_hat shifts by (n/2) log factor (derivatives by central differences).
CoefficientProvider conformal_coefficients(
    int n, std::function<double(double t, double mu)> factor);

GridField solve_forward(const LinearProblem& prob);

// Reverse-time integration from zero data at t_end down to grid.t_start.
// Checks that the forcing and the recovered solution decay at rate >= r
// (up to a fixed margin) whenever their late-time tails are resolvable.
GridField solve_backward(const LinearProblem& prob, double t_end, double r);

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> energies;     // E(t) = int e^{2rt} (u^2+v^2+w^2) W dmu
  double sup_energy = 0.0;
  double forcing_norm2 = 0.0;       // discrete weighted L^2 norm of f, squared
  double fitted_c = 0.0;            // sup E / ||f||^2 (0 when f = 0)
};

EnergyReport energy_report(const GridField& u, const LinearProblem& prob, double r = 0.0);

}  // namespace dsw
