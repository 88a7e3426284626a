// Bicharacteristic flow of the dual metric: Hamilton vector field, adaptive
// integration, radial-set detection/linearization, and the non-trapping scan.
//
// Horizon chart:
//   H_p = 4r^2(-2 mu xi + sigma) d_mu
//         - (4 xi^2 (1 - 2 r^2) - 4 sigma xi - r^{-4} |eta|^2) d_xi
//         + (4 r^2 xi + 2 sigma) tau d_tau
//         - r^{-2} H_{|eta|^2}            (spherical geodesic flow part)
// Center chart:
//   H_p = 2 (Y.zeta - sigma)(Y d_Y - zeta d_zeta - tau d_tau) - 2 zeta d_Y
// The d_sigma component vanishes identically: sigma is conserved.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dsw/metric.hpp"

namespace dsw {

struct HamiltonField {
  Chart chart = Chart::Horizon;
  // Horizon-chart components.
  double dmu = 0.0;
  double dxi = 0.0;
  Vec domega, deta;
  // Center-chart components.
  Vec dY, dzeta;
  // Shared: coefficient on tau d_tau (so tau' = tau_coeff * tau), and the
  // d_sigma component, which is identically zero for this flow.
  double tau_coeff = 0.0;
  double dsigma = 0.0;
};

HamiltonField hamilton_field(const CotangentPoint& pt);

// l1-type distance to the radial set R_pm = {mu=0, tau=0, eta=0, sigma=0,
// +-xi>0}, scaled by |xi|-homogeneity: |mu| + tau + |eta|/|xi| + |sigma|/|xi|.
// Throws ChartDomainError when xi == 0 (not in the chart of R).
double radial_set_residual(const CotangentPoint& pt);

// Norm of the projectivized rescaled field (all components except the fiber
// dilation) — zero on R_pm, used for stationarity checks.
double rescaled_drift(const CotangentPoint& pt);

// Eigenvalues (sorted ascending) of the finite-difference Jacobian of the
// rescaled field rho_hat * H_p in the chart (mu, tau, rho_hat, sigma_hat,
// sphere tangent coords, eta_hat tangent coords) at a radial point.
std::vector<double> linearization_eigenvalues(const CotangentPoint& pt,
                                              double fd_step = 1e-6);

enum class FlowDirection { Forward, Backward };

enum class Termination {
  HitH1,
  HitH2,
  ConvergedToLplus,
  ConvergedToLminus,
  MaxSteps,
  LeftChart,
};

const char* to_string(Termination t);

struct TrajectorySample {
  double s = 0.0;       // flow parameter (rescaled across renormalizations)
  ChartPoint base;
  Covector fiber;
  double p = 0.0;       // normalized: p / (1 + |zeta|^2)
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::MaxSteps;
  int component = 0;        // +1 in Sigma_+, -1 in Sigma_-
  double p_drift = 0.0;     // max |p_norm - p_norm(0)|
  double sigma_drift = 0.0; // max relative drift of conserved sigma
  std::size_t steps = 0;
};

struct IntegrateOptions {
  Domain domain{};
  double radial_tol = 1e-6;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  std::size_t max_steps = 200000;
  std::size_t sample_stride = 1;  // store every k-th accepted step
  bool project_to_sigma = true;   // project seed onto the characteristic set
};

// Integrate the bicharacteristic through `start` (center-chart internally).
// The seed must lie on the characteristic set within 1e-10 (it is projected
// there when project_to_sigma is set and the offset is small).
Trajectory integrate(const CotangentPoint& start, FlowDirection dir,
                     const IntegrateOptions& opt = {});

// ---------------------------------------------------------------------------
// General coefficient flow (for perturbed metrics), horizon chart only:
//   p = A xi^2 + 2 B xi sigma + C sigma^2 - |eta|^2 / S,  A..S functions of mu.
struct FlowCoefficients {
  std::function<double(double)> A, B, C, S;
  std::function<double(double)> dA, dB, dC, dS;

  static FlowCoefficients static_de_sitter();
  // Assemble from a metric family at frozen u (derivatives by central FD).
  static FlowCoefficients from_family(const MetricFamily& fam, double u_value);
};

struct ScanConfig {
  int n = 4;
  Domain domain{};
  int seeds_per_component = 500;
  std::uint64_t seed = 1;
  int workers = 1;
  IntegrateOptions integrate{};
  // Perturbed run: supply coefficients; trajectories then report reaching a
  // neighborhood of L_pm of this radius instead of exact convergence.
  std::optional<FlowCoefficients> perturbed;
  double radial_neighborhood = 1e-2;
};

struct ScanReport {
  int total = 0;
  int reached_H1 = 0;
  int reached_H2 = 0;
  int converged_radial = 0;
  int neighborhood_hits = 0;  // perturbed runs only
  std::vector<std::string> failures;
};

ScanReport nontrapping_scan(const ScanConfig& cfg);

// Draw a random characteristic seed in the requested component (+1/-1).
CotangentPoint random_characteristic_seed(int n, const Domain& dom,
                                          int component,
                                          std::uint64_t seed_value);

}  // namespace dsw
