// Discrete weighted b-Sobolev norms on the half-space model.
//
// Fields live on x in (0, infinity) times a (n-1)-torus, sampled on the
// logarithmic grid t = -log x (uniform, t in [-T, T)) and a uniform periodic
// grid in each y direction.  The norm of H_b^{s,alpha} is the L^2 norm of
// <zeta>^s times the mixed Mellin-Fourier transform of x^{-alpha} u; on the
// grid the Mellin contour shift is the exact multiplier e^{+alpha t}
// (x^{-alpha} = e^{+alpha t}) followed by an FFT.
#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace dsw {

struct GridSpec {
  int n = 2;        // total dimension: 1 (the t line) + (n-1) torus dirs
  double T = 8.0;   // t range [-T, T)
  int Nt = 256;
  double L = 6.283185307179586;  // torus side
  int Ny = 64;      // samples per torus direction

  int ydims() const { return n - 1; }
  std::size_t size() const;
  double dt() const { return 2.0 * T / Nt; }
  double dy() const { return L / Ny; }
};

struct HalfSpaceField {
  GridSpec grid;
  std::vector<std::complex<double>> values;  // row-major, t slowest
};

struct NormSpec {
  double s = 0.0;
  double alpha = 0.0;
};

// Sample f(t, y) on the grid.
HalfSpaceField make_field(
    const GridSpec& grid,
    const std::function<std::complex<double>(double, const std::vector<double>&)>&
        f);

// Pointwise product (grids must match).
HalfSpaceField multiply(const HalfSpaceField& u, const HalfSpaceField& v);

// The H_b^{s,alpha} norm.  The decay gate requires the weighted field to
// fall below 1e-12 (relative) at both t-grid ends, else WeightError; the
// weight-threshold experiment disables it to exhibit divergence.
double hb_norm(const HalfSpaceField& u, const NormSpec& spec,
               bool enforce_decay_gate = true);

// ||uv||_s / (||u||_s ||v||_s), the algebra-property ratio at weight 0.
double algebra_defect(const HalfSpaceField& u, const HalfSpaceField& v,
                      double s);

// ||w/(a+u)||_{H_b^s} with a pointwise lower-bound check |a+u| >= c0 on the
// support of w (LowerBoundError below c0).
double reciprocal_norm(
    const HalfSpaceField& w, const HalfSpaceField& u,
    const std::function<double(double, const std::vector<double>&)>& a,
    double s, double c0 = 1e-8);

// Both sides of the reciprocal bound
//   ||w/(a+u)||_s <= C_K ||w||_s (1+||u||_s)^{ceil(s)}
//                    (1+||1/(a+u)||_{L^inf(supp w)})^{ceil(s)+1}
// with the constant C_K left out of rhs_factor (calibrated empirically).
struct ReciprocalParts {
  double lhs = 0.0;
  double rhs_factor = 0.0;
};
ReciprocalParts reciprocal_parts(
    const HalfSpaceField& w, const HalfSpaceField& u,
    const std::function<double(double, const std::vector<double>&)>& a,
    double s, double c0 = 1e-8);

}  // namespace dsw
