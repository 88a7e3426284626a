// Resonances of the Mellin-transformed normal operator.
//
// Indicial roots:  shat_pm(lambda) = -(n-1)/2 +- sqrt((n-1)^2/4 - lambda).
// The full lattice is sigma in i*shat_pm - i N_0; restricted to the
// spherical-harmonic mode l it thins out to sigma = i(shat_pm - l - 2N).
//
// The numerical finder shoots the radial ODE of the mode: a regular series
// seed at the center, the indicially trivial seed across the horizon, both
// integrated to the matching radius, and the mismatch Wronskian
// (normalized against its known degenerate-gamma factor) driven to zero by
// complex secant iteration.
#pragma once

#include <complex>
#include <vector>

#include "dsw/specfun.hpp"

namespace dsw {

struct LatticeEntry {
  Cplx sigma;
  int multiplicity = 1;
};

struct ResonanceLattice {
  int n = 4;
  double lambda = 0.0;
  std::vector<LatticeEntry> entries;  // decreasing Im, then increasing Re
};

// Indicial roots shat_+ (first) and shat_- (second); complex for
// lambda > (n-1)^2/4.
std::pair<Cplx, Cplx> indicial_roots(int n, double lambda);

// Both branches truncated at depth N_max, branch collisions merged into
// multiplicity counts.
ResonanceLattice analytic_lattice(int n, double lambda, int N_max);

// The part of the lattice visible in spherical-harmonic mode l:
// sigma = i(shat_pm - l - 2N), N = 0..N_max.
std::vector<LatticeEntry> mode_lattice(int n, double lambda, int l,
                                       int N_max);

struct SearchBox {
  double re_lo = -0.5, re_hi = 0.5;
  double im_lo = -2.5, im_hi = 0.25;
  bool contains(Cplx z, double margin = 1e-6) const {
    return z.real() >= re_lo - margin && z.real() <= re_hi + margin &&
           z.imag() >= im_lo - margin && z.imag() <= im_hi + margin;
  }
};

// Normalized mismatch Wronskian Z(sigma) of the mode-l radial ODE; entire
// in sigma, vanishing exactly at the mode's resonances.
Cplx mode_wronskian(int n, double lambda, int l, Cplx sigma);

// Zeros of mode_wronskian inside the box, found by secant iteration from a
// grid of starting guesses; deduplicated, sorted by decreasing Im.
// Throws ConvergenceError if every start stagnates.
std::vector<Cplx> numeric_poles(int n, double lambda, int l,
                                const SearchBox& box);

}  // namespace dsw
