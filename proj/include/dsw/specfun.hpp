// Complex special functions used by the mode shooting machinery:
// log-gamma (Lanczos), its entire reciprocal-gamma companion, and the
// Gauss hypergeometric series with derivative (small-argument use only).
#pragma once

#include <complex>

namespace dsw {

using Cplx = std::complex<double>;

// Principal-branch log Gamma via the Lanczos approximation (g = 7), with
// the reflection formula for Re z < 1/2.  The imaginary part may differ
// from the principal value by multiples of 2 pi; all consumers exponentiate.
Cplx log_gamma(Cplx z);

Cplx gamma(Cplx z);

// 1 / Gamma(z), entire: returns exactly 0 at non-positive integers.
Cplx reciprocal_gamma(Cplx z);

// Value and z-derivative of 2F1(a, b; c; z) by direct summation.  Intended
// for |z| well inside the unit disk (the shooting method seeds at 0.05);
// throws ConvergenceError if the series has not settled by 200 terms.
struct Hyp2f1 {
  Cplx value;
  Cplx derivative;
};
Hyp2f1 hyp2f1_series(Cplx a, Cplx b, Cplx c, double z);

}  // namespace dsw
