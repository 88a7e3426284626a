#include "dsw/specfun.hpp"

#include <cmath>

#include "dsw/errors.hpp"

namespace dsw {

namespace {

// Lanczos coefficients, g = 7, 9 terms.
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

bool is_nonpositive_integer(Cplx z) {
  return z.imag() == 0.0 && z.real() <= 0.0 &&
         z.real() == std::floor(z.real());
}

}  // namespace

Cplx log_gamma(Cplx z) {
  if (z.real() < 0.5) {
    // Reflection: log Gamma(z) = log(pi / sin(pi z)) - log Gamma(1 - z).
    return std::log(M_PI / std::sin(M_PI * z)) - log_gamma(1.0 - z);
  }
  Cplx zz = z - 1.0;
  Cplx x = kLanczos[0];
  for (int i = 1; i < 9; ++i) x += kLanczos[i] / (zz + static_cast<double>(i));
  Cplx t = zz + 7.5;
  return 0.5 * std::log(2.0 * M_PI) + (zz + 0.5) * std::log(t) - t +
         std::log(x);
}

Cplx gamma(Cplx z) { return std::exp(log_gamma(z)); }

Cplx reciprocal_gamma(Cplx z) {
  if (is_nonpositive_integer(z)) return 0.0;
  return std::exp(-log_gamma(z));
}

Hyp2f1 hyp2f1_series(Cplx a, Cplx b, Cplx c, double z) {
  Cplx coef = 1.0;  // (a)_k (b)_k / ((c)_k k!) after the update below
  double zk = 1.0;  // z^k
  Cplx sum = 1.0, dsum = 0.0;
  for (int k = 0; k < 200; ++k) {
    coef *= (a + static_cast<double>(k)) * (b + static_cast<double>(k)) /
            ((c + static_cast<double>(k)) * static_cast<double>(k + 1));
    dsum += coef * static_cast<double>(k + 1) * zk;
    zk *= z;
    Cplx term = coef * zk;
    sum += term;
    if (std::abs(term) < 1e-18 * (1.0 + std::abs(sum)) && k > 4)
      return {sum, dsum};
  }
  throw ConvergenceError("hyp2f1_series: no convergence after 200 terms");
}

}  // namespace dsw
