#include "dsw/resonance.hpp"

#include <algorithm>
#include <cmath>

#include "dsw/errors.hpp"

namespace dsw {

std::pair<Cplx, Cplx> indicial_roots(int n, double lambda) {
  if (n < 2) throw ConfigError("indicial_roots: need n >= 2");
  double half = 0.5 * (n - 1);
  Cplx disc = std::sqrt(Cplx(half * half - lambda, 0.0));
  return {-half + disc, -half - disc};
}

namespace {

void sort_entries(std::vector<LatticeEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const LatticeEntry& a, const LatticeEntry& b) {
              if (a.sigma.imag() != b.sigma.imag())
                return a.sigma.imag() > b.sigma.imag();
              return a.sigma.real() < b.sigma.real();
            });
}

std::vector<LatticeEntry> merge_close(std::vector<LatticeEntry> raw) {
  std::vector<LatticeEntry> merged;
  for (const auto& e : raw) {
    bool absorbed = false;
    for (auto& m : merged)
      if (std::abs(m.sigma - e.sigma) < 1e-12) {
        m.multiplicity += e.multiplicity;
        absorbed = true;
        break;
      }
    if (!absorbed) merged.push_back(e);
  }
  sort_entries(merged);
  return merged;
}

}  // namespace

ResonanceLattice analytic_lattice(int n, double lambda, int N_max) {
  if (N_max < 0) throw ConfigError("analytic_lattice: need N_max >= 0");
  auto [sp, sm] = indicial_roots(n, lambda);
  std::vector<LatticeEntry> raw;
  const Cplx i(0.0, 1.0);
  for (int N = 0; N <= N_max; ++N) {
    raw.push_back({i * (sp - static_cast<double>(N)), 1});
    raw.push_back({i * (sm - static_cast<double>(N)), 1});
  }
  ResonanceLattice lat;
  lat.n = n;
  lat.lambda = lambda;
  lat.entries = merge_close(std::move(raw));
  return lat;
}

std::vector<LatticeEntry> mode_lattice(int n, double lambda, int l,
                                       int N_max) {
  if (l < 0) throw ConfigError("mode_lattice: need l >= 0");
  auto [sp, sm] = indicial_roots(n, lambda);
  std::vector<LatticeEntry> raw;
  const Cplx i(0.0, 1.0);
  for (int N = 0; N <= N_max; ++N) {
    raw.push_back({i * (sp - static_cast<double>(l + 2 * N)), 1});
    raw.push_back({i * (sm - static_cast<double>(l + 2 * N)), 1});
  }
  return merge_close(std::move(raw));
}

namespace {

struct ModeParams {
  Cplx a, b, c;  // hypergeometric parameters of the mode in y = 1 - mu
};

ModeParams mode_params(int n, double lambda, int l, Cplx sigma) {
  double half = 0.5 * (n - 1);
  Cplx D = std::sqrt(Cplx(half * half - lambda, 0.0));
  const Cplx i(0.0, 1.0);
  Cplx apb = half + static_cast<double>(l) - i * sigma;
  ModeParams p;
  p.a = 0.5 * (apb + D);
  p.b = 0.5 * (apb - D);
  p.c = half + static_cast<double>(l);
  return p;
}

// Integrate the hypergeometric ODE
//   y (1-y) w'' + [c - (a+b+1) y] w' - a b w = 0
// with classical RK4 from y0 to y1 (both strictly inside (0, 1)).
void rk4_hypergeometric(const ModeParams& p, double y0, double y1, Cplx& w,
                        Cplx& dw, int steps) {
  auto rhs = [&](double y, Cplx wv, Cplx dwv, Cplx& fw, Cplx& fdw) {
    fw = dwv;
    fdw = (p.a * p.b * wv - (p.c - (p.a + p.b + 1.0) * y) * dwv) /
          (y * (1.0 - y));
  };
  double h = (y1 - y0) / steps;
  double y = y0;
  for (int s = 0; s < steps; ++s) {
    Cplx k1w, k1d, k2w, k2d, k3w, k3d, k4w, k4d;
    rhs(y, w, dw, k1w, k1d);
    rhs(y + 0.5 * h, w + 0.5 * h * k1w, dw + 0.5 * h * k1d, k2w, k2d);
    rhs(y + 0.5 * h, w + 0.5 * h * k2w, dw + 0.5 * h * k2d, k3w, k3d);
    rhs(y + h, w + h * k3w, dw + h * k3d, k4w, k4d);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    dw += (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    y += h;
  }
}

constexpr double kSeedCenter = 0.05;   // series radius at y = 0
constexpr double kSeedHorizon = 0.05;  // series radius at y = 1
constexpr double kMatch = 0.5;
constexpr int kSteps = 800;

}  // namespace

Cplx mode_wronskian(int n, double lambda, int l, Cplx sigma) {
  const Cplx i(0.0, 1.0);
  // The horizon series parameter is 1 - i sigma; nudge sigma off the
  // non-positive-integer degeneracies, where the raw series is undefined
  // (the normalized Wronskian itself extends holomorphically across them).
  Cplx ch = 1.0 - i * sigma;
  double nearest = std::round(ch.real());
  if (nearest <= 0.0 && std::abs(ch - nearest) < 1e-11)
    sigma += 1e-11 * Cplx(1.0, 1.0) * (1.0 + std::abs(sigma));

  ModeParams p = mode_params(n, lambda, l, sigma);
  ch = 1.0 - i * sigma;

  // Center-regular branch, seeded by the series at y = kSeedCenter.
  Hyp2f1 seed_c = hyp2f1_series(p.a, p.b, p.c, kSeedCenter);
  Cplx wc = seed_c.value, dwc = seed_c.derivative;
  rk4_hypergeometric(p, kSeedCenter, kMatch, wc, dwc, kSteps);

  // Horizon-smooth branch: 2F1(a, b; 1 - i sigma; 1 - y).
  Hyp2f1 seed_h = hyp2f1_series(p.a, p.b, ch, kSeedHorizon);
  Cplx wh = seed_h.value, dwh = -seed_h.derivative;  // d/dy = -d/d(1-y)
  rk4_hypergeometric(p, 1.0 - kSeedHorizon, kMatch, wh, dwh, kSteps);

  Cplx W = wc * dwh - dwc * wh;
  return W * reciprocal_gamma(ch);
}

std::vector<Cplx> numeric_poles(int n, double lambda, int l,
                                const SearchBox& box) {
  if (box.re_hi < box.re_lo || box.im_hi < box.im_lo)
    throw ConfigError("numeric_poles: empty search box");
  auto Z = [&](Cplx s) { return mode_wronskian(n, lambda, l, s); };

  std::vector<Cplx> roots;
  bool any_converged = false;
  const int grid = 4;
  for (int gi = 0; gi <= grid; ++gi) {
    for (int gj = 0; gj <= grid; ++gj) {
      Cplx z0(box.re_lo + (box.re_hi - box.re_lo) * gi / grid,
              box.im_lo + (box.im_hi - box.im_lo) * gj / grid);
      Cplx z1 = z0 + Cplx(0.01, 0.01);
      Cplx f0 = Z(z0), f1 = Z(z1);
      bool converged = false;
      for (int it = 0; it < 120; ++it) {
        if (f1 == f0) break;
        Cplx z2 = z1 - f1 * (z1 - z0) / (f1 - f0);
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = Z(z2);
        if (std::abs(z1 - z0) < 1e-10 * (1.0 + std::abs(z1))) {
          converged = true;
          break;
        }
        if (std::abs(z1) > 1e3) break;  // ran away; try the next start
      }
      if (!converged) continue;
      any_converged = true;
      if (!box.contains(z1)) continue;
      bool known = false;
      for (const auto& r : roots)
        if (std::abs(r - z1) < 1e-6) {
          known = true;
          break;
        }
      if (!known) roots.push_back(z1);
    }
  }
  if (!any_converged)
    throw ConvergenceError("numeric_poles: secant iteration stagnated");
  std::sort(roots.begin(), roots.end(), [](Cplx a, Cplx b) {
    if (a.imag() != b.imag()) return a.imag() > b.imag();
    return a.real() < b.real();
  });
  return roots;
}

}  // namespace dsw
