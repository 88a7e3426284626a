#include "dsw/bnorm.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "dsw/errors.hpp"

namespace dsw {

namespace {

using Cd = std::complex<double>;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Decode the flat index into (it, iy_0 .. iy_{d-1}); t is the slowest axis.
struct Indexer {
  int Nt, Ny, d;
  explicit Indexer(const GridSpec& g) : Nt(g.Nt), Ny(g.Ny), d(g.ydims()) {}

  int t_index(std::size_t flat) const {
    std::size_t block = 1;
    for (int j = 0; j < d; ++j) block *= Ny;
    return static_cast<int>(flat / block);
  }
  void y_indices(std::size_t flat, int* iy) const {
    for (int j = d - 1; j >= 0; --j) {
      iy[j] = static_cast<int>(flat % Ny);
      flat /= Ny;
    }
  }
};

double centered_frequency(int idx, int N, double period) {
  int k = idx <= N / 2 ? idx : idx - N;
  return 2.0 * M_PI * k / period;
}

void check_grids_match(const GridSpec& a, const GridSpec& b,
                       const char* where) {
  if (a.n != b.n || a.Nt != b.Nt || a.Ny != b.Ny || a.T != b.T || a.L != b.L)
    throw ConfigError(std::string(where) + ": grids do not match");
}

}  // namespace

std::size_t GridSpec::size() const {
  std::size_t s = Nt;
  for (int j = 0; j < ydims(); ++j) s *= Ny;
  return s;
}

HalfSpaceField make_field(
    const GridSpec& grid,
    const std::function<Cd(double, const std::vector<double>&)>& f) {
  if (grid.n < 1 || grid.Nt < 2 || (grid.ydims() > 0 && grid.Ny < 2))
    throw ConfigError("make_field: degenerate grid");
  HalfSpaceField u;
  u.grid = grid;
  u.values.resize(grid.size());
  Indexer ix(grid);
  std::vector<int> iy(std::max(1, ix.d));
  std::vector<double> y(ix.d);
  for (std::size_t flat = 0; flat < u.values.size(); ++flat) {
    double t = -grid.T + grid.dt() * ix.t_index(flat);
    ix.y_indices(flat, iy.data());
    for (int j = 0; j < ix.d; ++j) y[j] = grid.dy() * iy[j];
    u.values[flat] = f(t, y);
  }
  return u;
}

HalfSpaceField multiply(const HalfSpaceField& u, const HalfSpaceField& v) {
  check_grids_match(u.grid, v.grid, "multiply");
  HalfSpaceField w = u;
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] *= v.values[i];
  return w;
}

double hb_norm(const HalfSpaceField& u, const NormSpec& spec,
               bool enforce_decay_gate) {
  const GridSpec& g = u.grid;
  if (u.values.size() != g.size())
    throw ConfigError("hb_norm: field size does not match its grid");
  std::size_t total = g.size();
  Indexer ix(g);

  // Weighted field x^{-alpha} u = e^{+alpha t} u.
  std::vector<Cd> w(total);
  double peak = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    double t = -g.T + g.dt() * ix.t_index(flat);
    w[flat] = u.values[flat] * std::exp(spec.alpha * t);
    peak = std::max(peak, std::abs(w[flat]));
  }
  if (peak == 0.0) return 0.0;

  if (enforce_decay_gate) {
    double ends = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
      int it = ix.t_index(flat);
      if (it == 0 || it == g.Nt - 1)
        ends = std::max(ends, std::abs(w[flat]));
    }
    if (ends > 1e-12 * peak)
      throw WeightError(
          "hb_norm: weighted field does not decay at the t-grid ends "
          "(end/peak = " +
          std::to_string(ends / peak) + ")");
  }

  // Mixed Mellin-Fourier transform = plain FFT of the weighted samples.
  std::vector<Cd> what(total);
  {
    std::vector<int> dims;
    dims.push_back(g.Nt);
    for (int j = 0; j < ix.d; ++j) dims.push_back(g.Ny);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_plan plan = fftw_plan_dft(
        static_cast<int>(dims.size()), dims.data(),
        reinterpret_cast<fftw_complex*>(w.data()),
        reinterpret_cast<fftw_complex*>(what.data()), FFTW_FORWARD,
        FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }

  // norm^2 = (dt prod(dy) / N) sum <zeta>^{2s} |what|^2; exact discrete
  // Plancherel at s = 0.
  double cell = g.dt();
  for (int j = 0; j < ix.d; ++j) cell *= g.dy();
  std::vector<int> iy(std::max(1, ix.d));
  double acc = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    double lam = centered_frequency(ix.t_index(flat), g.Nt, 2.0 * g.T);
    double zeta2 = 1.0 + lam * lam;
    ix.y_indices(flat, iy.data());
    for (int j = 0; j < ix.d; ++j) {
      double etaj = centered_frequency(iy[j], g.Ny, g.L);
      zeta2 += etaj * etaj;
    }
    acc += std::pow(zeta2, spec.s) * std::norm(what[flat]);
  }
  return std::sqrt(acc * cell / static_cast<double>(total));
}

double algebra_defect(const HalfSpaceField& u, const HalfSpaceField& v,
                      double s) {
  NormSpec spec{s, 0.0};
  double nu = hb_norm(u, spec);
  double nv = hb_norm(v, spec);
  if (nu == 0.0 || nv == 0.0)
    throw ConfigError("algebra_defect: zero factor");
  return hb_norm(multiply(u, v), spec) / (nu * nv);
}

namespace {

// Denominator samples a + u and the support mask of w.
struct ReciprocalSetup {
  std::vector<Cd> quotient;
  double inf_inv = 0.0;  // sup over supp w of 1/|a+u|
};

ReciprocalSetup build_quotient(
    const HalfSpaceField& w, const HalfSpaceField& u,
    const std::function<double(double, const std::vector<double>&)>& a,
    double c0) {
  check_grids_match(w.grid, u.grid, "reciprocal_norm");
  const GridSpec& g = w.grid;
  Indexer ix(g);
  std::vector<int> iy(std::max(1, ix.d));
  std::vector<double> y(ix.d);
  double wpeak = 0.0;
  for (const auto& val : w.values) wpeak = std::max(wpeak, std::abs(val));

  ReciprocalSetup out;
  out.quotient.resize(g.size());
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    double t = -g.T + g.dt() * ix.t_index(flat);
    ix.y_indices(flat, iy.data());
    for (int j = 0; j < ix.d; ++j) y[j] = g.dy() * iy[j];
    Cd denom = a(t, y) + u.values[flat];
    bool on_support = std::abs(w.values[flat]) > 1e-14 * wpeak;
    if (on_support) {
      if (std::abs(denom) < c0)
        throw LowerBoundError(
            "reciprocal_norm: |a+u| = " + std::to_string(std::abs(denom)) +
            " below " + std::to_string(c0) + " on supp w");
      out.inf_inv = std::max(out.inf_inv, 1.0 / std::abs(denom));
    }
    out.quotient[flat] =
        on_support ? w.values[flat] / denom : Cd(0.0, 0.0);
  }
  return out;
}

}  // namespace

double reciprocal_norm(
    const HalfSpaceField& w, const HalfSpaceField& u,
    const std::function<double(double, const std::vector<double>&)>& a,
    double s, double c0) {
  ReciprocalSetup setup = build_quotient(w, u, a, c0);
  HalfSpaceField q;
  q.grid = w.grid;
  q.values = std::move(setup.quotient);
  return hb_norm(q, NormSpec{s, 0.0});
}

ReciprocalParts reciprocal_parts(
    const HalfSpaceField& w, const HalfSpaceField& u,
    const std::function<double(double, const std::vector<double>&)>& a,
    double s, double c0) {
  ReciprocalSetup setup = build_quotient(w, u, a, c0);
  HalfSpaceField q;
  q.grid = w.grid;
  q.values = std::move(setup.quotient);

  ReciprocalParts parts;
  parts.lhs = hb_norm(q, NormSpec{s, 0.0});
  double ceil_s = std::ceil(s);
  NormSpec spec{s, 0.0};
  double nw = hb_norm(w, spec);
  double nu = hb_norm(u, spec);
  parts.rhs_factor = nw * std::pow(1.0 + nu, ceil_s) *
                     std::pow(1.0 + setup.inf_inv, ceil_s + 1.0);
  return parts;
}

}  // namespace dsw
