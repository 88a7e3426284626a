#include "dsw/wave.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "dsw/errors.hpp"

namespace dsw {

namespace {

// Second-order first derivative with one-sided ends.
void d_mu(const std::vector<double>& f, double h, std::vector<double>& out) {
  const std::size_t m = f.size();
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (std::size_t j = 1; j + 1 < m; ++j) out[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
  out[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
}

struct WorkBuffers {
  std::vector<double> v, flux, dv, dflux;
  SliceCoefficients coeff;
  void resize(std::size_t m) {
    v.resize(m);
    flux.resize(m);
    dv.resize(m);
    dflux.resize(m);
    coeff.resize(m);
  }
};

struct State {
  std::vector<double> u, w, pi;
  void resize(std::size_t m) {
    u.assign(m, 0.0);
    w.assign(m, 0.0);
    pi.assign(m, 0.0);
  }
};

void check_lorentzian(const SliceCoefficients& c) {
  for (std::size_t j = 0; j < c.A.size(); ++j) {
    // The discriminant vanishes at the spherical center, so only genuinely
    // negative values indicate a bad coefficient family.
    if (!(c.C[j] > 0.0) || c.B[j] * c.B[j] - c.A[j] * c.C[j] < -1e-12)
      throw SignatureError("wave: coefficient family is not Lorentzian on the grid");
  }
}

double max_characteristic_speed(const SliceCoefficients& c) {
  double speed = 0.0;
  for (std::size_t j = 0; j < c.A.size(); ++j) {
    double disc = c.B[j] * c.B[j] - c.A[j] * c.C[j];
    double root = std::sqrt(std::max(disc, 0.0));
    speed = std::max(speed, (std::abs(c.B[j]) + root) / c.C[j]);
  }
  return speed;
}

// Least-squares slope of -log(series) against time over the trailing
// portion of the samples; returns nothing when the tail is unresolvable.
std::optional<double> tail_decay_rate(const std::vector<double>& times,
                                      const std::vector<double>& sup,
                                      double floor_ratio) {
  double peak = 0.0;
  for (double s : sup) peak = std::max(peak, s);
  if (peak <= 0.0) return std::nullopt;
  std::size_t lo = times.size() - times.size() / 3;
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t count = 0;
  for (std::size_t i = lo; i < times.size(); ++i) {
    if (sup[i] < floor_ratio * peak) continue;
    double y = std::log(sup[i]);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++count;
  }
  if (count < 4) return std::nullopt;  // tail already below the floor
  double denom = count * stt - st * st;
  if (std::abs(denom) < 1e-30) return std::nullopt;
  return -(count * sty - st * sy) / denom;
}

class Solver {
 public:
  Solver(const LinearProblem& prob, double t_end, bool backward)
      : prob_(prob), grid_(prob.grid), t_end_(t_end) {
    dissipation_ = prob.dissipation.value_or(0.1);
    if (grid_.n < 3) throw ConfigError("wave: dimension must be at least 3");
    if (grid_.n_mu < 8) throw CFLError("wave: too few mu points for the stencils");
    if (!(grid_.cfl > 0.0) || grid_.cfl > 0.95)
      throw CFLError("wave: cfl fraction must lie in (0, 0.95]");
    if (!(t_end_ > grid_.t_start))
      throw ConfigError("wave: empty time interval");
    m_ = static_cast<std::size_t>(grid_.n_mu);
    dmu_ = (1.0 + grid_.delta) / (grid_.n_mu - 1);
    mu_.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) mu_[j] = -grid_.delta + dmu_ * j;
    buf_.resize(m_);
    for (int k = 0; k < 4; ++k) stage_[k].resize(m_);
    fill_coefficients(grid_.t_start, buf_.coeff);
    double speed = max_characteristic_speed(buf_.coeff);
    if (!std::isfinite(speed) || speed <= 0.0)
      throw CFLError("wave: characteristic speeds are not usable");
    double admissible = grid_.cfl * dmu_ / (1.05 * speed);
    double dt = admissible;
    if (prob_.dt_override > 0.0) {
      if (prob_.dt_override > admissible)
        throw CFLError("wave: requested step exceeds the CFL limit");
      dt = prob_.dt_override;
    }
    steps_ = static_cast<long>(std::ceil((t_end_ - grid_.t_start) / dt));
    dt_ = (t_end_ - grid_.t_start) / steps_;
    stride_ = grid_.store_stride > 0
                  ? grid_.store_stride
                  : std::max<long>(1, steps_ / 1600);
  }

  GridField run(bool backward) {
    State s;
    s.resize(m_);
    GridField out;
    out.n_mu = grid_.n_mu;
    out.mu_min = -grid_.delta;
    out.mu_max = 1.0;
    std::vector<std::vector<double>> slices;
    std::vector<double> slice_times;
    auto record = [&](double t) {
      slice_times.push_back(t);
      slices.push_back(s.u);
    };
    double sign = backward ? -1.0 : 1.0;
    double t0 = backward ? t_end_ : grid_.t_start;
    record(t0);
    for (long k = 0; k < steps_; ++k) {
      double t = t0 + sign * dt_ * k;
      step(s, t, sign * dt_, backward);
      double amp = 0.0;
      for (double x : s.u) amp = std::max(amp, std::abs(x));
      if (!std::isfinite(amp) || amp > prob_.blowup_guard)
        throw BlowupError("wave: solution amplitude exceeded the guard");
      if ((k + 1) % stride_ == 0 || k + 1 == steps_)
        record(t0 + sign * dt_ * (k + 1));
    }
    if (backward) {
      std::reverse(slices.begin(), slices.end());
      std::reverse(slice_times.begin(), slice_times.end());
    }
    out.times = std::move(slice_times);
    out.values.reserve(slices.size() * m_);
    for (const auto& sl : slices) out.values.insert(out.values.end(), sl.begin(), sl.end());
    return out;
  }

 private:
  void fill_coefficients(double t, SliceCoefficients& c) {
    if (prob_.coefficients) {
      prob_.coefficients(t, mu_, c);
      check_lorentzian(c);
    } else {
      static_coefficients(grid_.n, mu_, c);
    }
  }

  // Writes the time derivative of (u, w, pi) into (du, dw, dpi).
  void rhs(const State& s, double t, bool backward, State& d) {
    auto& c = buf_.coeff;
    fill_coefficients(t, c);
    const double half_curv = 0.5 * (grid_.n - 3);
    for (std::size_t j = 0; j < m_; ++j) {
      buf_.v[j] = (c.B[j] * s.w[j] - s.pi[j]) / c.C[j];
      buf_.flux[j] = c.A[j] * s.w[j] - c.B[j] * buf_.v[j];
    }
    d_mu(buf_.v, dmu_, buf_.dv);
    d_mu(buf_.flux, dmu_, buf_.dflux);
    const LowerOrderTerm lot = prob_.lower_order.value_or(LowerOrderTerm{});
    const bool has_l = prob_.lower_order.has_value();
    for (std::size_t j = 0; j < m_; ++j) {
      double v = buf_.v[j];
      d.u[j] = v;
      d.w[j] = buf_.dv[j];
      double dpi = buf_.dflux[j] + c.dlogw_mu[j] * buf_.flux[j] -
                   half_curv * (c.a_hat[j] * s.w[j] - c.b_hat[j] * v) -
                   s.pi[j] * c.dlogw_dt[j] + prob_.lambda * s.u[j];
      if (has_l) dpi -= lot.l0 * s.u[j] - lot.l1 * v + lot.l2 * s.w[j];
      if (prob_.forcing) dpi += prob_.forcing(t, mu_[j]);
      d.pi[j] = dpi;
    }
    if (dissipation_ > 0.0) {
      // Fourth-difference damping (an O(h^3) perturbation).  It controls the
      // slowly growing boundary mode of the one-sided closure at the center
      // in forward runs and the grid modes that reverse-time integration
      // blue-shifts through the horizon in backward ones.  The sign follows
      // the marching direction so the term damps either way.
      double scale = dissipation_ / (16.0 * dmu_);
      if (backward) scale = -scale;
      apply_damping(s.u, scale, d.u);
      apply_damping(s.w, scale, d.w);
      apply_damping(s.pi, scale, d.pi);
    }
    if (backward) {
      d.u[0] = d.w[0] = d.pi[0] = 0.0;  // supported at the spacelike boundary
    }
  }

  // Damping in the Gram form B^T B with B the undivided second difference:
  // symmetric negative semidefinite once negated, so it can only dissipate,
  // and the transpose extends coverage to the boundary rows.  On interior
  // rows it reduces to the classical fourth difference.
  void apply_damping(const std::vector<double>& f, double scale,
                     std::vector<double>& df) {
    const std::size_t m = f.size();
    auto& b = damp_scratch_;
    b.assign(m, 0.0);
    for (std::size_t j = 1; j + 1 < m; ++j)
      b[j] = f[j - 1] - 2.0 * f[j] + f[j + 1];
    for (std::size_t j = 0; j < m; ++j) {
      double bb = -2.0 * b[j];
      if (j > 0) bb += b[j - 1];
      if (j + 1 < m) bb += b[j + 1];
      df[j] -= scale * bb;
    }
  }

  void step(State& s, double t, double dt, bool backward) {
    State& k1 = stage_[0];
    State& k2 = stage_[1];
    State& k3 = stage_[2];
    State& k4 = stage_[3];
    rhs(s, t, backward, k1);
    State tmp = s;
    axpy(tmp, s, k1, 0.5 * dt);
    rhs(tmp, t + 0.5 * dt, backward, k2);
    axpy(tmp, s, k2, 0.5 * dt);
    rhs(tmp, t + 0.5 * dt, backward, k3);
    axpy(tmp, s, k3, dt);
    rhs(tmp, t + dt, backward, k4);
    for (std::size_t j = 0; j < m_; ++j) {
      s.u[j] += dt / 6.0 * (k1.u[j] + 2 * k2.u[j] + 2 * k3.u[j] + k4.u[j]);
      s.w[j] += dt / 6.0 * (k1.w[j] + 2 * k2.w[j] + 2 * k3.w[j] + k4.w[j]);
      s.pi[j] += dt / 6.0 * (k1.pi[j] + 2 * k2.pi[j] + 2 * k3.pi[j] + k4.pi[j]);
    }
    if (backward) s.u[0] = s.w[0] = s.pi[0] = 0.0;
  }

  static void axpy(State& out, const State& s, const State& k, double a) {
    for (std::size_t j = 0; j < s.u.size(); ++j) {
      out.u[j] = s.u[j] + a * k.u[j];
      out.w[j] = s.w[j] + a * k.w[j];
      out.pi[j] = s.pi[j] + a * k.pi[j];
    }
  }

  const LinearProblem& prob_;
  WaveGrid grid_;
  double t_end_;
  std::size_t m_ = 0;
  double dmu_ = 0.0, dt_ = 0.0, dissipation_ = 0.0;
  long steps_ = 0, stride_ = 1;
  std::vector<double> mu_;
  std::vector<double> damp_scratch_;
  WorkBuffers buf_;
  State stage_[4];
};

std::vector<double> slice_sup(const GridField& f) {
  std::vector<double> sup(f.times.size(), 0.0);
  for (std::size_t i = 0; i < f.times.size(); ++i)
    for (int j = 0; j < f.n_mu; ++j)
      sup[i] = std::max(sup[i], std::abs(f.at(static_cast<int>(i), j)));
  return sup;
}

}  // namespace

void SliceCoefficients::resize(std::size_t m) {
  A.resize(m);
  B.resize(m);
  C.resize(m);
  a_hat.resize(m);
  b_hat.resize(m);
  dlogw_mu.resize(m);
  dlogw_dt.resize(m);
}

int GridField::column_near(double mu_probe) const {
  double pos = (mu_probe - mu_min) / dmu();
  int j = static_cast<int>(std::lround(pos));
  return std::clamp(j, 0, n_mu - 1);
}

std::vector<double> GridField::probe(double mu_probe) const {
  int j = column_near(mu_probe);
  std::vector<double> series(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) series[i] = at(static_cast<int>(i), j);
  return series;
}

double GridField::max_abs() const {
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  return peak;
}

void static_coefficients(int n, const std::vector<double>& mu, SliceCoefficients& out) {
  (void)n;  // the r^{n-3} volume factor enters via a_hat/b_hat, not here
  out.resize(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    double r2 = 1.0 - mu[j];
    out.A[j] = -4.0 * r2 * mu[j];
    out.B[j] = 2.0 * r2;
    out.C[j] = 1.0;
    out.a_hat[j] = -4.0 * mu[j];
    out.b_hat[j] = 2.0;
    out.dlogw_mu[j] = 0.0;
    out.dlogw_dt[j] = 0.0;
  }
}

CoefficientProvider conformal_coefficients(
    int n, std::function<double(double t, double mu)> factor) {
  return [n, factor](double t, const std::vector<double>& mu, SliceCoefficients& out) {
    static_coefficients(n, mu, out);
    constexpr double h = 1e-6;
    const double half_n = 0.5 * n;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      double c = factor(t, mu[j]);
      if (!(c > 0.0))
        throw SignatureError("wave: conformal factor must stay positive");
      out.A[j] /= c;
      out.B[j] /= c;
      out.C[j] /= c;
      out.a_hat[j] /= c;
      out.b_hat[j] /= c;
      double dc_mu = (factor(t, mu[j] + h) - factor(t, mu[j] - h)) / (2.0 * h);
      double dc_t = (factor(t + h, mu[j]) - factor(t - h, mu[j])) / (2.0 * h);
      out.dlogw_mu[j] = half_n * dc_mu / c;
      out.dlogw_dt[j] = half_n * dc_t / c;
    }
  };
}

GridField solve_forward(const LinearProblem& prob) {
  Solver solver(prob, prob.grid.t_end, false);
  return solver.run(false);
}

GridField solve_backward(const LinearProblem& prob, double t_end, double r) {
  if (prob.forcing) {
    // Screen the forcing decay before paying for the integration: running
    // a backward solve on sub-threshold forcing only produces growth.
    const int nt = 201, nm = 101;
    std::vector<double> times(nt), fsup(nt, 0.0);
    for (int i = 0; i < nt; ++i) {
      times[i] = prob.grid.t_start + (t_end - prob.grid.t_start) * i / (nt - 1);
      for (int j = 0; j < nm; ++j) {
        double mu = -prob.grid.delta + (1.0 + prob.grid.delta) * j / (nm - 1);
        fsup[i] = std::max(fsup[i], std::abs(prob.forcing(times[i], mu)));
      }
    }
    if (auto rate = tail_decay_rate(times, fsup, 1e-13)) {
      if (*rate < r - 0.25)
        throw ConfigError("wave: backward forcing decays slower than the requested weight");
    }
  }
  Solver solver(prob, t_end, true);
  GridField u = solver.run(true);
  if (auto rate = tail_decay_rate(u.times, slice_sup(u), 1e-13)) {
    if (*rate < r - 0.25)
      throw FitError("wave: backward solution decays slower than the requested weight");
  }
  return u;
}

EnergyReport energy_report(const GridField& u, const LinearProblem& prob, double r) {
  EnergyReport rep;
  const std::size_t nt = u.times.size();
  if (nt < 3) throw ConfigError("wave: energy report needs at least three slices");
  const int m = u.n_mu;
  const double h = u.dmu();
  std::vector<double> weight(m);
  for (int j = 0; j < m; ++j) {
    double r2 = std::max(1.0 - u.mu(j), 0.0);
    weight[j] = std::pow(std::sqrt(r2), prob.grid.n - 3);
  }
  auto trap = [&](int j) { return (j == 0 || j == m - 1) ? 0.5 : 1.0; };

  rep.times = u.times;
  rep.energies.assign(nt, 0.0);
  for (std::size_t i = 0; i < nt; ++i) {
    double boost = std::exp(2.0 * r * u.times[i]);
    double e = 0.0;
    for (int j = 0; j < m; ++j) {
      double uu = u.at(static_cast<int>(i), j);
      double w = (j == 0)       ? (u.at(i, 1) - u.at(i, 0)) / h
                 : (j == m - 1) ? (u.at(i, j) - u.at(i, j - 1)) / h
                                : (u.at(i, j + 1) - u.at(i, j - 1)) / (2.0 * h);
      double v;
      if (i == 0)
        v = (u.at(1, j) - u.at(0, j)) / (u.times[1] - u.times[0]);
      else if (i + 1 == nt)
        v = (u.at(i, j) - u.at(i - 1, j)) / (u.times[i] - u.times[i - 1]);
      else
        v = (u.at(i + 1, j) - u.at(i - 1, j)) / (u.times[i + 1] - u.times[i - 1]);
      e += trap(j) * weight[j] * (uu * uu + v * v + w * w);
    }
    rep.energies[i] = boost * e * h;
    rep.sup_energy = std::max(rep.sup_energy, rep.energies[i]);
  }

  if (prob.forcing) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      double dt = (i == 0)        ? u.times[1] - u.times[0]
                  : (i + 1 == nt) ? u.times[i] - u.times[i - 1]
                                  : 0.5 * (u.times[i + 1] - u.times[i - 1]);
      double boost = std::exp(2.0 * r * u.times[i]);
      double row = 0.0;
      for (int j = 0; j < m; ++j) {
        double f = prob.forcing(u.times[i], u.mu(j));
        row += trap(j) * weight[j] * f * f;
      }
      acc += boost * row * h * dt;
    }
    rep.forcing_norm2 = acc;
  }
  rep.fitted_c = rep.forcing_norm2 > 0.0 ? rep.sup_energy / rep.forcing_norm2 : 0.0;
  return rep;
}

}  // namespace dsw
