#include "dsw/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

#include "dsw/errors.hpp"

namespace dsw {

const char* to_string(DecayModel m) {
  switch (m) {
    case DecayModel::PurePower: return "PurePower";
    case DecayModel::PowerPlusConstant: return "PowerPlusConstant";
    case DecayModel::OscillatoryPower: return "OscillatoryPower";
    case DecayModel::PowerLog: return "PowerLog";
  }
  return "?";
}

namespace {

struct LinearSolve {
  double rms = std::numeric_limits<double>::infinity();
  Eigen::VectorXd coeffs;
};

// Solve for the linear coefficients of the model at fixed (p, omega) and
// return the RMS misfit.
LinearSolve solve_linear(const std::vector<double>& t,
                         const std::vector<double>& u, DecayModel model,
                         double p, double omega) {
  int m = static_cast<int>(t.size());
  int cols = (model == DecayModel::PurePower) ? 1 : 2;
  Eigen::MatrixXd X(m, cols);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    double decay = std::exp(-p * t[i]);
    switch (model) {
      case DecayModel::PurePower:
        X(i, 0) = decay;
        break;
      case DecayModel::PowerPlusConstant:
        X(i, 0) = 1.0;
        X(i, 1) = decay;
        break;
      case DecayModel::PowerLog:
        X(i, 0) = decay;
        X(i, 1) = t[i] * decay;
        break;
      case DecayModel::OscillatoryPower:
        X(i, 0) = decay * std::cos(omega * t[i]);
        X(i, 1) = decay * std::sin(omega * t[i]);
        break;
    }
    y[i] = u[i];
  }
  LinearSolve out;
  out.coeffs = X.colPivHouseholderQr().solve(y);
  out.rms = std::sqrt((X * out.coeffs - y).squaredNorm() / m);
  return out;
}

double golden_section(const std::function<double(double)>& f, double lo,
                      double hi) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-10 * (1.0 + std::abs(a))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Coarse grid scan followed by golden-section refinement of the bracket.
double minimize_1d(const std::function<double(double)>& f, double lo,
                   double hi, int grid) {
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    double p = lo + (hi - lo) * i / grid;
    double v = f(p);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double step = (hi - lo) / grid;
  double a = std::max(lo, lo + best * step - step);
  double b = std::min(hi, lo + best * step + step);
  return golden_section(f, a, b);
}

// Estimate the oscillation frequency from the mean zero-crossing spacing.
double crossing_frequency(const std::vector<double>& t,
                          const std::vector<double>& u) {
  std::vector<double> crossings;
  for (std::size_t i = 1; i < u.size(); ++i)
    if ((u[i - 1] < 0.0) != (u[i] < 0.0)) {
      double w = u[i - 1] / (u[i - 1] - u[i]);
      crossings.push_back(t[i - 1] + w * (t[i] - t[i - 1]));
    }
  if (crossings.size() < 2) return 1.0;
  double spacing =
      (crossings.back() - crossings.front()) / (crossings.size() - 1);
  return M_PI / spacing;
}

// Nelder-Mead on (p, omega) for the oscillatory model.
std::pair<double, double> minimize_2d(
    const std::function<double(double, double)>& f, double p0, double w0) {
  struct Vertex {
    double p, w, val;
  };
  auto eval = [&](double p, double w) {
    return f(std::max(0.0, p), std::abs(w));
  };
  std::array<Vertex, 3> simplex{{{p0, w0, eval(p0, w0)},
                                 {p0 + 0.2, w0, eval(p0 + 0.2, w0)},
                                 {p0, w0 * 1.1 + 0.05, eval(p0, w0 * 1.1 + 0.05)}}};
  for (int it = 0; it < 400; ++it) {
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& a, const Vertex& b) { return a.val < b.val; });
    if (std::abs(simplex[2].val - simplex[0].val) <
        1e-14 * (1.0 + simplex[0].val))
      break;
    double cp = 0.5 * (simplex[0].p + simplex[1].p);
    double cw = 0.5 * (simplex[0].w + simplex[1].w);
    double rp = cp + (cp - simplex[2].p), rw = cw + (cw - simplex[2].w);
    double rv = eval(rp, rw);
    if (rv < simplex[0].val) {
      double ep = cp + 2.0 * (cp - simplex[2].p),
             ew = cw + 2.0 * (cw - simplex[2].w);
      double ev = eval(ep, ew);
      simplex[2] = ev < rv ? Vertex{ep, ew, ev} : Vertex{rp, rw, rv};
    } else if (rv < simplex[1].val) {
      simplex[2] = {rp, rw, rv};
    } else {
      double kp = cp + 0.5 * (simplex[2].p - cp),
             kw = cw + 0.5 * (simplex[2].w - cw);
      double kv = eval(kp, kw);
      if (kv < simplex[2].val) {
        simplex[2] = {kp, kw, kv};
      } else {
        for (int i = 1; i < 3; ++i) {
          simplex[i].p = 0.5 * (simplex[i].p + simplex[0].p);
          simplex[i].w = 0.5 * (simplex[i].w + simplex[0].w);
          simplex[i].val = eval(simplex[i].p, simplex[i].w);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(),
            [](const Vertex& a, const Vertex& b) { return a.val < b.val; });
  return {std::max(0.0, simplex[0].p), std::abs(simplex[0].w)};
}

}  // namespace

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& u,
                   DecayModel model, double residual_bound) {
  if (t.size() != u.size() || t.size() < 8)
    throw ConfigError("fit_decay: need matching series with >= 8 samples");
  if (t.back() - t.front() < 3.0)
    throw ConfigError("fit_decay: window must span at least 3 e-foldings");

  DecayFit fit;
  fit.model = model;
  fit.t_lo = t.front();
  fit.t_hi = t.back();
  fit.log_correction = (model == DecayModel::PowerLog);

  double p = 0.0, omega = 0.0;
  if (model == DecayModel::OscillatoryPower) {
    double w0 = crossing_frequency(t, u);
    auto f = [&](double pp, double ww) {
      return solve_linear(t, u, model, pp, ww).rms;
    };
    // Seed the rate from a coarse scan at the crossing frequency.
    double p0 = minimize_1d([&](double pp) { return f(pp, w0); }, 0.0, 10.0,
                            200);
    std::tie(p, omega) = minimize_2d(f, p0, w0);
  } else {
    p = minimize_1d(
        [&](double pp) { return solve_linear(t, u, model, pp, 0.0).rms; },
        0.0, 10.0, 400);
  }

  LinearSolve sol = solve_linear(t, u, model, p, omega);
  fit.exponent = p;
  fit.frequency = omega;
  fit.residual = sol.rms;
  switch (model) {
    case DecayModel::PurePower:
      fit.amplitude = sol.coeffs[0];
      break;
    case DecayModel::PowerPlusConstant:
      fit.constant = sol.coeffs[0];
      fit.amplitude = sol.coeffs[1];
      break;
    case DecayModel::PowerLog:
      fit.amplitude = sol.coeffs[0];
      break;
    case DecayModel::OscillatoryPower:
      fit.amplitude = std::hypot(sol.coeffs[0], sol.coeffs[1]);
      break;
  }
  if (fit.residual > residual_bound)
    throw FitError("fit_decay: residual " + std::to_string(fit.residual) +
                   " exceeds bound");
  return fit;
}

DecayFit select_decay_fit(const std::vector<double>& t, const std::vector<double>& u,
                          double improvement) {
  constexpr DecayModel order[] = {DecayModel::PurePower, DecayModel::PowerPlusConstant,
                                  DecayModel::PowerLog, DecayModel::OscillatoryPower};
  DecayFit best = fit_decay(t, u, order[0]);
  for (int k = 1; k < 4; ++k) {
    DecayFit trial = fit_decay(t, u, order[k]);
    if (trial.residual < improvement * best.residual) best = trial;
  }
  return best;
}

std::pair<std::vector<double>, std::vector<double>> window_series(
    const std::vector<double>& t, const std::vector<double>& u, double t_lo,
    double t_hi) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t i = 0; i < t.size() && i < u.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    out.first.push_back(t[i]);
    out.second.push_back(u[i]);
  }
  return out;
}

}  // namespace dsw
