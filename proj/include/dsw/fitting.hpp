// Late-time decay fits in t = -log tau.  The linear coefficients of each
// model are solved exactly by least squares for fixed nonlinear parameters
// (variable projection); only the decay rate -- and for the oscillatory
// model the frequency -- is searched.
#pragma once

#include <vector>

namespace dsw {

enum class DecayModel { PurePower, PowerPlusConstant, OscillatoryPower, PowerLog };

const char* to_string(DecayModel m);

struct DecayFit {
  DecayModel model = DecayModel::PurePower;
  double exponent = 0.0;   // decay rate p of e^{-p t} (= power of tau)
  double frequency = 0.0;  // oscillation frequency in t (oscillatory model)
  bool log_correction = false;
  double residual = 0.0;   // RMS misfit over the window
  double t_lo = 0.0, t_hi = 0.0;
  double constant = 0.0;   // fitted constant term (constant-plus-decay model)
  double amplitude = 0.0;  // leading fitted amplitude
};

// Least-squares fit of the model on the sampled series.  The window must
// span at least 3 e-foldings (ConfigError otherwise); FitError if the RMS
// residual exceeds residual_bound.
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& u,
                   DecayModel model, double residual_bound = 1e300);

// Fits every model and keeps the one with the smallest residual, walking
// from fewer to more parameters; a richer model displaces the incumbent
// only when it shrinks the RMS residual below improvement * incumbent.
DecayFit select_decay_fit(const std::vector<double>& t, const std::vector<double>& u,
                          double improvement = 0.5);

// Restriction of a sampled series to t in [t_lo, t_hi].
std::pair<std::vector<double>, std::vector<double>> window_series(
    const std::vector<double>& t, const std::vector<double>& u, double t_lo,
    double t_hi);

}  // namespace dsw
