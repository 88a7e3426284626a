// Error taxonomy shared by all modules.
#pragma once

#include <stdexcept>
#include <string>

namespace dsw {

// Base class so callers can catch everything from this library at once.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  // Short machine-readable category, e.g. "ChartDomainError".
  virtual const char* category() const noexcept = 0;
};

#define DSW_DEFINE_ERROR(NAME)                                        \
  class NAME : public Error {                                         \
  public:                                                             \
    explicit NAME(const std::string& what) : Error(what) {}           \
    const char* category() const noexcept override { return #NAME; }  \
  }

DSW_DEFINE_ERROR(ChartDomainError);   // point/covector outside chart validity
DSW_DEFINE_ERROR(SignatureError);     // metric not Lorentzian (1, n-1)
DSW_DEFINE_ERROR(WeightError);        // weighted field fails the decay gate
DSW_DEFINE_ERROR(LowerBoundError);    // |a+u| dips below the floor
DSW_DEFINE_ERROR(ConvergenceError);   // iterative root finder stagnated
DSW_DEFINE_ERROR(FitError);           // least-squares misfit above bound
DSW_DEFINE_ERROR(CFLError);           // grid not CFL-admissible
DSW_DEFINE_ERROR(BlowupError);        // solution exceeded the guard norm
DSW_DEFINE_ERROR(IntegratorError);    // adaptive step-size underflow
DSW_DEFINE_ERROR(SmallnessError);     // forcing above the contraction gate
DSW_DEFINE_ERROR(DivergenceError);    // Picard ratios >= 1 persistently
DSW_DEFINE_ERROR(InadmissibleError);  // mapping hypothesis violated
DSW_DEFINE_ERROR(NoCaseError);        // no composition case applies
DSW_DEFINE_ERROR(ConfigError);        // bad run configuration

#undef DSW_DEFINE_ERROR

}  // namespace dsw
