// Exact-rational calculus for operator classes with Sobolev coefficients.
//
// Operators here are described by *classes*, not symbols: a class records the
// differential order m, the number k of fiber derivatives controlled, and the
// Sobolev regularity s of the coefficients.  The module provides
//   * mapping():  when does A : H_b^{s'} -> H_b^{s'-m} hold,
//   * compose():  the expansion P.Q = sum_{j<k} E_j + R with the class of each
//                 term and of the remainder inferred from the admissible case,
//   * threshold_real_principal(): the minimal coefficient regularity that
//                 closes the real-principal-type propagation argument,
//   * threshold_radial() / weight_shift_subprincipal(): the radial-point
//                 threshold inequalities and the order-reduction weight shift.
// Everything is exact rational arithmetic; symbolic orders (s, s', and the
// dimension via nu = n/2) are carried as linear expressions and inequalities
// are decided by an explicit entailment check against stated assumptions, so
// no case dispatch ever depends on float slop.
#pragma once

#include <boost/rational.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsw/errors.hpp"

namespace dsw {

using Rat = boost::rational<long long>;

// ---------------------------------------------------------------------------
// Linear expressions and inequalities over named rational symbols.

// constant + sum_i coeffs[name_i] * name_i.  The name "nu" is reserved for
// n/2, so bounds stay uniform in the dimension until a concrete n is given.
struct LinExpr {
  Rat constant{0};
  std::map<std::string, Rat> coeffs;

  LinExpr() = default;
  LinExpr(Rat c) : constant(c) {}                // NOLINT(runtime/explicit)
  LinExpr(long long c) : constant(c) {}          // NOLINT(runtime/explicit)
  static LinExpr var(const std::string& name, Rat scale = Rat(1));
  static LinExpr nu() { return var("nu"); }

  bool is_constant() const { return coeffs.empty(); }
  bool is_zero() const { return is_constant() && constant == Rat(0); }
  // Replaces one symbol by a rational value.
  LinExpr substituted(const std::string& name, Rat value) const;

  LinExpr operator-() const;
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(Rat c);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, Rat c) { return a *= c; }
  friend LinExpr operator*(Rat c, LinExpr a) { return a *= c; }
  friend bool operator==(const LinExpr& a, const LinExpr& b);
  friend bool operator!=(const LinExpr& a, const LinExpr& b) { return !(a == b); }

  // Rendering like "s' - s - 3" or "7/2 + nu"; used in error messages.
  std::string str() const;
};

// The assertion expr > 0 (strict) or expr >= 0.
struct Ineq {
  LinExpr expr;
  bool strict = true;

  static Ineq ge(LinExpr e) { return {std::move(e), false}; }
  static Ineq gt(LinExpr e) { return {std::move(e), true}; }
  std::string str() const;
};

// True when the target provably follows from the assumptions: either its
// expression is a constant of the right sign, or subtracting some sub-multiset
// of assumption expressions leaves such a constant.  (Nonnegative combinations
// with unit coefficients cover every deduction the sources actually make; at
// most 16 assumptions are supported.)
bool entails(const std::vector<Ineq>& assumptions, const Ineq& target);

// max(e, 0) when the sign of e is decidable (constant, or settled by the
// assumptions); nullopt otherwise.
std::optional<LinExpr> pos_part(const LinExpr& e,
                                const std::vector<Ineq>& assumptions = {});

// ---------------------------------------------------------------------------
// Operator classes.

// k value meaning "all fiber derivatives controlled".
inline constexpr int kAllDerivs = -1;

// Coefficient regularity: a finite linear expression or H_b^infinity.
struct SobolevOrder {
  bool infinite = false;
  LinExpr value;  // meaningful only when !infinite

  SobolevOrder() = default;
  SobolevOrder(LinExpr v) : value(std::move(v)) {}  // NOLINT(runtime/explicit)
  SobolevOrder(bool infty, LinExpr v) : infinite(infty), value(std::move(v)) {}
  static SobolevOrder inf() { return SobolevOrder(true, LinExpr{}); }
  friend bool operator==(const SobolevOrder& a, const SobolevOrder& b);
  std::string str() const;
};

enum class AtomFlavor {
  Smooth,       // classical: smooth symbol of order m
  CoefLeft,     // H_b^s-coefficient times a classical operator of order m
  SymbolClass,  // symbol of order m with H_b^s coefficients, k fiber derivs
};

// One operator class; an OperatorClass is a finite intersection of these.
struct ClassAtom {
  AtomFlavor flavor = AtomFlavor::SymbolClass;
  Rat m{0};              // differential order
  int k = 0;             // fiber derivatives controlled (kAllDerivs = all)
  SobolevOrder s;        // coefficient regularity (ignored for Smooth)
  bool b_flag = false;   // totally characteristic variant, carries a weight
  Rat alpha{0};          // weight (meaningful only with b_flag)

  friend bool operator==(const ClassAtom& a, const ClassAtom& b);
  std::string str() const;
};

struct OperatorClass {
  std::vector<ClassAtom> atoms;  // intersection; kept sorted by normalize()

  friend bool operator==(const OperatorClass& a, const OperatorClass& b) {
    return a.atoms == b.atoms;
  }
  std::string str() const;
};

OperatorClass smooth_op(Rat m);
OperatorClass coef_left(Rat m, SobolevOrder s);
OperatorClass symbol_class(Rat m, int k, SobolevOrder s, bool b_flag = false,
                           Rat alpha = Rat(0));

// True when membership in `inner` provably implies membership in `outer`,
// using only the stated inclusions between the three flavors (coefficient-left
// classes embed into symbol classes of every k; more derivatives, lower order,
// or more regular coefficients shrink a class).  Mixed b-flags, differing
// weights, and undecidable order comparisons are treated as incomparable.
bool contains(const ClassAtom& inner, const ClassAtom& outer,
              const std::vector<Ineq>& assumptions = {});

// Deduplicates and drops atoms implied by another atom of the intersection,
// then sorts into a canonical order.  Idempotent.
OperatorClass normalize(const OperatorClass& c,
                        const std::vector<Ineq>& assumptions = {});

// ---------------------------------------------------------------------------
// Mapping properties.

struct SpaceSpec {
  Rat s{0};  // Sobolev order of the source space
  Rat r{0};  // weight of the source space
  friend bool operator==(const SpaceSpec& a, const SpaceSpec& b) {
    return a.s == b.s && a.r == b.r;
  }
};

// Target space of A : H_b^{src.s, src.r} -> H_b^{src.s - m, src.r}, where m is
// the order of the strongest atom whose hypotheses hold: a finite-regularity
// atom of order m needs s >= src.s - m and s > n/2 + (m - src.s)_+, and only
// b-flagged atoms (and Smooth ones) transport a nonzero weight.  Throws
// InadmissibleError naming the violated inequality when no atom qualifies.
SpaceSpec mapping(const OperatorClass& A, const SpaceSpec& src, int n,
                  const std::vector<Ineq>& assumptions = {});

// ---------------------------------------------------------------------------
// Composition.

struct ComposeOptions {
  int k_prime = 0;               // remainder tuning order k'
  std::optional<int> n;          // concrete dimension, if known
  std::vector<Ineq> assumptions; // symbolic facts, e.g. s' - s - 3 >= 0
};

struct Composition {
  // Classes of the expansion terms E_0 .. E_{k-1}.
  std::vector<OperatorClass> terms;
  // Class of the remainder (intersection when several cases match); empty
  // when the only information is the split below.
  OperatorClass remainder;
  // Low-truncation structure: R = R1 * L + L * R2 with L of class
  // Smooth(order) and R1, R2 of the recorded class (no b-flag is claimed).
  struct LambdaSplit {
    Rat order{0};
    OperatorClass factor;
    friend bool operator==(const LambdaSplit& a, const LambdaSplit& b) {
      return a.order == b.order && a.factor == b.factor;
    }
  };
  std::optional<LambdaSplit> split;
  // Which composition cases matched, e.g. {"1a", "3"}.
  std::vector<std::string> matched_cases;
  // Human-readable record of every condition checked.
  std::vector<std::string> trace;
};

// Expands P.Q to k terms plus a remainder.  P and Q must be single-atom
// classes.  Cases tried, by the flavors of (P, Q):
//   rough.rough   finite s: "1a";  s = infinity: "1b"
//   smooth.rough  "2a" (k >= m + k'), "3" (k <= m + k'); both at equality
//   rough.smooth  "2b" (P's own k plays the role of k')
//   smooth.smooth classical calculus ("smooth")
// Throws NoCaseError listing, per case, the hypotheses that failed.
Composition compose(const OperatorClass& P, const OperatorClass& Q, int k,
                    const ComposeOptions& opts = {});

// ---------------------------------------------------------------------------
// Threshold regularity.

struct RealPrincipalThreshold {
  Rat m0;        // optimal order-reduction parameter
  LinExpr bound; // the argument closes for s > bound (contains nu if n unset)
};

// Minimizes, over the order-reduction parameter m0 >= 1 with
// s_tilde >= (5 - m0)/2, the lower bound
//   s > max(n/2 + 2 + (3/2 - s_tilde)_+, n/2 + 3 + m0/2),
// i.e. the collected constraints of the propagation argument.  The companion
// requirement s_tilde <= s - 1 is implicit and not returned.  With n unset the
// bound is symbolic in nu = n/2.
RealPrincipalThreshold threshold_real_principal(Rat s_tilde,
                                                std::optional<int> n = {});

// The bound above for one concrete m0, or nullopt when (s_tilde, m0) is
// infeasible; lets callers verify the optimality of threshold_real_principal.
std::optional<LinExpr> real_principal_bound_for(Rat s_tilde, Rat m0,
                                                std::optional<int> n = {});

enum class RadialBehavior {
  IntoBoundary,  // estimates propagate into the radial set: supra-threshold
  FromBoundary,  // estimates propagate out of the radial set: sub-threshold
  Neither,       // threshold quantity vanishes or straddles zero
};

// Evaluates the two strict radial-point inequalities
//   into:  s_tilde + (m-1)/2 - 1 + (beta_hat_inf - r*beta_tilde) > 0
//   from:  s_tilde + (m-1)/2     + (beta_hat_sup - r*beta_tilde) < 0
// (static de Sitter: beta_hat = 0, beta_tilde = 1).
RadialBehavior threshold_radial(Rat s_tilde, Rat m, Rat r, Rat beta_hat_inf,
                                Rat beta_hat_sup, Rat beta_tilde);

// Effective beta_hat after reducing an order-m operator to order m0:
// beta_hat + (m - m0)/2 - r*beta_tilde.  beta0 scales the subprincipal symbol
// but cancels from the threshold, so it does not enter the shift; it is
// accepted for signature fidelity with the reduction lemma.
Rat weight_shift_subprincipal(Rat m, Rat m0, Rat r, Rat beta0, Rat beta_tilde,
                              Rat beta_hat);

}  // namespace dsw
