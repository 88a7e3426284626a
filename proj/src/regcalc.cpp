#include "dsw/regcalc.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace dsw {

namespace {

std::string ratstr(const Rat& r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << "/" << r.denominator();
  return os.str();
}

// Substitutes nu = n/2 into an expression when the dimension is known.
LinExpr with_nu(const LinExpr& e, const std::optional<int>& n) {
  if (!n) return e;
  return e.substituted("nu", Rat(*n, 2));
}

std::vector<Ineq> with_nu(const std::vector<Ineq>& as,
                          const std::optional<int>& n) {
  if (!n) return as;
  std::vector<Ineq> out;
  out.reserve(as.size());
  for (const auto& a : as) out.push_back({with_nu(a.expr, n), a.strict});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// LinExpr

LinExpr LinExpr::var(const std::string& name, Rat scale) {
  LinExpr e;
  if (scale != Rat(0)) e.coeffs[name] = scale;
  return e;
}

LinExpr LinExpr::substituted(const std::string& name, Rat value) const {
  LinExpr e = *this;
  auto it = e.coeffs.find(name);
  if (it != e.coeffs.end()) {
    e.constant += it->second * value;
    e.coeffs.erase(it);
  }
  return e;
}

LinExpr LinExpr::operator-() const {
  LinExpr e;
  e.constant = -constant;
  for (const auto& [name, c] : coeffs) e.coeffs[name] = -c;
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  constant += o.constant;
  for (const auto& [name, c] : o.coeffs) {
    Rat v = coeffs[name] + c;
    if (v == Rat(0)) {
      coeffs.erase(name);
    } else {
      coeffs[name] = v;
    }
  }
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) { return *this += -o; }

LinExpr& LinExpr::operator*=(Rat c) {
  if (c == Rat(0)) {
    coeffs.clear();
    constant = Rat(0);
    return *this;
  }
  constant *= c;
  for (auto& [name, v] : coeffs) v *= c;
  return *this;
}

bool operator==(const LinExpr& a, const LinExpr& b) {
  return a.constant == b.constant && a.coeffs == b.coeffs;
}

std::string LinExpr::str() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, c] : coeffs) {
    if (first) {
      if (c == Rat(-1)) {
        os << "-";
      } else if (c != Rat(1)) {
        os << ratstr(c) << " ";
      }
    } else {
      os << (c > Rat(0) ? " + " : " - ");
      Rat a = boost::abs(c);
      if (a != Rat(1)) os << ratstr(a) << " ";
    }
    os << name;
    first = false;
  }
  if (first) return ratstr(constant);
  if (constant > Rat(0)) os << " + " << ratstr(constant);
  if (constant < Rat(0)) os << " - " << ratstr(-constant);
  return os.str();
}

std::string Ineq::str() const {
  return expr.str() + (strict ? " > 0" : " >= 0");
}

bool entails(const std::vector<Ineq>& assumptions, const Ineq& target) {
  if (assumptions.size() > 16)
    throw ConfigError("entails: more than 16 assumptions");
  auto settled = [&](const LinExpr& d, bool used_strict) {
    if (!d.is_constant()) return false;
    if (target.strict)
      return d.constant > Rat(0) || (d.constant == Rat(0) && used_strict);
    return d.constant >= Rat(0);
  };
  if (settled(target.expr, false)) return true;
  const int na = static_cast<int>(assumptions.size());
  for (unsigned mask = 1; mask < (1u << na); ++mask) {
    LinExpr d = target.expr;
    bool used_strict = false;
    for (int i = 0; i < na; ++i) {
      if (mask & (1u << i)) {
        d -= assumptions[i].expr;
        used_strict = used_strict || assumptions[i].strict;
      }
    }
    if (settled(d, used_strict)) return true;
  }
  return false;
}

std::optional<LinExpr> pos_part(const LinExpr& e,
                                const std::vector<Ineq>& assumptions) {
  if (e.is_constant()) return LinExpr(std::max(e.constant, Rat(0)));
  if (entails(assumptions, Ineq::ge(e))) return e;
  if (entails(assumptions, Ineq::ge(-e))) return LinExpr(Rat(0));
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Atoms and classes

bool operator==(const SobolevOrder& a, const SobolevOrder& b) {
  if (a.infinite != b.infinite) return false;
  return a.infinite || a.value == b.value;
}

std::string SobolevOrder::str() const { return infinite ? "inf" : value.str(); }

bool operator==(const ClassAtom& a, const ClassAtom& b) {
  return a.flavor == b.flavor && a.m == b.m && a.k == b.k && a.s == b.s &&
         a.b_flag == b.b_flag && a.alpha == b.alpha;
}

std::string ClassAtom::str() const {
  const std::string psi = b_flag ? "Psi_b" : "Psi";
  std::ostringstream os;
  switch (flavor) {
    case AtomFlavor::Smooth:
      os << psi << "^{" << ratstr(m) << "}";
      break;
    case AtomFlavor::CoefLeft:
      os << "Hb^{" << s.str() << "} " << psi << "^{" << ratstr(m) << "}";
      break;
    case AtomFlavor::SymbolClass:
      os << psi << "^{" << ratstr(m) << ";"
         << (k == kAllDerivs ? std::string("inf") : std::to_string(k))
         << "}Hb^{" << s.str() << "}";
      break;
  }
  if (b_flag && alpha != Rat(0)) os << "[alpha=" << ratstr(alpha) << "]";
  return os.str();
}

std::string OperatorClass::str() const {
  std::string out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (i) out += " cap ";
    out += atoms[i].str();
  }
  return out.empty() ? "(empty)" : out;
}

OperatorClass smooth_op(Rat m) {
  ClassAtom a;
  a.flavor = AtomFlavor::Smooth;
  a.m = m;
  return {{a}};
}

OperatorClass coef_left(Rat m, SobolevOrder s) {
  ClassAtom a;
  a.flavor = AtomFlavor::CoefLeft;
  a.m = m;
  a.s = std::move(s);
  return {{a}};
}

OperatorClass symbol_class(Rat m, int k, SobolevOrder s, bool b_flag,
                           Rat alpha) {
  ClassAtom a;
  a.flavor = AtomFlavor::SymbolClass;
  a.m = m;
  a.k = k;
  a.s = std::move(s);
  a.b_flag = b_flag;
  a.alpha = b_flag ? alpha : Rat(0);
  return {{a}};
}

namespace {

// s_a >= s_b in the decidable sense.
bool sobolev_ge(const SobolevOrder& a, const SobolevOrder& b,
                const std::vector<Ineq>& as) {
  if (a.infinite) return true;
  if (b.infinite) return false;
  return entails(as, Ineq::ge(a.value - b.value));
}

// a controls at least as many fiber derivatives as b.
bool derivs_ge(int a, int b) {
  if (a == kAllDerivs) return true;
  if (b == kAllDerivs) return false;
  return a >= b;
}

}  // namespace

bool contains(const ClassAtom& inner, const ClassAtom& outer,
              const std::vector<Ineq>& assumptions) {
  // Mixed totally-characteristic flags or differing weights: incomparable.
  if (inner.b_flag != outer.b_flag) return false;
  if (inner.b_flag && inner.alpha != outer.alpha) return false;
  const bool order_le = inner.m <= outer.m;
  switch (inner.flavor) {
    case AtomFlavor::Smooth:
      // Smooth symbols have no Sobolev coefficients, so they only embed into
      // other smooth classes.
      return outer.flavor == AtomFlavor::Smooth && order_le;
    case AtomFlavor::CoefLeft:
      if (outer.flavor == AtomFlavor::Smooth) return false;
      // Hb^s Psi^m sits inside Psi^{m;k}Hb^s for every k: each fiber
      // derivative lands on the smooth factor only.
      return order_le && sobolev_ge(inner.s, outer.s, assumptions);
    case AtomFlavor::SymbolClass:
      if (outer.flavor != AtomFlavor::SymbolClass) return false;
      return order_le && derivs_ge(inner.k, outer.k) &&
             sobolev_ge(inner.s, outer.s, assumptions);
  }
  return false;
}

OperatorClass normalize(const OperatorClass& c,
                        const std::vector<Ineq>& assumptions) {
  std::vector<ClassAtom> kept;
  for (const auto& a : c.atoms) {
    bool redundant = false;
    for (const auto& b : kept) {
      if (b == a || contains(b, a, assumptions)) {
        redundant = true;
        break;
      }
    }
    if (redundant) continue;
    kept.erase(std::remove_if(kept.begin(), kept.end(),
                              [&](const ClassAtom& b) {
                                return contains(a, b, assumptions);
                              }),
               kept.end());
    kept.push_back(a);
  }
  auto key = [](const ClassAtom& a) {
    return std::make_tuple(static_cast<int>(a.flavor), a.m,
                           a.k == kAllDerivs ? 1 << 30 : a.k, a.s.infinite,
                           a.s.value.constant, a.b_flag, a.alpha, a.str());
  };
  std::sort(kept.begin(), kept.end(),
            [&](const ClassAtom& a, const ClassAtom& b) {
              return key(a) < key(b);
            });
  return {std::move(kept)};
}

// ---------------------------------------------------------------------------
// Mapping

SpaceSpec mapping(const OperatorClass& A, const SpaceSpec& src, int n,
                  const std::vector<Ineq>& assumptions) {
  if (A.atoms.empty()) throw ConfigError("mapping: empty operator class");
  const Rat nu(n, 2);
  const auto as = with_nu(assumptions, n);
  std::optional<Rat> best_m;
  std::vector<std::string> failures;
  for (const auto& atom : A.atoms) {
    if (atom.flavor == AtomFlavor::Smooth) {
      // The smooth calculus acts on every weighted space.
      if (!best_m || atom.m < *best_m) best_m = atom.m;
      continue;
    }
    bool ok = true;
    if (!atom.s.infinite) {
      const LinExpr s = atom.s.value.substituted("nu", nu);
      // s >= s' - m
      const LinExpr e1 = s - LinExpr(src.s - atom.m);
      if (!entails(as, Ineq::ge(e1))) {
        failures.push_back(atom.str() + ": needs s >= s' - m = " +
                           ratstr(src.s - atom.m) + ", have s = " + s.str());
        ok = false;
      }
      // s > n/2 + (m - s')_+
      const Rat floor = nu + std::max(Rat(0), atom.m - src.s);
      const LinExpr e2 = s - LinExpr(floor);
      if (!entails(as, Ineq::gt(e2))) {
        failures.push_back(atom.str() + ": needs s > n/2 + (m - s')_+ = " +
                           ratstr(floor) + ", have s = " + s.str());
        ok = false;
      }
    }
    if (src.r != Rat(0) && !atom.b_flag) {
      failures.push_back(atom.str() +
                         ": weight r = " + ratstr(src.r) +
                         " transports only in the totally characteristic "
                         "(b-flagged) class");
      ok = false;
    }
    if (ok && (!best_m || atom.m < *best_m)) best_m = atom.m;
  }
  if (!best_m) {
    std::string msg = "mapping inadmissible on Hb^{" + ratstr(src.s) + "," +
                      ratstr(src.r) + "}:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw InadmissibleError(msg);
  }
  return {src.s - *best_m, src.r};
}

// ---------------------------------------------------------------------------
// Composition

namespace {

SobolevOrder shifted(const SobolevOrder& s, const Rat& d) {
  if (s.infinite) return s;
  return SobolevOrder(false, s.value - LinExpr(d));
}

struct CaseResult {
  std::string name;
  std::vector<ClassAtom> term_atoms;  // one per expansion index j < k
  std::vector<ClassAtom> rem_atoms;
  std::optional<Composition::LambdaSplit> split;
};

ClassAtom rough(Rat m, SobolevOrder s, bool b, Rat alpha) {
  ClassAtom a;
  a.flavor = AtomFlavor::SymbolClass;
  a.m = m;
  a.k = 0;
  a.s = std::move(s);
  a.b_flag = b;
  a.alpha = b ? alpha : Rat(0);
  return a;
}

ClassAtom smooth_atom(Rat m) {
  ClassAtom a;
  a.flavor = AtomFlavor::Smooth;
  a.m = m;
  return a;
}

// Tracks the hypotheses of one case; reports them into the shared trace.
class CaseCheck {
 public:
  CaseCheck(std::string name, std::vector<std::string>& trace)
      : name_(std::move(name)), trace_(&trace) {}

  void require(const std::string& what, bool ok) {
    trace_->push_back("case " + name_ + ": " + what +
                      (ok ? " : holds" : " : FAILS"));
    if (!ok) failed_.push_back(what);
  }

  bool passed() const { return failed_.empty(); }
  const std::string& name() const { return name_; }
  std::string failure_summary() const {
    std::string out = "case " + name_ + " needs";
    for (std::size_t i = 0; i < failed_.size(); ++i)
      out += (i ? "; " : " ") + failed_[i];
    return out;
  }

 private:
  std::string name_;
  std::vector<std::string>* trace_;
  std::vector<std::string> failed_;
};

}  // namespace

Composition compose(const OperatorClass& P, const OperatorClass& Q, int k,
                    const ComposeOptions& opts) {
  if (k < 0) throw ConfigError("compose: negative expansion order k");
  if (opts.k_prime < 0) throw ConfigError("compose: negative k'");
  if (P.atoms.size() != 1 || Q.atoms.size() != 1)
    throw ConfigError(
        "compose: operands must be single-class; pick one atom of the "
        "intersection");

  ClassAtom pa = P.atoms[0];
  ClassAtom qa = Q.atoms[0];
  const auto as = with_nu(opts.assumptions, opts.n);
  auto subst = [&](SobolevOrder s) {
    if (!s.infinite) s.value = with_nu(s.value, opts.n);
    return s;
  };
  pa.s = subst(pa.s);
  qa.s = subst(qa.s);
  // A coefficient-left factor controls every fiber derivative.
  if (pa.flavor == AtomFlavor::CoefLeft) {
    pa.flavor = AtomFlavor::SymbolClass;
    pa.k = kAllDerivs;
  }
  if (qa.flavor == AtomFlavor::CoefLeft) {
    qa.flavor = AtomFlavor::SymbolClass;
    qa.k = 0;
  }

  const bool p_smooth = pa.flavor == AtomFlavor::Smooth;
  const bool q_smooth = qa.flavor == AtomFlavor::Smooth;
  const Rat m = pa.m;
  const Rat mq = qa.m;
  const int kp = opts.k_prime;
  const LinExpr nu_expr =
      opts.n ? LinExpr(Rat(*opts.n, 2)) : LinExpr::nu();

  Composition out;
  std::vector<CaseResult> matched;
  std::vector<std::string> misses;

  auto ent = [&](const Ineq& q) { return entails(as, q); };
  auto derivs_str = [](int kk) {
    return kk == kAllDerivs ? std::string("inf") : std::to_string(kk);
  };

  // Output flavor rules: a rough-rough composition stays totally
  // characteristic only when both factors are; a smooth factor is neutral.
  const bool b_out = (p_smooth || pa.b_flag) && (q_smooth || qa.b_flag) &&
                     !(p_smooth && q_smooth);
  const Rat alpha_out = pa.alpha + qa.alpha;

  if (p_smooth && q_smooth) {
    CaseCheck c("smooth", out.trace);
    c.require("nothing (classical calculus)", true);
    CaseResult r;
    r.name = "smooth";
    for (int j = 0; j < k; ++j) r.term_atoms.push_back(smooth_atom(m + mq - j));
    r.rem_atoms.push_back(smooth_atom(m + mq - k));
    matched.push_back(std::move(r));
  } else if (!p_smooth && q_smooth) {
    // The left factor's own derivative count plays the role of k'.
    CaseCheck c("2b", out.trace);
    c.require("k <= k'(P) (" + std::to_string(k) + " <= " + derivs_str(pa.k) +
                  ")",
              derivs_ge(pa.k, k));
    c.require("k'(P) >= m (" + derivs_str(pa.k) + " >= " + ratstr(m) + ")",
              pa.k == kAllDerivs || Rat(pa.k) >= m);
    if (c.passed()) {
      CaseResult r;
      r.name = "2b";
      for (int j = 0; j < k; ++j)
        r.term_atoms.push_back(rough(m + mq - j, pa.s, b_out, alpha_out));
      r.rem_atoms.push_back(rough(m + mq - k, pa.s, b_out, alpha_out));
      matched.push_back(std::move(r));
    } else {
      misses.push_back(c.failure_summary());
    }
  } else if (p_smooth && !q_smooth) {
    {
      CaseCheck c("2a", out.trace);
      c.require("k >= m + k' (" + std::to_string(k) +
                    " >= " + ratstr(m + kp) + ")",
                Rat(k) >= m + kp);
      c.require("k >= k' (" + std::to_string(k) + " >= " + std::to_string(kp) +
                    ")",
                k >= kp);
      if (c.passed()) {
        CaseResult r;
        r.name = "2a";
        for (int j = 0; j < k; ++j)
          r.term_atoms.push_back(
              rough(m + mq - j, shifted(qa.s, Rat(j)), b_out, alpha_out));
        r.rem_atoms.push_back(
            rough(mq - kp, shifted(qa.s, Rat(k)), b_out, alpha_out));
        r.rem_atoms.push_back(rough(m + mq - k,
                                    shifted(qa.s, Rat(2 * k) - m - kp), b_out,
                                    alpha_out));
        matched.push_back(std::move(r));
      } else {
        misses.push_back(c.failure_summary());
      }
    }
    {
      CaseCheck c("3", out.trace);
      c.require("k <= m + k' (" + std::to_string(k) +
                    " <= " + ratstr(m + kp) + ")",
                Rat(k) <= m + kp);
      c.require("k >= k' (" + std::to_string(k) + " >= " + std::to_string(kp) +
                    ")",
                k >= kp);
      if (c.passed()) {
        CaseResult r;
        r.name = "3";
        for (int j = 0; j < k; ++j)
          r.term_atoms.push_back(
              rough(m + mq - j, shifted(qa.s, Rat(j)), b_out, alpha_out));
        // No totally-characteristic claim is made for the split factors.
        Composition::LambdaSplit split;
        split.order = m + kp - k;
        split.factor = {{rough(mq - kp, shifted(qa.s, Rat(k)), false, Rat(0))}};
        r.split = split;
        matched.push_back(std::move(r));
      } else {
        misses.push_back(c.failure_summary());
      }
    }
  } else if (pa.s.infinite) {
    CaseCheck c("1b", out.trace);
    c.require("P controls k derivatives (" + derivs_str(pa.k) +
                  " >= " + std::to_string(k) + ")",
              derivs_ge(pa.k, k));
    c.require("k >= m + k' (" + std::to_string(k) + " >= " + ratstr(m + kp) +
                  ")",
              Rat(k) >= m + kp);
    c.require("k >= k' (" + std::to_string(k) + " >= " + std::to_string(kp) +
                  ")",
              k >= kp);
    if (c.passed()) {
      CaseResult r;
      r.name = "1b";
      for (int j = 0; j < k; ++j)
        r.term_atoms.push_back(
            rough(m + mq - j, shifted(qa.s, Rat(j)), b_out, alpha_out));
      r.rem_atoms.push_back(
          rough(mq - kp, shifted(qa.s, Rat(k)), b_out, alpha_out));
      r.rem_atoms.push_back(rough(m + mq - k,
                                  shifted(qa.s, Rat(2 * k) - m - kp), b_out,
                                  alpha_out));
      matched.push_back(std::move(r));
    } else {
      misses.push_back(c.failure_summary());
    }
  } else {
    CaseCheck c("1a", out.trace);
    c.require("P controls k derivatives (" + derivs_str(pa.k) +
                  " >= " + std::to_string(k) + ")",
              derivs_ge(pa.k, k));
    c.require("k >= m + k' (" + std::to_string(k) + " >= " + ratstr(m + kp) +
                  ")",
              Rat(k) >= m + kp);
    c.require("k >= k' (" + std::to_string(k) + " >= " + std::to_string(kp) +
                  ")",
              k >= kp);
    const Ineq above_half = Ineq::gt(pa.s.value - nu_expr);
    c.require("s > n/2 (" + above_half.str() + ")", ent(above_half));
    bool plain = qa.s.infinite;
    bool bracket = qa.s.infinite;
    if (!qa.s.infinite) {
      const Ineq cond_plain = Ineq::ge(qa.s.value - pa.s.value - LinExpr(k));
      const Ineq cond_bracket = Ineq::ge(qa.s.value - pa.s.value -
                                         LinExpr(Rat(2 * k) - m - kp));
      plain = ent(cond_plain);
      bracket = ent(cond_bracket);
      out.trace.push_back("case 1a: s <= s' - k (" + cond_plain.str() +
                          ") : " + (plain ? "holds" : "fails"));
      out.trace.push_back("case 1a: s <= s' - 2k + m + k' (" +
                          cond_bracket.str() + ") : " +
                          (bracket ? "holds" : "fails"));
    }
    c.require("s <= s' - k or s <= s' - 2k + m + k'", plain || bracket);
    if (c.passed()) {
      CaseResult r;
      r.name = "1a";
      for (int j = 0; j < k; ++j)
        r.term_atoms.push_back(rough(m + mq - j, pa.s, b_out, alpha_out));
      if (plain) r.rem_atoms.push_back(rough(mq - kp, pa.s, b_out, alpha_out));
      if (bracket)
        r.rem_atoms.push_back(rough(m + mq - k, pa.s, b_out, alpha_out));
      matched.push_back(std::move(r));
    } else {
      misses.push_back(c.failure_summary());
    }
  }

  if (matched.empty()) {
    std::string msg = "no composition case applies to " + pa.str() + " . " +
                      qa.str() + " at k = " + std::to_string(k) +
                      ", k' = " + std::to_string(kp) + ":";
    for (const auto& miss : misses) msg += "\n  " + miss;
    throw NoCaseError(msg);
  }

  out.terms.resize(k);
  for (int j = 0; j < k; ++j) {
    OperatorClass cls;
    for (const auto& r : matched) cls.atoms.push_back(r.term_atoms[j]);
    out.terms[j] = normalize(cls, as);
  }
  OperatorClass rem;
  for (const auto& r : matched) {
    rem.atoms.insert(rem.atoms.end(), r.rem_atoms.begin(), r.rem_atoms.end());
    if (r.split) out.split = r.split;
    out.matched_cases.push_back(r.name);
  }
  out.remainder = normalize(rem, as);
  return out;
}

// ---------------------------------------------------------------------------
// Thresholds

std::optional<LinExpr> real_principal_bound_for(Rat s_tilde, Rat m0,
                                                std::optional<int> n) {
  if (m0 < Rat(1)) return std::nullopt;
  if (s_tilde < (Rat(5) - m0) / Rat(2)) return std::nullopt;
  const Rat from_structure = Rat(2) + std::max(Rat(0), Rat(3, 2) - s_tilde);
  const Rat from_reduction = Rat(3) + m0 / Rat(2);
  const LinExpr nu_expr = n ? LinExpr(Rat(*n, 2)) : LinExpr::nu();
  return nu_expr + LinExpr(std::max(from_structure, from_reduction));
}

RealPrincipalThreshold threshold_real_principal(Rat s_tilde,
                                                std::optional<int> n) {
  // The bound grows with m0, so the minimum sits at the smallest admissible
  // order-reduction parameter.
  const Rat m0 = std::max(Rat(1), Rat(5) - Rat(2) * s_tilde);
  auto bound = real_principal_bound_for(s_tilde, m0, n);
  return {m0, *bound};
}

RadialBehavior threshold_radial(Rat s_tilde, Rat m, Rat r, Rat beta_hat_inf,
                                Rat beta_hat_sup, Rat beta_tilde) {
  const Rat base = s_tilde + (m - Rat(1)) / Rat(2);
  if (base - Rat(1) + beta_hat_inf - r * beta_tilde > Rat(0))
    return RadialBehavior::IntoBoundary;
  if (base + beta_hat_sup - r * beta_tilde < Rat(0))
    return RadialBehavior::FromBoundary;
  return RadialBehavior::Neither;
}

Rat weight_shift_subprincipal(Rat m, Rat m0, Rat r, Rat beta0, Rat beta_tilde,
                              Rat beta_hat) {
  (void)beta0;  // scales the subprincipal symbol; cancels from the threshold
  return beta_hat + (m - m0) / Rat(2) - r * beta_tilde;
}

}  // namespace dsw
