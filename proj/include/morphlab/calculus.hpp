#pragma once

// Symbolic partial derivatives and best-effort simplification.
//
// Both operations record the domain assumptions they introduce (the argument
// of sqrt/ln must be positive where a derivative is taken, a cancelled
// factor must be nonzero) in a CaveatLog instead of dropping them.

#include "morphlab/expr.hpp"

#include <string>
#include <algorithm>
#include <unordered_map>
#include <vector>

namespace morphlab {

struct DomainCaveat {
  enum class Kind { Positive, Nonzero };
  Kind kind;
  Expr subject;

  std::string text() const { return to_string(subject) + (kind == Kind::Positive ? " > 0" : " != 0"); }
};

class CaveatLog {
 public:
  void add(DomainCaveat::Kind kind, const Expr& subject) {
    for (const auto& c : items_)
      if (c.kind == kind && structurally_equal(c.subject, subject)) return;
    items_.push_back({kind, subject});
  }
  void merge(const CaveatLog& other) {
    for (const auto& c : other.items_) add(c.kind, c.subject);
  }
  const std::vector<DomainCaveat>& items() const { return items_; }
  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(items_.size());
    for (const auto& c : items_) out.push_back(c.text());
    return out;
  }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<DomainCaveat> items_;
};

/// Exact partial derivative of e with respect to the variable `var`.
inline Expr diff(const Expr& e, const std::string& var, CaveatLog* caveats = nullptr) {
  std::unordered_map<const Node*, Expr> memo;
  auto go = [&](const Expr& x, auto& self) -> Expr {
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    Expr d;
    switch (x.op()) {
      case Op::Const:
      case Op::Param:
        d = constant(0);
        break;
      case Op::Var:
        d = constant(x.name() == var ? 1 : 0);
        break;
      case Op::Add: {
        std::vector<Expr> terms;
        terms.reserve(x.args().size());
        for (const auto& a : x.args()) terms.push_back(self(a, self));
        d = add(std::move(terms));
        break;
      }
      case Op::Mul: {
        const auto& f = x.args();
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < f.size(); ++i) {
          Expr di = self(f[i], self);
          if (di.is_zero()) continue;
          std::vector<Expr> factors;
          factors.reserve(f.size());
          for (std::size_t j = 0; j < f.size(); ++j) factors.push_back(j == i ? di : f[j]);
          terms.push_back(mul(std::move(factors)));
        }
        d = add(std::move(terms));
        break;
      }
      case Op::Div: {
        const Expr& a = x.arg(0);
        const Expr& b = x.arg(1);
        Expr da = self(a, self);
        Expr db = self(b, self);
        Expr left = da.is_zero() ? constant(0) : div(da, b);
        Expr right = db.is_zero() ? constant(0) : div(mul({a, db}), pow(b, 2));
        d = left - right;
        break;
      }
      case Op::Pow: {
        Expr du = self(x.arg(), self);
        if (du.is_zero()) {
          d = constant(0);
          break;
        }
        const Rational& q = x.exponent();
        if (!is_integer(q) && caveats) caveats->add(DomainCaveat::Kind::Positive, x.arg());
        d = mul({constant(q), pow(x.arg(), q - 1), du});
        break;
      }
      case Op::Neg:
        d = neg(self(x.arg(), self));
        break;
      case Op::Sqrt: {
        Expr du = self(x.arg(), self);
        if (du.is_zero()) {
          d = constant(0);
          break;
        }
        if (caveats) caveats->add(DomainCaveat::Kind::Positive, x.arg());
        d = div(du, mul({constant(2), x}));
        break;
      }
      case Op::Exp: {
        Expr du = self(x.arg(), self);
        d = du.is_zero() ? constant(0) : mul({x, du});
        break;
      }
      case Op::Ln: {
        Expr du = self(x.arg(), self);
        if (du.is_zero()) {
          d = constant(0);
          break;
        }
        if (caveats) caveats->add(DomainCaveat::Kind::Positive, x.arg());
        d = div(du, x.arg());
        break;
      }
      case Op::Sin: {
        Expr du = self(x.arg(), self);
        d = du.is_zero() ? constant(0) : mul({cos(x.arg()), du});
        break;
      }
      case Op::Cos: {
        Expr du = self(x.arg(), self);
        d = du.is_zero() ? constant(0) : neg(mul({sin(x.arg()), du}));
        break;
      }
    }
    memo.emplace(x.get(), d);
    return d;
  };
  return go(e, go);
}

/// Repeated differentiation along the listed variables, left to right.
inline Expr diff(const Expr& e, const std::vector<std::string>& vars, CaveatLog* caveats = nullptr) {
  Expr out = e;
  for (const auto& v : vars) out = diff(out, v, caveats);
  return out;
}

struct SimplifyResult {
  Expr expr;
  CaveatLog caveats;
};

namespace detail {

class Simplifier {
 public:
  Expr run(const Expr& e) { return simp(e); }
  CaveatLog caveats;

 private:
  struct Term {
    Expr core;
    Rational coeff;
  };
  struct Factor {
    Expr base;
    Rational exponent;
    bool had_negative = false;
  };

  std::unordered_map<const Node*, Expr> memo_;

  Expr simp(const Expr& x) {
    if (auto it = memo_.find(x.get()); it != memo_.end()) return it->second;
    Expr out;
    switch (x.op()) {
      case Op::Const:
      case Op::Var:
      case Op::Param:
        out = x;
        break;
      case Op::Add: {
        std::vector<Expr> kids;
        for (const auto& a : x.args()) kids.push_back(simp(a));
        out = collect_sum(add(std::move(kids)));
        break;
      }
      case Op::Mul: {
        std::vector<Expr> kids;
        for (const auto& a : x.args()) kids.push_back(simp(a));
        out = collect_product(kids);
        break;
      }
      case Op::Div: {
        std::vector<Expr> kids{simp(x.arg(0)), pow(simp(x.arg(1)), -1)};
        out = collect_product(kids);
        break;
      }
      case Op::Pow: {
        Expr b = simp(x.arg());
        const Rational& q = x.exponent();
        if (b.op() == Op::Sqrt || (is_integer(q) && (b.op() == Op::Mul || b.op() == Op::Div))) {
          out = collect_product({pow_raw(b, q)});
        } else {
          out = pow(b, q);
        }
        break;
      }
      case Op::Neg:
        out = neg(simp(x.arg()));
        break;
      case Op::Sqrt:
        out = sqrt(simp(x.arg()));
        break;
      case Op::Exp:
        out = exp(simp(x.arg()));
        break;
      case Op::Ln:
        out = ln(simp(x.arg()));
        break;
      case Op::Sin:
        out = sin(simp(x.arg()));
        break;
      case Op::Cos:
        out = cos(simp(x.arg()));
        break;
    }
    memo_.emplace(x.get(), out);
    return out;
  }

  // Keeps a Pow node even where pow() would fold, so collect_product can
  // take it apart.
  static Expr pow_raw(const Expr& b, const Rational& q) { return detail::make_node(Op::Pow, {b}, q); }

  static void split_term(const Expr& t, Rational sign, std::vector<Term>& out, Rational& constant_part) {
    if (t.is_const()) {
      constant_part += sign * t.value();
    } else if (t.op() == Op::Neg) {
      split_term(t.arg(), -sign, out, constant_part);
    } else if (t.op() == Op::Add) {
      for (const auto& a : t.args()) split_term(a, sign, out, constant_part);
    } else if (t.op() == Op::Mul && t.arg(0).is_const()) {
      std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
      out.push_back({rest.size() == 1 ? rest.front() : detail::make_node(Op::Mul, std::move(rest)),
                     sign * t.arg(0).value()});
    } else {
      out.push_back({t, sign});
    }
  }

  static Expr collect_sum(const Expr& s) {
    if (s.op() != Op::Add) return s;
    std::vector<Term> raw;
    Rational c = 0;
    for (const auto& t : s.args()) split_term(t, 1, raw, c);
    std::vector<Term> groups;
    std::unordered_multimap<std::size_t, std::size_t> index;
    for (auto& t : raw) {
      bool merged = false;
      auto range = index.equal_range(t.core.hash());
      for (auto it = range.first; it != range.second; ++it) {
        if (structurally_equal(groups[it->second].core, t.core)) {
          groups[it->second].coeff += t.coeff;
          merged = true;
          break;
        }
      }
      if (!merged) {
        index.emplace(t.core.hash(), groups.size());
        groups.push_back(std::move(t));
      }
    }
    std::vector<Expr> terms;
    for (const auto& g : groups) {
      if (g.coeff == 0) continue;
      terms.push_back(mul({constant(g.coeff), g.core}));
    }
    if (c != 0) terms.push_back(constant(c));
    return add(std::move(terms));
  }

  static void split_factor(const Expr& f, const Rational& power, Rational& coeff, std::vector<Factor>& out) {
    switch (f.op()) {
      case Op::Const:
        if (is_integer(power)) {
          coeff *= rational_pow(f.value(), static_cast<long long>(numerator(power)));
          return;
        }
        break;
      case Op::Neg:
        if (is_integer(power)) {
          if (numerator(power) % 2 != 0) coeff = -coeff;
          split_factor(f.arg(), power, coeff, out);
          return;
        }
        break;
      case Op::Mul:
        if (is_integer(power)) {
          for (const auto& a : f.args()) split_factor(a, power, coeff, out);
          return;
        }
        break;
      case Op::Div:
        if (is_integer(power)) {
          split_factor(f.arg(0), power, coeff, out);
          split_factor(f.arg(1), -power, coeff, out);
          return;
        }
        break;
      case Op::Pow:
        // (u^p)^q = u^(pq) needs q integral, or p fractional (then u >= 0).
        // sqrt(u^2) must stay |u|, so an integral p under a fractional q is kept whole.
        if (is_integer(power) || !is_integer(f.exponent())) {
          split_factor(f.arg(), power * f.exponent(), coeff, out);
          return;
        }
        break;
      case Op::Sqrt:
        out.push_back({f.arg(), power / 2, power < 0});
        return;
      default:
        break;
    }
    out.push_back({f, power, power < 0});
  }

  Expr collect_product(const std::vector<Expr>& factors) {
    Rational coeff = 1;
    std::vector<Factor> raw;
    for (const auto& f : factors) split_factor(f, 1, coeff, raw);
    if (coeff == 0) return constant(0);
    std::vector<Factor> groups;
    std::unordered_multimap<std::size_t, std::size_t> index;
    for (auto& f : raw) {
      bool merged = false;
      auto range = index.equal_range(f.base.hash());
      for (auto it = range.first; it != range.second; ++it) {
        Factor& g = groups[it->second];
        if (structurally_equal(g.base, f.base)) {
          g.exponent += f.exponent;
          g.had_negative = g.had_negative || f.had_negative;
          merged = true;
          break;
        }
      }
      if (!merged) {
        index.emplace(f.base.hash(), groups.size());
        groups.push_back(std::move(f));
      }
    }
    std::stable_sort(groups.begin(), groups.end(),
                     [](const Factor& a, const Factor& b) { return a.base.hash() < b.base.hash(); });
    std::vector<Expr> num, den;
    for (const auto& g : groups) {
      if (g.exponent == 0) {
        if (g.had_negative) caveats.add(DomainCaveat::Kind::Nonzero, g.base);
        continue;
      }
      const Rational a = g.exponent > 0 ? g.exponent : Rational(-g.exponent);
      Expr p = a == Rational(1, 2) ? sqrt(g.base) : pow(g.base, a);
      (g.exponent > 0 ? num : den).push_back(p);
    }
    Expr top = mul({constant(numerator(coeff)), mul(std::move(num))});
    if (den.empty() && denominator(coeff) == 1) return top;
    den.push_back(constant(denominator(coeff)));
    return div(top, mul(std::move(den)));
  }
};

}  // namespace detail

/// Best-effort simplification: folds rational constants, cancels identities,
/// collects like terms and like factors. The result is pointwise equal to the
/// input wherever the recorded caveats hold; it is not a canonical form.
inline SimplifyResult simplify(const Expr& e) {
  detail::Simplifier s;
  Expr out = s.run(e);
  return {out, std::move(s.caveats)};
}

}  // namespace morphlab
