#pragma once

// Immutable expression trees over named real variables and parameters.
//
// Constants are exact rationals. Trees are built through the smart
// constructors below, which perform cheap local folding (constant
// arithmetic, additive/multiplicative identities, double negation). Nodes
// are shared between trees; a node is never mutated after construction.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace morphlab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

enum class Op : std::uint8_t {
  Const,
  Var,
  Param,
  Add,
  Mul,
  Div,
  Pow,
  Neg,
  Sqrt,
  Exp,
  Ln,
  Sin,
  Cos,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Var: return "var";
    case Op::Param: return "param";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Pow: return "pow";
    case Op::Neg: return "neg";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
  }
  return "?";
}

struct Node;

class Expr {
 public:
  /// The constant 0.
  Expr();
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  const Node& node() const { return *node_; }
  const Node* get() const { return node_.get(); }
  Op op() const;

  bool is_const() const { return op() == Op::Const; }
  bool is_zero() const;
  bool is_one() const;
  /// Rational value of a constant node. Throws for any other kind.
  const Rational& value() const;
  const std::string& name() const;
  const std::vector<Expr>& args() const;
  const Expr& arg(std::size_t i = 0) const { return args().at(i); }
  /// Exponent of a Pow node.
  const Rational& exponent() const;
  std::size_t hash() const;

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Const;
  std::size_t hash = 0;
  Rational value;  // Const: the value. Pow: the exponent.
  double approx = 0.0;
  std::string name;  // Var, Param
  std::vector<Expr> args;
};

// ---------------------------------------------------------------------------
// Node construction

namespace detail {

inline std::size_t hash_mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline std::size_t hash_rational(const Rational& r) {
  // Equal rationals convert to the same double; distinct ones may collide.
  return std::hash<double>{}(static_cast<double>(r));
}

inline Expr make_node(Op op, std::vector<Expr> args, Rational value = 0,
                      std::string name = {}) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  n->approx = static_cast<double>(n->value);
  n->name = std::move(name);
  n->args = std::move(args);
  std::size_t h = static_cast<std::size_t>(op) * 0x100000001b3ULL;
  if (op == Op::Const || op == Op::Pow) h = hash_mix(h, hash_rational(n->value));
  if (op == Op::Var || op == Op::Param) h = hash_mix(h, std::hash<std::string>{}(n->name));
  for (const auto& a : n->args) h = hash_mix(h, a.hash());
  n->hash = h;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

}  // namespace detail

inline Expr constant(const Rational& r) { return detail::make_node(Op::Const, {}, r); }
inline Expr constant(long long v) { return constant(Rational(v)); }
inline Expr constant(long long num, long long den) { return constant(Rational(num, den)); }

inline Expr::Expr() : Expr(constant(0)) {}
inline Op Expr::op() const { return node_->op; }
inline bool Expr::is_zero() const { return op() == Op::Const && node_->value == 0; }
inline bool Expr::is_one() const { return op() == Op::Const && node_->value == 1; }
inline const Rational& Expr::value() const {
  if (op() != Op::Const) throw std::logic_error("Expr::value on non-constant node");
  return node_->value;
}
inline const std::string& Expr::name() const { return node_->name; }
inline const std::vector<Expr>& Expr::args() const { return node_->args; }
inline const Rational& Expr::exponent() const {
  if (op() != Op::Pow) throw std::logic_error("Expr::exponent on non-power node");
  return node_->value;
}
inline std::size_t Expr::hash() const { return node_->hash; }

inline Expr variable(const std::string& name) { return detail::make_node(Op::Var, {}, 0, name); }
inline Expr parameter(const std::string& name) { return detail::make_node(Op::Param, {}, 0, name); }

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

/// Exact integer power of a rational.
inline Rational rational_pow(const Rational& base, long long e) {
  Rational result = 1;
  Rational b = e < 0 ? Rational(1) / base : base;
  unsigned long long k = e < 0 ? static_cast<unsigned long long>(-e) : static_cast<unsigned long long>(e);
  while (k > 0) {
    if (k & 1ULL) result *= b;
    b *= b;
    k >>= 1;
  }
  return result;
}

/// Exact square root when r is the square of a rational; empty otherwise.
inline bool rational_sqrt(const Rational& r, Rational& out) {
  if (r < 0) return false;
  BigInt num = numerator(r), den = denominator(r);
  BigInt sn = boost::multiprecision::sqrt(num), sd = boost::multiprecision::sqrt(den);
  if (sn * sn != num || sd * sd != den) return false;
  out = Rational(sn, sd);
  return true;
}

// Structural equality (same tree shape, kinds, names and constants).
bool structurally_equal(const Expr& a, const Expr& b);

Expr neg(const Expr& a);
Expr add(std::vector<Expr> terms);
Expr mul(std::vector<Expr> factors);
Expr div(const Expr& a, const Expr& b);
Expr pow(const Expr& base, const Rational& exponent);
Expr sqrt(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.get() == b.get()) return true;
  if (a.hash() != b.hash() || a.op() != b.op()) return false;
  const Node& x = a.node();
  const Node& y = b.node();
  if (x.args.size() != y.args.size()) return false;
  switch (x.op) {
    case Op::Const:
      return x.value == y.value;
    case Op::Var:
    case Op::Param:
      return x.name == y.name;
    case Op::Pow:
      if (x.value != y.value) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!structurally_equal(x.args[i], y.args[i])) return false;
  return true;
}

inline Expr neg(const Expr& a) {
  if (a.is_const()) return constant(-a.value());
  if (a.op() == Op::Neg) return a.arg();
  return detail::make_node(Op::Neg, {a});
}

inline Expr add(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  flat.reserve(terms.size());
  Rational c = 0;
  for (auto& t : terms) {
    if (t.is_const()) {
      c += t.value();
    } else if (t.op() == Op::Add) {
      for (const auto& s : t.args()) {
        if (s.is_const())
          c += s.value();
        else
          flat.push_back(s);
      }
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (c != 0) flat.push_back(constant(c));
  if (flat.empty()) return constant(0);
  if (flat.size() == 1) return flat.front();
  return detail::make_node(Op::Add, std::move(flat));
}

inline Expr mul(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  flat.reserve(factors.size());
  Rational c = 1;
  bool negate = false;
  auto absorb = [&](const Expr& f, auto& self) -> void {
    if (f.is_const()) {
      c *= f.value();
    } else if (f.op() == Op::Neg) {
      negate = !negate;
      self(f.arg(), self);
    } else if (f.op() == Op::Mul) {
      for (const auto& s : f.args()) self(s, self);
    } else {
      flat.push_back(f);
    }
  };
  for (const auto& f : factors) absorb(f, absorb);
  if (negate) c = -c;
  if (c == 0) return constant(0);
  if (flat.empty()) return constant(c);
  Expr body;
  if (flat.size() == 1) {
    body = flat.front();
  } else {
    body = detail::make_node(Op::Mul, std::move(flat));
  }
  if (c == 1) return body;
  if (c == -1) return neg(body);
  if (c < 0) {
    if (body.op() == Op::Mul) {
      std::vector<Expr> with_const{constant(-c)};
      for (const auto& a : body.args()) with_const.push_back(a);
      return neg(detail::make_node(Op::Mul, std::move(with_const)));
    }
    return neg(detail::make_node(Op::Mul, {constant(-c), body}));
  }
  if (body.op() == Op::Mul) {
    std::vector<Expr> with_const{constant(c)};
    for (const auto& a : body.args()) with_const.push_back(a);
    return detail::make_node(Op::Mul, std::move(with_const));
  }
  return detail::make_node(Op::Mul, {constant(c), body});
}

inline Expr div(const Expr& a, const Expr& b) {
  if (b.is_const() && b.value() != 0) return mul({constant(Rational(1) / b.value()), a});
  if (a.is_zero()) return a;
  if (a.op() == Op::Neg) return neg(div(a.arg(), b));
  if (b.op() == Op::Neg) return neg(div(a, b.arg()));
  return detail::make_node(Op::Div, {a, b});
}

inline Expr pow(const Expr& base, const Rational& exponent) {
  if (exponent == 0) return constant(1);
  if (exponent == 1) return base;
  if (base.is_const() && is_integer(exponent)) {
    const Rational& v = base.value();
    if (!(v == 0 && exponent < 0)) {
      return constant(rational_pow(v, static_cast<long long>(numerator(exponent))));
    }
  }
  if (base.op() == Op::Pow && is_integer(base.exponent()) && is_integer(exponent)) {
    return pow(base.arg(), base.exponent() * exponent);
  }
  if (base.op() == Op::Neg && is_integer(exponent)) {
    bool odd = (numerator(exponent) % 2) != 0;
    Expr p = pow(base.arg(), exponent);
    return odd ? neg(p) : p;
  }
  return detail::make_node(Op::Pow, {base}, exponent);
}

inline Expr pow(const Expr& base, long long exponent) { return pow(base, Rational(exponent)); }

inline Expr sqrt(const Expr& a) {
  if (a.is_const()) {
    Rational r;
    if (rational_sqrt(a.value(), r)) return constant(r);
  }
  return detail::make_node(Op::Sqrt, {a});
}

inline Expr exp(const Expr& a) {
  if (a.is_zero()) return constant(1);
  return detail::make_node(Op::Exp, {a});
}

inline Expr ln(const Expr& a) {
  if (a.is_one()) return constant(0);
  return detail::make_node(Op::Ln, {a});
}

inline Expr sin(const Expr& a) {
  if (a.is_zero()) return constant(0);
  if (a.op() == Op::Neg) return neg(sin(a.arg()));
  return detail::make_node(Op::Sin, {a});
}

inline Expr cos(const Expr& a) {
  if (a.is_zero()) return constant(1);
  if (a.op() == Op::Neg) return cos(a.arg());
  return detail::make_node(Op::Cos, {a});
}

inline Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
inline Expr operator-(const Expr& a, const Expr& b) { return add({a, neg(b)}); }
inline Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return div(a, b); }
inline Expr operator-(const Expr& a) { return neg(a); }
inline Expr operator+(const Expr& a, long long b) { return a + constant(b); }
inline Expr operator+(long long a, const Expr& b) { return constant(a) + b; }
inline Expr operator-(const Expr& a, long long b) { return a - constant(b); }
inline Expr operator-(long long a, const Expr& b) { return constant(a) - b; }
inline Expr operator*(long long a, const Expr& b) { return constant(a) * b; }
inline Expr operator*(const Expr& a, long long b) { return a * constant(b); }
inline Expr operator/(const Expr& a, long long b) { return a / constant(b); }
inline Expr operator/(long long a, const Expr& b) { return constant(a) / b; }

/// Sum of squares of the given expressions.
inline Expr sum_of_squares(const std::vector<Expr>& xs) {
  std::vector<Expr> t;
  t.reserve(xs.size());
  for (const auto& x : xs) t.push_back(pow(x, 2));
  return add(std::move(t));
}

// ---------------------------------------------------------------------------
// Traversal helpers

/// Number of distinct nodes reachable from e (shared subtrees counted once).
inline std::size_t dag_size(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const auto& a : n->args) stack.push_back(a.get());
  }
  return seen.size();
}

/// Names of all Var and Param nodes in e.
inline std::set<std::string> free_names(const Expr& e) {
  std::set<std::string> names;
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->op == Op::Var || n->op == Op::Param) names.insert(n->name);
    for (const auto& a : n->args) stack.push_back(a.get());
  }
  return names;
}

inline bool depends_on(const Expr& e, const std::string& name) { return free_names(e).count(name) > 0; }

/// Replace every Var/Param whose name is a key of `with`. Sharing is preserved.
inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& with) {
  std::unordered_map<const Node*, Expr> memo;
  auto go = [&](const Expr& x, auto& self) -> Expr {
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    Expr out;
    switch (x.op()) {
      case Op::Const:
        out = x;
        break;
      case Op::Var:
      case Op::Param: {
        auto it = with.find(x.name());
        out = it == with.end() ? x : it->second;
        break;
      }
      default: {
        std::vector<Expr> args;
        args.reserve(x.args().size());
        bool changed = false;
        for (const auto& a : x.args()) {
          args.push_back(self(a, self));
          changed = changed || args.back().get() != a.get();
        }
        if (!changed) {
          out = x;
          break;
        }
        switch (x.op()) {
          case Op::Add: out = add(std::move(args)); break;
          case Op::Mul: out = mul(std::move(args)); break;
          case Op::Div: out = div(args[0], args[1]); break;
          case Op::Pow: out = pow(args[0], x.exponent()); break;
          case Op::Neg: out = neg(args[0]); break;
          case Op::Sqrt: out = sqrt(args[0]); break;
          case Op::Exp: out = exp(args[0]); break;
          case Op::Ln: out = ln(args[0]); break;
          case Op::Sin: out = sin(args[0]); break;
          case Op::Cos: out = cos(args[0]); break;
          default: throw std::logic_error("substitute: unexpected node");
        }
      }
    }
    memo.emplace(x.get(), out);
    return out;
  };
  return go(e, go);
}

// ---------------------------------------------------------------------------
// Printing in the input grammar

namespace detail {

inline std::string rational_text(const Rational& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << '/' << denominator(r);
  return os.str();
}

// Precedence levels: 1 sum, 2 product/quotient, 3 unary minus, 4 power, 5 atom.
inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return (e.value() < 0 || !is_integer(e.value())) ? 2 : 5;
    default: return 5;
  }
}

inline void print_to(std::string& out, const Expr& e, int min_prec) {
  const int p = precedence(e);
  const bool paren = p < min_prec;
  if (paren) out += '(';
  switch (e.op()) {
    case Op::Const:
      if (e.value() < 0 || !is_integer(e.value())) {
        // Fractions and negatives are always wrapped so they read as one atom.
        if (!paren) out += '(';
        out += rational_text(e.value());
        if (!paren) out += ')';
      } else {
        out += rational_text(e.value());
      }
      break;
    case Op::Var:
    case Op::Param:
      out += e.name();
      break;
    case Op::Add: {
      bool first = true;
      for (const auto& t : e.args()) {
        if (t.op() == Op::Neg) {
          out += first ? "-" : " - ";
          print_to(out, t.arg(), 2);
        } else {
          if (!first) out += " + ";
          print_to(out, t, 2);
        }
        first = false;
      }
      break;
    }
    case Op::Mul: {
      bool first = true;
      for (const auto& f : e.args()) {
        if (!first) out += '*';
        print_to(out, f, 4);
        first = false;
      }
      break;
    }
    case Op::Div:
      print_to(out, e.arg(0), 2);
      out += '/';
      print_to(out, e.arg(1), 4);
      break;
    case Op::Pow:
      print_to(out, e.arg(0), 5);
      out += '^';
      if (is_integer(e.exponent()) && e.exponent() >= 0)
        out += rational_text(e.exponent());
      else
        out += "(" + rational_text(e.exponent()) + ")";
      break;
    case Op::Neg:
      out += '-';
      print_to(out, e.arg(), 4);
      break;
    case Op::Sqrt:
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos:
      out += op_name(e.op());
      out += '(';
      print_to(out, e.arg(), 0);
      out += ')';
      break;
  }
  if (paren) out += ')';
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_to(out, e, 0);
  return out;
}

/// Printed form cut to at most `limit` characters, for diagnostics.
inline std::string abbreviate(const Expr& e, std::size_t limit = 160) {
  if (dag_size(e) > 4 * limit) return "<expression with " + std::to_string(dag_size(e)) + " nodes>";
  std::string s = to_string(e);
  if (s.size() > limit) s = s.substr(0, limit) + "...";
  return s;
}

inline std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << to_string(e); }

}  // namespace morphlab
