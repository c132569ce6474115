#pragma once

// Numeric evaluation of expression trees.
//
// An Evaluator flattens one or more trees into a shared instruction tape
// (identical subtrees are evaluated once) and evaluates it at points given
// as spans over an ordered list of input names. Besides values it can
// propagate a cancellation scale, the largest magnitude among the summed
// terms feeding each node, and second-order jets (value, gradient, Hessian
// with respect to the inputs).

#include "morphlab/expr.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphlab {

/// Values for the free variables and parameters of an expression.
struct Binding {
  std::map<std::string, double> values;

  Binding() = default;
  Binding(std::initializer_list<std::pair<const std::string, double>> init) : values(init) {}
  Binding& set(const std::string& name, double v) {
    values[name] = v;
    return *this;
  }
};

/// Evaluation left the real domain of an operation.
class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& what, std::string subtree)
      : std::runtime_error(what + " in " + subtree), subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

/// Second-order jet: value, gradient and (row-major, symmetric) Hessian.
struct Jet2 {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> hess;
};

class Evaluator {
 public:
  Evaluator() = default;

  Evaluator(std::vector<Expr> roots, std::vector<std::string> inputs,
            const std::map<std::string, double>& fixed = {})
      : inputs_(std::move(inputs)) {
    for (std::size_t i = 0; i < inputs_.size(); ++i) input_index_[inputs_[i]] = static_cast<std::uint32_t>(i);
    std::unordered_map<const Node*, std::uint32_t> memo;
    std::unordered_map<Key, std::uint32_t, KeyHash> cse;
    for (const auto& r : roots) roots_.push_back(compile(r, fixed, memo, cse));
  }

  std::size_t tape_size() const { return tape_.size(); }
  std::size_t root_count() const { return roots_.size(); }
  const std::vector<std::string>& inputs() const { return inputs_; }

  /// Values of every root at `point`.
  std::vector<double> operator()(std::span<const double> point) const {
    std::vector<double> out(roots_.size());
    evaluate(point, out);
    return out;
  }

  void evaluate(std::span<const double> point, std::span<double> out, std::span<double> scale = {}) const {
    check_point(point);
    std::vector<double> v(tape_.size());
    std::vector<double> mag;
    const bool want_scale = !scale.empty();
    if (want_scale) mag.resize(tape_.size());
    for (std::size_t i = 0; i < tape_.size(); ++i) {
      const Instr& in = tape_[i];
      const std::uint32_t* a = args_.data() + in.first;
      double r = 0.0;
      switch (in.op) {
        case Op::Const: r = in.c; break;
        case Op::Var: r = point[in.first]; break;
        case Op::Add:
          for (std::uint32_t k = 0; k < in.count; ++k) r += v[a[k]];
          break;
        case Op::Mul:
          r = 1.0;
          for (std::uint32_t k = 0; k < in.count; ++k) r *= v[a[k]];
          break;
        case Op::Div:
          if (v[a[1]] == 0.0) fail("division by zero", i);
          r = v[a[0]] / v[a[1]];
          break;
        case Op::Pow: r = power(v[a[0]], in, i); break;
        case Op::Neg: r = -v[a[0]]; break;
        case Op::Sqrt:
          if (v[a[0]] < 0.0) fail("sqrt of negative value", i);
          r = std::sqrt(v[a[0]]);
          break;
        case Op::Exp: r = std::exp(v[a[0]]); break;
        case Op::Ln:
          if (v[a[0]] <= 0.0) fail("ln of nonpositive value", i);
          r = std::log(v[a[0]]);
          break;
        case Op::Sin: r = std::sin(v[a[0]]); break;
        case Op::Cos: r = std::cos(v[a[0]]); break;
        case Op::Param: break;
      }
      v[i] = r;
      if (want_scale) {
        double m = std::abs(r);
        switch (in.op) {
          case Op::Add:
            m = 0.0;
            for (std::uint32_t k = 0; k < in.count; ++k) m = std::max(m, mag[a[k]]);
            break;
          case Op::Mul:
            m = 1.0;
            for (std::uint32_t k = 0; k < in.count; ++k) m *= mag[a[k]];
            break;
          case Op::Div: m = mag[a[0]] / std::abs(v[a[1]]); break;
          case Op::Neg: m = mag[a[0]]; break;
          case Op::Pow:
            if (in.int_exp > 0) m = std::pow(mag[a[0]], static_cast<double>(in.int_exp));
            break;
          default: break;
        }
        mag[i] = m;
      }
    }
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      out[k] = v[roots_[k]];
      if (want_scale) scale[k] = mag[roots_[k]];
    }
  }

  double evaluate_one(std::span<const double> point, std::size_t root = 0) const {
    std::vector<double> out(roots_.size());
    evaluate(point, out);
    return out.at(root);
  }

  /// Value, gradient and Hessian of every root with respect to all inputs.
  std::vector<Jet2> jets(std::span<const double> point) const {
    check_point(point);
    const std::size_t m = inputs_.size();
    const std::size_t stride = 1 + m + m * m;
    std::vector<double> buf(tape_.size() * stride, 0.0);
    auto val = [&](std::size_t i) -> double& { return buf[i * stride]; };
    auto grd = [&](std::size_t i) { return buf.data() + i * stride + 1; };
    auto hes = [&](std::size_t i) { return buf.data() + i * stride + 1 + m; };
    std::vector<double> tmp(stride);

    // out = f(u) with f0, f1, f2 the value and first two derivatives of f.
    auto unary = [&](std::size_t out, std::size_t u, double f0, double f1, double f2) {
      val(out) = f0;
      const double* gu = grd(u);
      const double* hu = hes(u);
      double* go = grd(out);
      double* ho = hes(out);
      for (std::size_t p = 0; p < m; ++p) go[p] = f1 * gu[p];
      for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q) ho[p * m + q] = f1 * hu[p * m + q] + f2 * gu[p] * gu[q];
    };

    for (std::size_t i = 0; i < tape_.size(); ++i) {
      const Instr& in = tape_[i];
      const std::uint32_t* a = args_.data() + in.first;
      switch (in.op) {
        case Op::Const: val(i) = in.c; break;
        case Op::Var:
          val(i) = point[in.first];
          grd(i)[in.first] = 1.0;
          break;
        case Op::Add:
          for (std::uint32_t k = 0; k < in.count; ++k) {
            const double* src = buf.data() + a[k] * stride;
            double* dst = buf.data() + i * stride;
            for (std::size_t s = 0; s < stride; ++s) dst[s] += src[s];
          }
          break;
        case Op::Mul: {
          double* dst = buf.data() + i * stride;
          std::memcpy(dst, buf.data() + a[0] * stride, stride * sizeof(double));
          for (std::uint32_t k = 1; k < in.count; ++k) {
            const double* y = buf.data() + a[k] * stride;
            std::memcpy(tmp.data(), dst, stride * sizeof(double));
            const double* x = tmp.data();
            dst[0] = x[0] * y[0];
            for (std::size_t p = 0; p < m; ++p) dst[1 + p] = x[0] * y[1 + p] + y[0] * x[1 + p];
            for (std::size_t p = 0; p < m; ++p)
              for (std::size_t q = 0; q < m; ++q)
                dst[1 + m + p * m + q] = x[0] * y[1 + m + p * m + q] + y[0] * x[1 + m + p * m + q] +
                                         x[1 + p] * y[1 + q] + y[1 + p] * x[1 + q];
          }
          break;
        }
        case Op::Div: {
          const double b = val(a[1]);
          if (b == 0.0) fail("division by zero", i);
          // Reuse slot i for 1/b, then multiply by the numerator.
          unary(i, a[1], 1.0 / b, -1.0 / (b * b), 2.0 / (b * b * b));
          std::memcpy(tmp.data(), buf.data() + i * stride, stride * sizeof(double));
          const double* x = buf.data() + a[0] * stride;
          const double* y = tmp.data();
          double* dst = buf.data() + i * stride;
          dst[0] = x[0] * y[0];
          for (std::size_t p = 0; p < m; ++p) dst[1 + p] = x[0] * y[1 + p] + y[0] * x[1 + p];
          for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = 0; q < m; ++q)
              dst[1 + m + p * m + q] = x[0] * y[1 + m + p * m + q] + y[0] * x[1 + m + p * m + q] +
                                       x[1 + p] * y[1 + q] + y[1 + p] * x[1 + q];
          break;
        }
        case Op::Pow: {
          const double b = val(a[0]);
          const double q = in.c;
          const double f0 = power(b, in, i);
          double f1 = 0.0, f2 = 0.0;
          if (in.int_exp != 0) {
            const long k = in.int_exp;
            f1 = q * ipow(b, k - 1);
            f2 = q * (q - 1.0) * ipow(b, k - 2);
          } else {
            if (b <= 0.0) fail("fractional power of nonpositive value", i);
            f1 = q * std::pow(b, q - 1.0);
            f2 = q * (q - 1.0) * std::pow(b, q - 2.0);
          }
          unary(i, a[0], f0, f1, f2);
          break;
        }
        case Op::Neg: {
          const double* src = buf.data() + a[0] * stride;
          double* dst = buf.data() + i * stride;
          for (std::size_t s = 0; s < stride; ++s) dst[s] = -src[s];
          break;
        }
        case Op::Sqrt: {
          const double u = val(a[0]);
          if (u <= 0.0) fail("sqrt derivative at nonpositive value", i);
          const double s = std::sqrt(u);
          unary(i, a[0], s, 0.5 / s, -0.25 / (s * u));
          break;
        }
        case Op::Exp: {
          const double e = std::exp(val(a[0]));
          unary(i, a[0], e, e, e);
          break;
        }
        case Op::Ln: {
          const double u = val(a[0]);
          if (u <= 0.0) fail("ln of nonpositive value", i);
          unary(i, a[0], std::log(u), 1.0 / u, -1.0 / (u * u));
          break;
        }
        case Op::Sin: {
          const double u = val(a[0]);
          unary(i, a[0], std::sin(u), std::cos(u), -std::sin(u));
          break;
        }
        case Op::Cos: {
          const double u = val(a[0]);
          unary(i, a[0], std::cos(u), -std::sin(u), -std::cos(u));
          break;
        }
        case Op::Param: break;
      }
    }
    std::vector<Jet2> out;
    out.reserve(roots_.size());
    for (auto r : roots_) {
      Jet2 j;
      j.value = val(r);
      j.grad.assign(grd(r), grd(r) + m);
      j.hess.assign(hes(r), hes(r) + m * m);
      out.push_back(std::move(j));
    }
    return out;
  }

 private:
  struct Instr {
    Op op;
    std::uint32_t first = 0;  // offset into args_, or input index for Var
    std::uint32_t count = 0;
    double c = 0.0;           // constant value or exponent
    long int_exp = 0;         // exponent when integral and nonzero
  };

  struct Key {
    Op op;
    double c;
    std::uint32_t first;
    std::vector<std::uint32_t> args;
    bool operator==(const Key& o) const {
      return op == o.op && std::memcmp(&c, &o.c, sizeof c) == 0 && first == o.first && args == o.args;
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t bits;
      std::memcpy(&bits, &k.c, sizeof bits);
      std::size_t h = detail::hash_mix(static_cast<std::size_t>(k.op), std::hash<std::uint64_t>{}(bits));
      h = detail::hash_mix(h, k.first);
      for (auto a : k.args) h = detail::hash_mix(h, a);
      return h;
    }
  };

  static double ipow(double b, long k) {
    if (k == 0) return 1.0;
    if (k < 0) return 1.0 / ipow(b, -k);
    double r = 1.0;
    while (k > 0) {
      if (k & 1) r *= b;
      b *= b;
      k >>= 1;
    }
    return r;
  }

  double power(double b, const Instr& in, std::size_t at) const {
    if (in.int_exp != 0) {
      if (in.int_exp < 0 && b == 0.0) fail("division by zero", at);
      return ipow(b, in.int_exp);
    }
    if (b < 0.0) fail("fractional power of negative value", at);
    if (b == 0.0 && in.c < 0.0) fail("division by zero", at);
    return std::pow(b, in.c);
  }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw DomainError(what, abbreviate(origin_[at]));
  }

  void check_point(std::span<const double> point) const {
    if (point.size() != inputs_.size())
      throw std::invalid_argument("point has " + std::to_string(point.size()) + " coordinates, expected " +
                                  std::to_string(inputs_.size()));
  }

  std::uint32_t emit(Key key, const Expr& origin, std::unordered_map<Key, std::uint32_t, KeyHash>& cse) {
    if (auto it = cse.find(key); it != cse.end()) return it->second;
    Instr in;
    in.op = key.op;
    in.c = key.c;
    if (key.op == Op::Var) {
      in.first = key.first;
    } else {
      in.first = static_cast<std::uint32_t>(args_.size());
      in.count = static_cast<std::uint32_t>(key.args.size());
      args_.insert(args_.end(), key.args.begin(), key.args.end());
    }
    if (key.op == Op::Pow) {
      const Rational& q = origin.exponent();
      if (is_integer(q)) in.int_exp = static_cast<long>(numerator(q));
    }
    const auto slot = static_cast<std::uint32_t>(tape_.size());
    tape_.push_back(in);
    origin_.push_back(origin);
    cse.emplace(std::move(key), slot);
    return slot;
  }

  std::uint32_t compile(const Expr& e, const std::map<std::string, double>& fixed,
                        std::unordered_map<const Node*, std::uint32_t>& memo,
                        std::unordered_map<Key, std::uint32_t, KeyHash>& cse) {
    if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
    Key key{e.op(), 0.0, 0, {}};
    switch (e.op()) {
      case Op::Const:
        key.c = e.node().approx;
        break;
      case Op::Var:
      case Op::Param: {
        if (auto it = input_index_.find(e.name()); it != input_index_.end()) {
          key.op = Op::Var;
          key.first = it->second;
        } else if (auto f = fixed.find(e.name()); f != fixed.end()) {
          key.op = Op::Const;
          key.c = f->second;
        } else {
          throw std::invalid_argument("no value bound for '" + e.name() + "'");
        }
        break;
      }
      default:
        if (e.op() == Op::Pow) key.c = e.node().approx;
        for (const auto& a : e.args()) key.args.push_back(compile(a, fixed, memo, cse));
    }
    const std::uint32_t slot = emit(std::move(key), e, cse);
    memo.emplace(e.get(), slot);
    return slot;
  }

  std::vector<std::string> inputs_;
  std::unordered_map<std::string, std::uint32_t> input_index_;
  std::vector<Instr> tape_;
  std::vector<std::uint32_t> args_;
  std::vector<std::uint32_t> roots_;
  std::vector<Expr> origin_;
};

/// One-off evaluation; every free name of e must be bound.
inline double eval(const Expr& e, const Binding& b) {
  Evaluator ev({e}, {}, b.values);
  return ev.evaluate_one({});
}

}  // namespace morphlab
