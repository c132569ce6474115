#pragma once

// Pratt parser for the expression grammar:
//
//   identifier  [a-zA-Z][a-zA-Z0-9_]*
//   literal     digits | digits '.' digits      (decimals are read exactly)
//   operators   + - * / ^   with  ^ > unary - > * / > + -
//               left-associative except ^, which is right-associative
//   functions   sqrt exp ln sin cos
//
// Exponents must fold to a rational constant. Whitespace is insignificant.

#include "morphlab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace morphlab {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UnknownIdentifierError : public ParseError {
 public:
  UnknownIdentifierError(const std::string& name, std::size_t position)
      : ParseError("unknown identifier '" + name + "'", position), name_(name) {}
  const std::string& identifier() const { return name_; }

 private:
  std::string name_;
};

/// Names an expression may reference.
struct Scope {
  std::set<std::string> variables;
  std::set<std::string> parameters;
};

namespace detail {

class PrattParser {
 public:
  PrattParser(std::string_view text, const Scope& scope) : text_(text), scope_(scope) { advance(); }

  Expr parse_all() {
    Expr e = expression(0);
    if (tok_.kind != Tok::End) fail("unexpected '" + std::string(tok_.text) + "'");
    return e;
  }

 private:
  enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };
  struct Token {
    Tok kind = Tok::End;
    std::string_view text;
    std::size_t pos = 0;
  };

  static constexpr int kSum = 10;
  static constexpr int kProduct = 20;
  static constexpr int kUnary = 30;
  static constexpr int kPower = 40;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, tok_.pos); }

  void advance() {
    std::size_t i = pos_;
    while (i < text_.size() && std::isspace(static_cast<unsigned char>(text_[i]))) ++i;
    tok_.pos = i;
    if (i >= text_.size()) {
      tok_.kind = Tok::End;
      tok_.text = {};
      pos_ = i;
      return;
    }
    const char c = text_[i];
    std::size_t j = i + 1;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
      if (j < text_.size() && text_[j] == '.') {
        ++j;
        std::size_t frac = j;
        while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
        if (j == frac) throw ParseError("malformed number", i);
      }
      tok_.kind = Tok::Number;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      while (j < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_'))
        ++j;
      tok_.kind = Tok::Ident;
    } else {
      switch (c) {
        case '+': tok_.kind = Tok::Plus; break;
        case '-': tok_.kind = Tok::Minus; break;
        case '*': tok_.kind = Tok::Star; break;
        case '/': tok_.kind = Tok::Slash; break;
        case '^': tok_.kind = Tok::Caret; break;
        case '(': tok_.kind = Tok::LParen; break;
        case ')': tok_.kind = Tok::RParen; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", i);
      }
    }
    tok_.text = text_.substr(i, j - i);
    pos_ = j;
  }

  static int infix_power(Tok t) {
    switch (t) {
      case Tok::Plus:
      case Tok::Minus: return kSum;
      case Tok::Star:
      case Tok::Slash: return kProduct;
      case Tok::Caret: return kPower;
      default: return -1;
    }
  }

  static Rational number_value(std::string_view s) {
    // cpp_int reads a leading 0 as octal
    auto decimal = [](std::string d) {
      d.erase(0, std::min(d.find_first_not_of('0'), d.size() - 1));
      return BigInt(d);
    };
    auto dot = s.find('.');
    if (dot == std::string_view::npos) return Rational(decimal(std::string(s)));
    std::string digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
    BigInt scale = 1;
    for (std::size_t k = dot + 1; k < s.size(); ++k) scale *= 10;
    return Rational(decimal(digits), scale);
  }

  Expr expression(int min_power) {
    Expr lhs = prefix();
    for (;;) {
      const int power = infix_power(tok_.kind);
      if (power < 0 || power <= min_power) break;
      const Token op = tok_;
      advance();
      if (op.kind == Tok::Caret) {
        const std::size_t at = tok_.pos;
        // Binding the right operand just below ^ makes it right-associative;
        // prefix() still admits a leading minus, so x^-2 is accepted.
        Expr rhs = expression(kPower - 1);
        if (!rhs.is_const()) throw ParseError("exponent must be a rational constant", at);
        lhs = pow(lhs, rhs.value());
        continue;
      }
      Expr rhs = expression(power);
      switch (op.kind) {
        case Tok::Plus: lhs = lhs + rhs; break;
        case Tok::Minus: lhs = lhs - rhs; break;
        case Tok::Star: lhs = lhs * rhs; break;
        case Tok::Slash: lhs = lhs / rhs; break;
        default: break;
      }
    }
    return lhs;
  }

  Expr prefix() {
    const Token t = tok_;
    switch (t.kind) {
      case Tok::Number:
        advance();
        return constant(number_value(t.text));
      case Tok::Minus: {
        advance();
        return neg(expression(kUnary));
      }
      case Tok::Plus:
        advance();
        return expression(kUnary);
      case Tok::LParen: {
        advance();
        Expr inner = expression(0);
        if (tok_.kind != Tok::RParen) fail("expected ')'");
        advance();
        return inner;
      }
      case Tok::Ident: {
        const std::string name(t.text);
        advance();
        if (is_function(name)) {
          if (tok_.kind != Tok::LParen) throw ParseError("expected '(' after " + name, tok_.pos);
          advance();
          Expr a = expression(0);
          if (tok_.kind != Tok::RParen) fail("expected ')'");
          advance();
          if (name == "sqrt") return sqrt(a);
          if (name == "exp") return exp(a);
          if (name == "ln") return ln(a);
          if (name == "sin") return sin(a);
          return cos(a);
        }
        if (scope_.variables.count(name)) return variable(name);
        if (scope_.parameters.count(name)) return parameter(name);
        throw UnknownIdentifierError(name, t.pos);
      }
      case Tok::End:
        fail("unexpected end of input");
      default:
        fail("unexpected '" + std::string(t.text) + "'");
    }
  }

  static bool is_function(const std::string& s) {
    return s == "sqrt" || s == "exp" || s == "ln" || s == "sin" || s == "cos";
  }

  std::string_view text_;
  const Scope& scope_;
  std::size_t pos_ = 0;
  Token tok_;
};

}  // namespace detail

inline Expr parse(std::string_view text, const Scope& scope) {
  return detail::PrattParser(text, scope).parse_all();
}

/// Parse with every declared name treated as a variable.
inline Expr parse(std::string_view text, const std::set<std::string>& declared_names) {
  Scope scope{declared_names, {}};
  return parse(text, scope);
}

}  // namespace morphlab
