#pragma once

// Map specification files.
//
//   # comment
//   [params]
//   a = 3/2
//   [domain]
//   dim = 4
//   vars = [x1, x2, x3, x4]
//   box = [[0.5, 2], [0.5, 2], [0.5, 2], [-2, 2]]
//   metric = euclidean            # or warped(beta = "(x+y)^-2")
//   diagonal = ["1", "x1^2"]      # alternative to metric
//   matrix = [["1", "0"], ["0", "1"]]
//   avoid = "x1^2 + x2^2"
//   [map]
//   components = ["sqrt(x1^2 + x2^2 + x3^2)", "x4"]
//   expected_verdict = ProperGHM  # also ghm, hm
//   declared_dilation = "1"
//   disputed = false
//   [check]
//   samples = 32
//   seed = 42
//   tol_abs = 1e-9
//   tol_rel = 1e-7
//
// Arrays may span several lines. Parameters are substituted as constants.

#include "morphlab/morphism.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace morphlab {

class SpecError : public std::runtime_error {
 public:
  SpecError(const std::string& source, std::size_t line, const std::string& message)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// An expected verdict. "ghm" accepts either GHM verdict.
struct Expectation {
  std::string text;
  std::optional<Verdict> exact;
  bool any_ghm = false;

  bool matches(Verdict v) const { return any_ghm ? is_ghm(v) : exact && *exact == v; }
};

inline std::optional<Expectation> parse_expectation(const std::string& s) {
  std::string k;
  for (char c : s) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "ghm") return Expectation{s, std::nullopt, true};
  if (k == "hm" || k == "harmonic") return Expectation{s, Verdict::HarmonicMorphism, false};
  if (k == "proper" || k == "proper-ghm") return Expectation{s, Verdict::ProperGHM, false};
  if (auto v = parse_verdict(s)) return Expectation{s, *v, false};
  return std::nullopt;
}

struct MapSpec {
  SmoothMap map;
  std::optional<Expectation> expected;
  CheckOptions options;
};

namespace detail {

struct SpecValue;
using SpecList = std::vector<SpecValue>;

// A parsed right-hand side: bare word, quoted string, number, list, or
// call such as warped(beta = "...").
struct SpecValue {
  enum class Kind { Word, String, List, Call } kind = Kind::Word;
  std::string text;  // word, string body, or call name
  SpecList items;    // list items
  std::map<std::string, SpecValue> args;  // call arguments
};

class ValueReader {
 public:
  ValueReader(std::string_view s, const std::string& source, std::size_t line) : s_(s), source_(source), line_(line) {}

  SpecValue read_all() {
    SpecValue v = value();
    skip();
    if (i_ != s_.size()) fail("trailing text '" + std::string(s_.substr(i_)) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& m) const { throw SpecError(source_, line_, m); }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool eat(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  SpecValue value() {
    skip();
    if (i_ >= s_.size()) fail("missing value");
    SpecValue v;
    const char c = s_[i_];
    if (c == '"') {
      ++i_;
      const std::size_t start = i_;
      while (i_ < s_.size() && s_[i_] != '"') ++i_;
      if (i_ >= s_.size()) fail("unterminated string");
      v.kind = SpecValue::Kind::String;
      v.text = std::string(s_.substr(start, i_ - start));
      ++i_;
      return v;
    }
    if (c == '[') {
      ++i_;
      v.kind = SpecValue::Kind::List;
      if (eat(']')) return v;
      do {
        if (eat(']')) return v;  // trailing comma
        v.items.push_back(value());
      } while (eat(','));
      if (!eat(']')) fail("expected ']' in list");
      return v;
    }
    const std::size_t start = i_;
    while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != ',' && s_[i_] != ']' &&
           s_[i_] != '(' && s_[i_] != ')' && s_[i_] != '=')
      ++i_;
    if (i_ == start) fail("unexpected '" + std::string(1, c) + "'");
    v.text = std::string(s_.substr(start, i_ - start));
    if (eat('(')) {
      v.kind = SpecValue::Kind::Call;
      if (eat(')')) return v;
      do {
        skip();
        const std::size_t k0 = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
        const std::string key(s_.substr(k0, i_ - k0));
        if (key.empty() || !eat('=')) fail("expected name = value inside " + v.text + "(...)");
        v.args[key] = value();
      } while (eat(','));
      if (!eat(')')) fail("expected ')'");
    }
    return v;
  }

  std::string_view s_;
  const std::string& source_;
  std::size_t line_;
  std::size_t i_ = 0;
};

struct SpecEntry {
  std::size_t line;
  SpecValue value;
};

using SpecSection = std::map<std::string, SpecEntry>;

inline int bracket_depth(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '[' || c == '(') ++depth;
    if (c == ']' || c == ')') --depth;
  }
  return depth;
}

inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::map<std::string, SpecSection> read_sections(std::istream& in, const std::string& source) {
  static const std::set<std::string> known{"domain", "map", "check", "params"};
  std::map<std::string, SpecSection> out;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string text = trim(strip_comment(line));
    if (text.empty()) continue;
    if (text.front() == '[' && text.back() == ']' && text.find('=') == std::string::npos) {
      section = trim(text.substr(1, text.size() - 2));
      if (!known.count(section)) throw SpecError(source, lineno, "unknown section [" + section + "]");
      if (out.count(section)) throw SpecError(source, lineno, "duplicate section [" + section + "]");
      out[section];
      continue;
    }
    const std::size_t start_line = lineno;
    while (bracket_depth(text) > 0 && std::getline(in, line)) {
      ++lineno;
      text += " " + trim(strip_comment(line));
    }
    if (bracket_depth(text) != 0) throw SpecError(source, start_line, "unbalanced brackets");
    if (section.empty()) throw SpecError(source, start_line, "key outside of any section");
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw SpecError(source, start_line, "expected key = value");
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw SpecError(source, start_line, "empty key");
    auto& sec = out[section];
    if (sec.count(key)) throw SpecError(source, start_line, "duplicate key '" + key + "'");
    sec[key] = SpecEntry{start_line, ValueReader(text.substr(eq + 1), source, start_line).read_all()};
  }
  return out;
}

class SpecBuilder {
 public:
  SpecBuilder(std::map<std::string, SpecSection> sections, std::string source)
      : sections_(std::move(sections)), source_(std::move(source)) {}

  MapSpec build() {
    read_params();
    Metric g = read_domain();
    return read_map(std::move(g));
  }

 private:
  [[noreturn]] void fail(std::size_t line, const std::string& m) const { throw SpecError(source_, line, m); }

  const SpecSection& section(const std::string& name) {
    static const SpecSection empty;
    auto it = sections_.find(name);
    return it == sections_.end() ? empty : it->second;
  }

  void check_keys(const std::string& name, const std::set<std::string>& allowed) {
    for (const auto& [k, e] : section(name))
      if (!allowed.count(k)) fail(e.line, "unknown key '" + k + "' in [" + name + "]");
  }

  std::string scalar(const SpecEntry& e) const {
    if (e.value.kind == SpecValue::Kind::Word || e.value.kind == SpecValue::Kind::String) return e.value.text;
    fail(e.line, "expected a single value");
  }

  double number(const SpecEntry& e, const std::string& text) const {
    double v = 0;
    const char* b = text.data();
    const char* end = b + text.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) fail(e.line, "expected a number, got '" + text + "'");
    return v;
  }

  long long integer(const SpecEntry& e) const {
    const std::string t = scalar(e);
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail(e.line, "expected an integer, got '" + t + "'");
    return v;
  }

  Expr expression(const SpecEntry& e, const std::string& text, const Scope& scope) const {
    try {
      Expr x = parse(text, scope);
      return params_.empty() ? x : substitute(x, params_);
    } catch (const ParseError& err) {
      fail(e.line, std::string("in expression \"") + text + "\": " + err.what());
    }
  }

  Scope scope_with_params(const std::vector<std::string>& vars) const {
    Scope s{{vars.begin(), vars.end()}, {}};
    for (const auto& [k, v] : params_) s.parameters.insert(k);
    return s;
  }

  void read_params() {
    for (const auto& [k, e] : section("params")) {
      const Expr v = expression(e, scalar(e), scope_with_params({}));
      if (!free_names(v).empty()) fail(e.line, "parameter '" + k + "' must be constant");
      params_[k] = v;
    }
  }

  Metric read_domain() {
    check_keys("domain", {"dim", "vars", "metric", "diagonal", "matrix", "avoid", "box"});
    const auto& d = section("domain");
    std::optional<std::size_t> dim;
    if (auto it = d.find("dim"); it != d.end()) {
      const long long v = integer(it->second);
      if (v < 1 || v > 16) fail(it->second.line, "dim must be in 1..16");
      dim = static_cast<std::size_t>(v);
    }
    std::vector<std::string> vars;
    if (auto it = d.find("vars"); it != d.end()) {
      const auto& e = it->second;
      if (e.value.kind != SpecValue::Kind::List) fail(e.line, "vars must be a list");
      for (const auto& item : e.value.items) {
        const std::string& n = item.text;
        const bool ok = !n.empty() && std::isalpha(static_cast<unsigned char>(n[0])) &&
                        std::all_of(n.begin(), n.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
        if (!ok) fail(e.line, "invalid variable name '" + n + "'");
        if (params_.count(n)) fail(e.line, "variable '" + n + "' shadows a parameter");
        vars.push_back(n);
      }
      if (dim && *dim != vars.size()) fail(e.line, "vars has " + std::to_string(vars.size()) + " names but dim is " + std::to_string(*dim));
    }
    const bool warped = d.count("metric") && d.at("metric").value.kind == SpecValue::Kind::Call;
    if (vars.empty()) {
      if (warped) vars = {"x", "y", "z"};
      else if (dim) vars = Chart::cartesian(*dim).names();
      else fail(0, "[domain] needs dim or vars");
    }
    const std::size_t m = vars.size();

    std::vector<Interval> box(m, Interval{-2.0, 2.0});
    if (warped) box = warped_chart().box();
    if (auto it = d.find("box"); it != d.end()) {
      const auto& e = it->second;
      if (e.value.kind != SpecValue::Kind::List || e.value.items.size() != m)
        fail(e.line, "box must list one [lo, hi] per variable");
      for (std::size_t i = 0; i < m; ++i) {
        const auto& iv = e.value.items[i];
        if (iv.kind != SpecValue::Kind::List || iv.items.size() != 2) fail(e.line, "box entries must be [lo, hi]");
        box[i] = {number(e, iv.items[0].text), number(e, iv.items[1].text)};
        if (!(box[i].lo < box[i].hi)) fail(e.line, "box interval for '" + vars[i] + "' is empty");
      }
    }
    const Scope scope = scope_with_params(vars);
    std::vector<AvoidRegion> avoid;
    if (auto it = d.find("avoid"); it != d.end()) {
      const auto& e = it->second;
      if (e.value.kind == SpecValue::Kind::List)
        for (const auto& item : e.value.items) avoid.push_back({expression(e, item.text, scope)});
      else
        avoid.push_back({expression(e, scalar(e), scope)});
    }
    Chart chart(vars, box, avoid);

    int metric_keys = static_cast<int>(d.count("metric") + d.count("diagonal") + d.count("matrix"));
    if (metric_keys > 1) fail(d.begin()->second.line, "give only one of metric, diagonal, matrix");
    try {
      if (auto it = d.find("diagonal"); it != d.end()) {
        const auto& e = it->second;
        if (e.value.kind != SpecValue::Kind::List || e.value.items.size() != m)
          fail(e.line, "diagonal must list one entry per variable");
        std::vector<Expr> diag;
        for (const auto& item : e.value.items) diag.push_back(expression(e, item.text, scope));
        return metric_diagonal(chart, diag);
      }
      if (auto it = d.find("matrix"); it != d.end()) {
        const auto& e = it->second;
        if (e.value.kind != SpecValue::Kind::List || e.value.items.size() != m) fail(e.line, "matrix must have dim rows");
        std::vector<std::vector<Expr>> rows;
        for (const auto& row : e.value.items) {
          if (row.kind != SpecValue::Kind::List || row.items.size() != m) fail(e.line, "matrix rows must have dim entries");
          rows.emplace_back();
          for (const auto& item : row.items) rows.back().push_back(expression(e, item.text, scope));
        }
        Metric g = Metric::from_matrix(chart, rows);
        g.validate();
        return g;
      }
      if (auto it = d.find("metric"); it != d.end()) {
        const auto& e = it->second;
        if (e.value.kind == SpecValue::Kind::Word && e.value.text == "euclidean") return metric_euclidean(chart);
        if (e.value.kind == SpecValue::Kind::Call && e.value.text == "warped") {
          if (m != 3) fail(e.line, "warped metric needs three variables");
          auto b = e.value.args.find("beta");
          if (b == e.value.args.end() || e.value.args.size() != 1) fail(e.line, "warped(...) takes exactly beta = \"expr\"");
          return metric_warped(expression(e, b->second.text, scope), chart);
        }
        fail(e.line, "metric must be euclidean or warped(beta = \"...\")");
      }
    } catch (const std::domain_error& err) {
      fail(d.begin()->second.line, std::string("invalid metric: ") + err.what());
    } catch (const std::invalid_argument& err) {
      fail(d.begin()->second.line, std::string("invalid metric: ") + err.what());
    }
    return metric_euclidean(chart);
  }

  MapSpec read_map(Metric g) {
    check_keys("map", {"name", "components", "expected_verdict", "declared_dilation", "disputed"});
    check_keys("check", {"samples", "seed", "tol_abs", "tol_rel"});
    const auto& s = section("map");
    auto comps = s.find("components");
    if (comps == s.end()) fail(0, "[map] needs components");
    const auto& ce = comps->second;
    if (ce.value.kind != SpecValue::Kind::List || ce.value.items.empty()) fail(ce.line, "components must be a non-empty list");
    const Scope scope = scope_with_params(g.chart().names());
    std::vector<Expr> components;
    for (const auto& item : ce.value.items) components.push_back(expression(ce, item.text, scope));
    std::string name = source_;
    if (auto it = s.find("name"); it != s.end()) name = scalar(it->second);
    MapSpec out{SmoothMap(name, std::move(g), std::move(components)), std::nullopt, {}};
    if (auto it = s.find("expected_verdict"); it != s.end()) {
      out.expected = parse_expectation(scalar(it->second));
      if (!out.expected) fail(it->second.line, "unknown verdict '" + scalar(it->second) + "'");
    }
    if (auto it = s.find("declared_dilation"); it != s.end())
      out.map.declared_dilation = expression(it->second, scalar(it->second), scope);
    if (auto it = s.find("disputed"); it != s.end()) {
      const std::string v = scalar(it->second);
      if (v != "true" && v != "false") fail(it->second.line, "disputed must be true or false");
      out.map.dilation_disputed = v == "true";
    }
    const auto& c = section("check");
    if (auto it = c.find("samples"); it != c.end()) {
      const long long v = integer(it->second);
      if (v < 1 || v > 100000) fail(it->second.line, "samples must be in 1..100000");
      out.options.samples = static_cast<std::size_t>(v);
    }
    if (auto it = c.find("seed"); it != c.end()) {
      const long long v = integer(it->second);
      if (v < 0) fail(it->second.line, "seed must be non-negative");
      out.options.seed = static_cast<std::uint64_t>(v);
    }
    if (auto it = c.find("tol_abs"); it != c.end()) {
      out.options.tol_abs = number(it->second, scalar(it->second));
      if (!(out.options.tol_abs > 0)) fail(it->second.line, "tol_abs must be positive");
    }
    if (auto it = c.find("tol_rel"); it != c.end()) {
      out.options.tol_rel = number(it->second, scalar(it->second));
      if (!(out.options.tol_rel >= 0)) fail(it->second.line, "tol_rel must be non-negative");
    }
    return out;
  }

  std::map<std::string, SpecSection> sections_;
  std::string source_;
  std::map<std::string, Expr> params_;
};

}  // namespace detail

inline MapSpec parse_spec(const std::string& text, const std::string& source = "<spec>") {
  std::istringstream in(text);
  return detail::SpecBuilder(detail::read_sections(in, source), source).build();
}

inline MapSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.rfind(".morph"); dot != std::string::npos && dot + 6 == name.size()) name = name.substr(0, dot);
  MapSpec spec = parse_spec(ss.str(), path);
  if (spec.map.name == path) spec.map.name = name;
  return spec;
}

}  // namespace morphlab
