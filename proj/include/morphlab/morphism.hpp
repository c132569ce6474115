#pragma once

// Classification of maps phi = (phi^1..phi^n) from a Riemannian chart into
// Euclidean R^n.
//
//   HWC   g(grad phi^a, grad phi^b) = 0 (a != b), |grad phi^a|^2 all equal
//   Bi    lap^2 phi^a = 0
//   Sbi   lap^2(phi^a phi^b) = 0 and lap^2((phi^a)^2) - lap^2((phi^b)^2) = 0
//
// A map is a generalized harmonic morphism exactly when HWC, Bi and Sbi hold;
// it is a harmonic morphism when it is HWC with harmonic components.
//
// Residuals are decided by sampling: a value r with local scale s (largest
// magnitude among the terms summed into r) is zero when
// |r| < tol_abs + tol_rel * s.

#include "morphlab/geometry.hpp"
#include "morphlab/oracle.hpp"
#include "morphlab/parallel.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphlab {

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct SmoothMap {
  std::string name;
  Metric domain;
  std::vector<Expr> components;
  std::optional<Expr> declared_dilation;
  bool dilation_disputed = false;
  /// Conformal factor rho(y) of a codomain metric rho (dy1^2 + dy2^2); only
  /// meaningful for n = 2, where it does not change the verdict.
  std::optional<Expr> codomain_conformal_factor;

  SmoothMap(std::string name_, Metric domain_, std::vector<Expr> components_)
      : name(std::move(name_)), domain(std::move(domain_)), components(std::move(components_)) {
    if (components.empty()) throw std::invalid_argument("map needs at least one component");
    const auto& names = domain.chart().names();
    for (const auto& c : components)
      for (const auto& v : free_names(c))
        if (std::find(names.begin(), names.end(), v) == names.end())
          throw std::invalid_argument("component references '" + v + "', not a domain variable");
  }

  std::size_t codomain_dim() const { return components.size(); }
  const Chart& chart() const { return domain.chart(); }
};

/// Codomain coordinate names y1..yn.
inline std::vector<std::string> codomain_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t a = 1; a <= n; ++a) out.push_back("y" + std::to_string(a));
  return out;
}

/// f(y) with y^a replaced by the components of m.
inline Expr pull_back(const SmoothMap& m, const Expr& f) {
  std::map<std::string, Expr> sub;
  auto ys = codomain_names(m.codomain_dim());
  for (std::size_t a = 0; a < ys.size(); ++a) sub[ys[a]] = m.components[a];
  for (const auto& n : free_names(f))
    if (!sub.count(n)) throw std::invalid_argument("function references '" + n + "', not a codomain variable");
  return substitute(f, sub);
}

enum class Verdict { HarmonicMorphism, ProperGHM, BiharmonicHWC_notGHM, BiharmonicOnly, HWCOnly, None };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::HarmonicMorphism: return "HarmonicMorphism";
    case Verdict::ProperGHM: return "ProperGHM";
    case Verdict::BiharmonicHWC_notGHM: return "BiharmonicHWC_notGHM";
    case Verdict::BiharmonicOnly: return "BiharmonicOnly";
    case Verdict::HWCOnly: return "HWCOnly";
    case Verdict::None: return "None";
  }
  return "None";
}

inline std::optional<Verdict> parse_verdict(const std::string& s) {
  for (Verdict v : {Verdict::HarmonicMorphism, Verdict::ProperGHM, Verdict::BiharmonicHWC_notGHM,
                    Verdict::BiharmonicOnly, Verdict::HWCOnly, Verdict::None}) {
    std::string name = verdict_name(v);
    if (s.size() == name.size() &&
        std::equal(s.begin(), s.end(), name.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
      return v;
  }
  return std::nullopt;
}

inline bool is_ghm(Verdict v) { return v == Verdict::HarmonicMorphism || v == Verdict::ProperGHM; }

inline Verdict verdict_from_flags(bool hwc, bool bi, bool sbi, bool harmonic) {
  if (hwc && harmonic) return Verdict::HarmonicMorphism;
  if (hwc && bi && sbi) return Verdict::ProperGHM;
  if (hwc && bi) return Verdict::BiharmonicHWC_notGHM;
  if (bi) return Verdict::BiharmonicOnly;
  if (hwc) return Verdict::HWCOnly;
  return Verdict::None;
}

struct CheckOptions {
  std::size_t samples = 32;
  std::uint64_t seed = 42;
  double tol_abs = 1e-9;
  double tol_rel = 1e-7;
  std::size_t swell_cap = kDefaultSwellCap;
  std::size_t oracle_points = 3;  // 0 disables the finite-difference crosscheck
  double oracle_tol = 1e-5;
};

struct ResidualSummary {
  std::string label;
  std::string expression;       // abbreviated
  bool symbolic_zero = false;   // simplified to literal 0
  double max_abs = 0.0;
  double max_ratio = 0.0;       // max |r| / threshold
  std::size_t worst_sample = 0;
  bool pass = true;
  std::vector<double> values;   // per sample
};

struct ConditionEntry {
  std::string id;
  std::vector<ResidualSummary> residuals;
  bool pass = true;
  bool vacuous = false;
  bool inconclusive = false;  // some ratio within a decade of the threshold
  std::string note;
};

struct OracleSummary {
  std::string label;
  bool agree = true;
  bool inconclusive = false;  // agreement at some point rested on an error estimate above tol
  double max_deviation = 0.0;
  double symbolic = 0.0;  // at the worst point
  double numeric = 0.0;
  double error = 0.0;
};

struct CheckReport {
  std::string map_name;
  Verdict verdict = Verdict::None;
  std::vector<ConditionEntry> conditions;
  std::vector<double> dilation_squared;  // per sample, from |grad phi^1|^2 when HWC passes
  std::vector<OracleSummary> oracle;
  bool oracle_agree = true;
  bool oracle_inconclusive = false;
  std::uint64_t seed = 0;
  std::vector<Point> points;
  std::vector<std::string> caveats;
  std::vector<std::string> notes;

  const ConditionEntry& condition(const std::string& id) const {
    for (const auto& c : conditions)
      if (c.id == id) return c;
    throw std::out_of_range("no condition '" + id + "' in report");
  }
  bool has(const std::string& id) const {
    return std::any_of(conditions.begin(), conditions.end(), [&](const auto& c) { return c.id == id; });
  }
  bool inconclusive() const {
    return std::any_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.inconclusive; });
  }
};

/// Symbolic data of a map computed once and shared by the checks.
class MapAnalysis {
 public:
  MapAnalysis(const SmoothMap& m, std::size_t swell_cap = kDefaultSwellCap) : m_(m), cap_(swell_cap) {
    if (m.codomain_conformal_factor && m.codomain_dim() != 2)
      throw std::invalid_argument("non-Euclidean codomains are supported only in dimension 2");
    const std::size_t n = m.codomain_dim();
    G_.resize(n * n);
    lap_.resize(n);
    bilap_.resize(n);
  }

  const SmoothMap& map() const { return m_; }
  std::size_t n() const { return m_.codomain_dim(); }
  const Metric& g() const { return m_.domain; }
  std::size_t swell_cap() const { return cap_; }
  CaveatLog& caveats() { return caveats_; }

  const Expr& G(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    auto& slot = G_[a * n() + b];
    if (!slot) slot = grad_inner(g(), m_.components[a], m_.components[b], &caveats_);
    return *slot;
  }
  const Expr& lap(std::size_t a) {
    if (!lap_[a]) lap_[a] = laplace_beltrami(g(), m_.components[a], &caveats_);
    return *lap_[a];
  }
  const Field& bilap(std::size_t a) {
    if (!bilap_[a]) {
      Expr inner = lap(a);
      if (dag_size(inner) * 8 > cap_) {
        bilap_[a] = Field::lazy_laplacian(g(), inner);
      } else {
        Expr outer = laplace_beltrami(g(), inner, &caveats_);
        bilap_[a] = dag_size(outer) > cap_ ? Field::lazy_laplacian(g(), inner) : Field(outer);
      }
    }
    return *bilap_[a];
  }
  Field bilap_of(const Expr& f) { return bilaplacian(g(), f, &caveats_, cap_); }

 private:
  const SmoothMap& m_;
  std::size_t cap_;
  CaveatLog caveats_;
  std::vector<std::optional<Expr>> G_;
  std::vector<std::optional<Expr>> lap_;
  std::vector<std::optional<Field>> bilap_;
};

namespace detail {

inline bool simplifies_to_zero(const Field& f) {
  if (!f.is_symbolic() || f.node_count() > 4000) return false;
  return simplify(f.expr()).expr.is_zero();
}

/// Evaluates every field at every point; result indexed [field][sample].
inline std::vector<std::vector<FieldValue>> sample_fields(const std::vector<Field>& fields, const Metric& g,
                                                          const std::vector<Point>& points) {
  FieldEvaluator ev(fields, g.chart().names());
  std::vector<std::vector<FieldValue>> per_point(points.size());
  parallel_for(points.size(), [&](std::size_t k) { per_point[k] = ev(points[k]); });
  std::vector<std::vector<FieldValue>> out(fields.size(), std::vector<FieldValue>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k)
    for (std::size_t i = 0; i < fields.size(); ++i) out[i][k] = per_point[k][i];
  return out;
}

inline ConditionEntry decide(std::string id, const std::vector<std::string>& labels, const std::vector<Field>& fields,
                             const Metric& g, const std::vector<Point>& points, const CheckOptions& opt) {
  if (points.empty()) throw std::invalid_argument("empty sample set");
  ConditionEntry entry;
  entry.id = std::move(id);
  auto values = sample_fields(fields, g, points);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    ResidualSummary r;
    r.label = labels[i];
    r.expression = fields[i].describe();
    r.symbolic_zero = simplifies_to_zero(fields[i]);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const FieldValue& fv = values[i][k];
      r.values.push_back(fv.value);
      const double threshold = opt.tol_abs + opt.tol_rel * fv.scale;
      const double a = std::abs(fv.value);
      const double ratio = a / threshold;
      if (!(a < threshold)) r.pass = false;
      if (k == 0 || !(ratio <= r.max_ratio)) {
        r.max_ratio = ratio;
        r.worst_sample = k;
      }
      r.max_abs = std::max(r.max_abs, a);
    }
    if (r.symbolic_zero) r.pass = true;
    if (!r.symbolic_zero && r.max_ratio >= 0.1 && r.max_ratio <= 10.0) entry.inconclusive = true;
    entry.pass = entry.pass && r.pass;
    entry.residuals.push_back(std::move(r));
  }
  if (entry.inconclusive) entry.note = "inconclusive at tol";
  return entry;
}

inline std::string idx(std::size_t a) { return std::to_string(a + 1); }

}  // namespace detail

/// HWC residuals; fills `dilation_squared` with |grad phi^1|^2 per sample.
inline ConditionEntry check_hwc(MapAnalysis& an, const std::vector<Point>& points, const CheckOptions& opt,
                                std::vector<double>* dilation_squared = nullptr) {
  const std::size_t n = an.n();
  std::vector<Field> fields;
  std::vector<std::string> labels;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      fields.emplace_back(an.G(a, b));
      labels.push_back("g(grad phi" + detail::idx(a) + ", grad phi" + detail::idx(b) + ")");
      fields.push_back(Field(an.G(a, a)) - Field(an.G(b, b)));
      labels.push_back("|grad phi" + detail::idx(a) + "|^2 - |grad phi" + detail::idx(b) + "|^2");
    }
  ConditionEntry e;
  if (fields.empty()) {
    e.id = "HWC";
    e.vacuous = true;
    e.note = "single component: conformality holds trivially";
  } else {
    e = detail::decide("HWC", labels, fields, an.g(), points, opt);
  }
  if (dilation_squared) {
    auto v = detail::sample_fields({Field(an.G(0, 0))}, an.g(), points);
    dilation_squared->clear();
    for (const auto& fv : v[0]) dilation_squared->push_back(fv.value);
  }
  return e;
}

/// Bi residuals lap^2 phi^a; the harmonicity residuals lap phi^a go to `harmonic`.
inline ConditionEntry check_biharmonic(MapAnalysis& an, const std::vector<Point>& points, const CheckOptions& opt,
                                       ConditionEntry* harmonic = nullptr) {
  std::vector<Field> bi, harm;
  std::vector<std::string> bl, hl;
  for (std::size_t a = 0; a < an.n(); ++a) {
    bi.push_back(an.bilap(a));
    bl.push_back("lap^2 phi" + detail::idx(a));
    harm.emplace_back(an.lap(a));
    hl.push_back("lap phi" + detail::idx(a));
  }
  if (harmonic) *harmonic = detail::decide("Harm", hl, harm, an.g(), points, opt);
  return detail::decide("Bi", bl, bi, an.g(), points, opt);
}

inline ConditionEntry check_square_biharmonic(MapAnalysis& an, const std::vector<Point>& points,
                                              const CheckOptions& opt) {
  const std::size_t n = an.n();
  if (n < 2) {
    ConditionEntry e;
    e.id = "Sbi";
    e.vacuous = true;
    e.note = "single component: vacuously true";
    return e;
  }
  const auto& phi = an.map().components;
  std::vector<Field> squares(n);
  for (std::size_t a = 0; a < n; ++a) squares[a] = an.bilap_of(phi[a] * phi[a]);
  std::vector<Field> fields;
  std::vector<std::string> labels;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      fields.push_back(an.bilap_of(phi[a] * phi[b]));
      labels.push_back("lap^2(phi" + detail::idx(a) + " phi" + detail::idx(b) + ")");
      fields.push_back(squares[a] - squares[b]);
      labels.push_back("lap^2(phi" + detail::idx(a) + "^2) - lap^2(phi" + detail::idx(b) + "^2)");
    }
  return detail::decide("Sbi", labels, fields, an.g(), points, opt);
}

struct HarmonicSuite {
  std::size_t n = 0;
  std::vector<std::string> labels;
  std::vector<Expr> members;  // polynomials in y1..yn
};

/// Harmonic probe polynomials of degree <= max_degree, each verified to have
/// zero Euclidean Laplacian.
inline HarmonicSuite harmonic_suite(std::size_t n, int max_degree = 4) {
  if (n < 1) throw std::invalid_argument("harmonic_suite needs n >= 1");
  HarmonicSuite s;
  s.n = n;
  std::vector<Expr> y;
  for (const auto& name : codomain_names(n)) y.push_back(variable(name));
  auto emit = [&](std::string label, Expr e) {
    s.labels.push_back(std::move(label));
    s.members.push_back(std::move(e));
  };
  auto Y = [](std::size_t a) { return "y" + std::to_string(a + 1); };
  for (std::size_t a = 0; a < n; ++a) emit(Y(a), y[a]);
  if (max_degree >= 2)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        emit(Y(a) + Y(b), y[a] * y[b]);
        emit(Y(a) + "^2-" + Y(b) + "^2", pow(y[a], 2) - pow(y[b], 2));
      }
  if (max_degree >= 3) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        emit(Y(a) + "^3-3" + Y(a) + Y(b) + "^2", pow(y[a], 3) - 3 * (y[a] * pow(y[b], 2)));
      }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) emit(Y(a) + Y(b) + Y(c), mul({y[a], y[b], y[c]}));
  }
  if (max_degree >= 4)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        emit(Y(a) + "^3" + Y(b) + "-" + Y(b) + "^3" + Y(a), pow(y[a], 3) * y[b] - pow(y[b], 3) * y[a]);
        emit(Y(a) + "^4-6" + Y(a) + "^2" + Y(b) + "^2+" + Y(b) + "^4",
             pow(y[a], 4) - 6 * (pow(y[a], 2) * pow(y[b], 2)) + pow(y[b], 4));
      }
  Metric flat = metric_euclidean(Chart(codomain_names(n), std::vector<Interval>(n, Interval{-1, 1})));
  for (std::size_t i = 0; i < s.members.size(); ++i)
    if (!simplify(laplace_beltrami(flat, s.members[i])).expr.is_zero())
      throw std::logic_error("probe " + s.labels[i] + " is not harmonic");
  return s;
}

/// lap^2(f o phi) assembled from derivatives of f and the data of phi:
///
///   f_abcd G_ab G_cd
/// + f_abc [G_ab lap phi^c + G_bc lap phi^a + 2 g(grad G_ab, grad phi^c)]
/// + f_ab  [lap G_ab + 2 g(grad phi^b, grad lap phi^a) + lap phi^a lap phi^b]
/// + f_a   lap^2 phi^a
///
/// with G_ab = g(grad phi^a, grad phi^b), summed over all index tuples.
inline Field pullback_bilaplacian_chain(MapAnalysis& an, const Expr& f) {
  const std::size_t n = an.n();
  const auto ys = codomain_names(n);
  const auto& phi = an.map().components;
  CaveatLog* cv = &an.caveats();
  std::map<std::vector<std::size_t>, Expr> fd;  // sorted multi-index -> f derivative o phi
  std::map<std::vector<std::size_t>, Expr> fd_raw;
  auto deriv = [&](std::vector<std::size_t> ix) -> const Expr& {
    std::sort(ix.begin(), ix.end());
    if (auto it = fd.find(ix); it != fd.end()) return it->second;
    Expr d = f;
    if (!ix.empty()) {
      std::vector<std::size_t> parent(ix.begin(), ix.end() - 1);
      auto pit = fd_raw.find(parent);
      Expr base = pit != fd_raw.end() ? pit->second : f;
      if (pit == fd_raw.end())
        for (auto k : parent) base = diff(base, ys[k]);
      d = diff(base, ys[ix.back()]);
    }
    fd_raw[ix] = d;
    return fd.emplace(ix, d.is_zero() ? constant(0) : pull_back(an.map(), d)).first->second;
  };
  std::map<std::pair<std::size_t, std::size_t>, Expr> lapG;
  std::map<std::pair<std::size_t, std::size_t>, Expr> gradGphi;  // keyed (ab, c) flattened
  std::vector<Expr> sym_terms;
  Field out;
  for (std::size_t a = 0; a < n; ++a) {
    const Expr& fa = deriv({a});
    if (fa.is_zero()) continue;
    out = out + fa * an.bilap(a);
    for (std::size_t b = 0; b < n; ++b) {
      const Expr& fab = deriv({a, b});
      if (fab.is_zero()) continue;
      auto key = std::minmax(a, b);
      auto it = lapG.find(key);
      if (it == lapG.end()) it = lapG.emplace(key, laplace_beltrami(an.g(), an.G(a, b), cv)).first;
      sym_terms.push_back(mul({fab, add({it->second, 2 * grad_inner(an.g(), phi[b], an.lap(a), cv),
                                         an.lap(a) * an.lap(b)})}));
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        const Expr& fabc = deriv({a, b, c});
        if (fabc.is_zero()) continue;
        auto key = std::make_pair(std::min(a, b) * n + std::max(a, b), c);
        auto it = gradGphi.find(key);
        if (it == gradGphi.end()) it = gradGphi.emplace(key, grad_inner(an.g(), an.G(a, b), phi[c], cv)).first;
        sym_terms.push_back(
            mul({fabc, add({an.G(a, b) * an.lap(c), an.G(b, c) * an.lap(a), 2 * it->second})}));
        for (std::size_t d = 0; d < n; ++d) {
          const Expr& fabcd = deriv({a, b, c, d});
          if (fabcd.is_zero()) continue;
          sym_terms.push_back(mul({fabcd, an.G(a, b), an.G(c, d)}));
        }
      }
  return Field(add(std::move(sym_terms))) + out;
}

/// Checks that lap^2(f o phi) equals
///   lam^4 (lap^2 f) o phi + 2 [lam^2 lap phi^a + g(grad lam^2, grad phi^a)] (d_a lap f) o phi
///   + [lap lam^2 + 2 g(grad phi^1, grad lap phi^1) + (lap phi^1)^2] (lap f) o phi,
/// with lam^2 = |grad phi^1|^2 and Euclidean derivatives of f. Also reports
/// the largest deviation of the last bracket across component indices.
inline ConditionEntry check_ce_identity(MapAnalysis& an, const CheckReport& classified, const Expr& f,
                                        const std::vector<Point>& points, const CheckOptions& opt) {
  if (!is_ghm(classified.verdict))
    throw PreconditionError("closed-form identity applies only to generalized harmonic morphisms; verdict is " +
                            std::string(verdict_name(classified.verdict)));
  const std::size_t n = an.n();
  const auto ys = codomain_names(n);
  CaveatLog* cv = &an.caveats();
  Metric flat = Metric::from_matrix(
      Chart(ys, std::vector<Interval>(n, Interval{-1, 1})), [&] {
        std::vector<std::vector<Expr>> rows(n, std::vector<Expr>(n));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) rows[i][j] = constant(i == j ? 1 : 0);
        return rows;
      }());
  const Expr lapf = laplace_beltrami(flat, f);
  const Expr bilapf = laplace_beltrami(flat, lapf);
  const Expr& lam2 = an.G(0, 0);
  auto bracket = [&](std::size_t a) {
    return add({laplace_beltrami(an.g(), lam2, cv), 2 * grad_inner(an.g(), an.map().components[a], an.lap(a), cv),
                pow(an.lap(a), 2)});
  };
  std::vector<Expr> rhs{mul({pow(lam2, 2), pull_back(an.map(), bilapf)})};
  for (std::size_t a = 0; a < n; ++a) {
    Expr dlap = diff(lapf, ys[a]);
    if (dlap.is_zero()) continue;
    rhs.push_back(mul({constant(2),
                       add({lam2 * an.lap(a), grad_inner(an.g(), lam2, an.map().components[a], cv)}),
                       pull_back(an.map(), dlap)}));
  }
  const Expr k1 = bracket(0);
  rhs.push_back(mul({k1, pull_back(an.map(), lapf)}));
  Field lhs = an.bilap_of(pull_back(an.map(), f));
  ConditionEntry e = detail::decide("CE", {"lap^2(f o phi) - closed form"}, {lhs - Field(add(rhs))}, an.g(), points, opt);
  if (n > 1) {
    std::vector<Field> dev;
    for (std::size_t a = 1; a < n; ++a) dev.push_back(Field(bracket(a)) - Field(k1));
    auto v = detail::sample_fields(dev, an.g(), points);
    double worst = 0.0;
    for (const auto& row : v)
      for (const auto& fv : row) worst = std::max(worst, std::abs(fv.value));
    e.note = "max cross-index deviation of last bracket: " + std::to_string(worst);
  }
  return e;
}

/// lap^2(f o phi) for each harmonic probe f of degree <= 4.
inline ConditionEntry check_ghm_via_pullbacks(MapAnalysis& an, const std::vector<Point>& points,
                                              const CheckOptions& opt) {
  HarmonicSuite s = harmonic_suite(an.n(), 4);
  std::vector<Field> fields;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    fields.push_back(an.bilap_of(pull_back(an.map(), s.members[i])));
    labels.push_back("lap^2(" + s.labels[i] + " o phi)");
  }
  return detail::decide("Pullbacks", labels, fields, an.g(), points, opt);
}

struct QuasiHarmonicResult {
  std::vector<double> pullback;  // lap(f o phi), f = |y|^2 / (2n)
  std::vector<double> lambda_squared;
  double max_deviation = 0.0;  // relative to max(1, |lambda^2|)
  bool matches = false;
  bool nonzero_somewhere = false;
};

/// For a harmonic morphism, lap(f o phi) = lam^2 (lap f) o phi with lap f = 1.
inline QuasiHarmonicResult quasiharmonic_pullback(MapAnalysis& an, const CheckReport& classified,
                                                  const std::vector<Point>& points, double tol = 1e-8) {
  if (classified.verdict != Verdict::HarmonicMorphism)
    throw PreconditionError("quasi-harmonic pullback needs a harmonic morphism; verdict is " +
                            std::string(verdict_name(classified.verdict)));
  const std::size_t n = an.n();
  std::vector<Expr> sq;
  for (const auto& c : codomain_names(n)) sq.push_back(pow(variable(c), 2));
  Expr f = div(add(sq), constant(static_cast<long long>(2 * n)));
  Expr pulled = laplace_beltrami(an.g(), pull_back(an.map(), f), &an.caveats());
  auto v = detail::sample_fields({Field(pulled), Field(an.G(0, 0))}, an.g(), points);
  QuasiHarmonicResult r;
  for (std::size_t k = 0; k < points.size(); ++k) {
    r.pullback.push_back(v[0][k].value);
    r.lambda_squared.push_back(v[1][k].value);
    const double d = std::abs(v[0][k].value - v[1][k].value) / std::max(1.0, std::abs(v[1][k].value));
    r.max_deviation = std::max(r.max_deviation, d);
    if (std::abs(v[0][k].value) > tol) r.nonzero_somewhere = true;
  }
  r.matches = r.max_deviation < tol;
  return r;
}

namespace detail {

inline OracleSummary summarize(std::string label, const CrosscheckReport& c) {
  OracleSummary s;
  s.label = std::move(label);
  s.agree = c.agree;
  s.inconclusive = c.relied_on_estimate;
  s.max_deviation = c.max_deviation;
  if (!c.points.empty()) {
    const auto& p = c.points[c.worst];
    s.symbolic = p.symbolic;
    s.numeric = p.numeric;
    s.error = p.error;
  }
  return s;
}

}  // namespace detail

/// Finite-difference crosscheck of lap phi^a, lap^2 phi^a and the square
/// residuals at the first `opt.oracle_points` samples.
inline void crosscheck_map(MapAnalysis& an, CheckReport& report, const CheckOptions& opt) {
  if (opt.oracle_points == 0 || report.points.empty()) return;
  std::vector<Point> pts(report.points.begin(),
                         report.points.begin() + static_cast<long>(std::min(opt.oracle_points, report.points.size())));
  const auto& phi = an.map().components;
  auto add = [&](std::string label, const Field& sym, const Expr& f, Operator op) {
    try {
      report.oracle.push_back(detail::summarize(std::move(label), crosscheck(sym, an.g(), f, op, pts, opt.oracle_tol)));
    } catch (const StencilError& e) {
      OracleSummary s;
      s.label = label;
      s.agree = false;
      s.inconclusive = true;
      report.oracle.push_back(s);
      report.notes.push_back(std::string("oracle skipped ") + label + ": " + e.what());
    }
  };
  for (std::size_t a = 0; a < an.n(); ++a) {
    add("lap phi" + detail::idx(a), Field(an.lap(a)), phi[a], Operator::Laplace);
    add("lap^2 phi" + detail::idx(a), an.bilap(a), phi[a], Operator::Bilaplace);
  }
  for (std::size_t a = 0; a < an.n(); ++a)
    for (std::size_t b = a + 1; b < an.n(); ++b) {
      Expr prod = phi[a] * phi[b];
      add("lap^2(phi" + detail::idx(a) + " phi" + detail::idx(b) + ")", an.bilap_of(prod), prod, Operator::Bilaplace);
      Expr diffsq = phi[a] * phi[a] - phi[b] * phi[b];
      add("lap^2(phi" + detail::idx(a) + "^2 - phi" + detail::idx(b) + "^2)", an.bilap_of(diffsq), diffsq,
          Operator::Bilaplace);
    }
  for (const auto& s : report.oracle) {
    report.oracle_agree = report.oracle_agree && s.agree;
    report.oracle_inconclusive = report.oracle_inconclusive || s.inconclusive;
  }
}

/// Runs HWC, Bi (with harmonicity) and Sbi on seeded samples and derives the verdict.
inline CheckReport classify(MapAnalysis& an, const CheckOptions& opt = {}) {
  CheckReport r;
  r.map_name = an.map().name;
  r.seed = opt.seed;
  r.points = sample_points(an.map().chart(), opt.samples, opt.seed).points;
  if (an.map().codomain_conformal_factor)
    r.notes.push_back("codomain metric is conformal to the flat plane; checked in the flat chart");
  r.conditions.push_back(check_hwc(an, r.points, opt, &r.dilation_squared));
  ConditionEntry harm;
  r.conditions.push_back(check_biharmonic(an, r.points, opt, &harm));
  r.conditions.push_back(harm);
  r.conditions.push_back(check_square_biharmonic(an, r.points, opt));
  const bool hwc = r.condition("HWC").pass;
  if (!hwc) r.dilation_squared.clear();
  r.verdict = verdict_from_flags(hwc, r.condition("Bi").pass, r.condition("Sbi").pass, harm.pass);
  crosscheck_map(an, r, opt);
  r.caveats = an.caveats().texts();
  if (r.inconclusive()) r.notes.push_back("inconclusive at tol");
  return r;
}

inline CheckReport classify(const SmoothMap& m, const CheckOptions& opt = {}) {
  MapAnalysis an(m, opt.swell_cap);
  return classify(an, opt);
}

}  // namespace morphlab
