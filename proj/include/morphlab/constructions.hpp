#pragma once

// Building maps from maps (composition, direct sum) and the catalog of
// concrete maps with their expected verdicts.

#include "morphlab/morphism.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphlab {

/// outer o inner. The outer map's domain must be flat R^k with k the inner
/// codomain dimension; outer avoid predicates are pulled back.
inline SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner) {
  if (inner.codomain_dim() != outer.chart().dim())
    throw std::invalid_argument("compose: inner codomain has dimension " + std::to_string(inner.codomain_dim()) +
                                ", outer domain has " + std::to_string(outer.chart().dim()));
  if (!outer.domain.is_euclidean()) throw std::invalid_argument("compose: outer domain must be Euclidean");
  std::map<std::string, Expr> sub;
  for (std::size_t i = 0; i < inner.codomain_dim(); ++i) sub[outer.chart().names()[i]] = inner.components[i];
  std::vector<Expr> comps;
  for (const auto& c : outer.components) comps.push_back(substitute(c, sub));
  Chart chart = inner.chart();
  for (const auto& a : outer.chart().avoid()) chart = chart.with_avoid({substitute(a.predicate, sub), a.margin});
  SmoothMap out(outer.name + "-of-" + inner.name, inner.domain.with_chart(chart), std::move(comps));
  if (outer.declared_dilation && inner.declared_dilation)
    out.declared_dilation = substitute(*outer.declared_dilation, sub) * *inner.declared_dilation;
  out.dilation_disputed = outer.dilation_disputed || inner.dilation_disputed;
  out.codomain_conformal_factor = outer.codomain_conformal_factor;
  return out;
}

namespace detail {

inline Metric renamed_metric(const Metric& g, const std::string& prefix, std::map<std::string, Expr>& sub) {
  std::vector<std::string> names;
  for (const auto& n : g.chart().names()) {
    names.push_back(prefix + n);
    sub[n] = variable(prefix + n);
  }
  std::vector<AvoidRegion> avoid;
  for (const auto& a : g.chart().avoid()) avoid.push_back({substitute(a.predicate, sub), a.margin});
  Chart chart(std::move(names), g.chart().box(), std::move(avoid));
  std::vector<std::vector<Expr>> rows(g.dim(), std::vector<Expr>(g.dim()));
  for (std::size_t i = 0; i < g.dim(); ++i)
    for (std::size_t j = 0; j < g.dim(); ++j) rows[i][j] = substitute(g.g(i, j), sub);
  return Metric::from_matrix(std::move(chart), std::move(rows));
}

}  // namespace detail

/// (a + b)(x, y) = a(x) + b(y) on the product chart, variables prefixed a_ and b_.
/// Generalized harmonic when a is and b is a harmonic morphism; that is the
/// caller's claim and is not re-checked here.
inline SmoothMap direct_sum(const SmoothMap& a, const SmoothMap& b) {
  if (a.codomain_dim() != b.codomain_dim())
    throw std::invalid_argument("direct_sum: codomain dimensions differ (" + std::to_string(a.codomain_dim()) +
                                " vs " + std::to_string(b.codomain_dim()) + ")");
  std::map<std::string, Expr> sa, sb;
  Metric ga = detail::renamed_metric(a.domain, "a_", sa);
  Metric gb = detail::renamed_metric(b.domain, "b_", sb);
  std::vector<Expr> comps;
  for (std::size_t k = 0; k < a.codomain_dim(); ++k)
    comps.push_back(substitute(a.components[k], sa) + substitute(b.components[k], sb));
  SmoothMap out(a.name + "-plus-" + b.name, metric_product(ga, gb), std::move(comps));
  if (a.declared_dilation && b.declared_dilation) {
    out.declared_dilation = substitute(*a.declared_dilation, sa) + substitute(*b.declared_dilation, sb);
    out.dilation_disputed = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog

enum class Measurement { None, DilationExponent, DirectSumDilation };

struct CatalogEntry {
  std::string name;
  std::string description;
  SmoothMap map;
  std::optional<Verdict> expected;
  bool disputed = false;  // expectations or declared dilation are not asserted
  Measurement measurement = Measurement::None;
  /// For direct sums: the two summands' declared dilations, in the product chart.
  std::optional<Expr> dilation_a, dilation_b;
};

namespace detail {

inline std::set<std::string> names_of(const Chart& c) { return {c.names().begin(), c.names().end()}; }

inline SmoothMap make_map(std::string name, const Metric& g, const std::vector<std::string>& comps,
                          std::optional<std::string> dilation = std::nullopt) {
  std::vector<Expr> e;
  for (const auto& c : comps) e.push_back(parse(c, names_of(g.chart())));
  SmoothMap m(std::move(name), g, std::move(e));
  if (dilation) m.declared_dilation = parse(*dilation, names_of(g.chart()));
  return m;
}

inline Metric flat(std::size_t dim, std::vector<Interval> box, std::optional<std::string> avoid = std::nullopt,
                   double margin = 1e-3) {
  Chart c = Chart::cartesian(dim).with_box(std::move(box));
  if (avoid) c = c.with_avoid({parse(*avoid, names_of(c)), margin});
  return metric_euclidean(std::move(c));
}

inline std::vector<Interval> cube(std::size_t dim, double lo, double hi) {
  return std::vector<Interval>(dim, Interval{lo, hi});
}

inline std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> out;
  auto entry = [&](SmoothMap m, std::string description, std::optional<Verdict> expected, bool disputed = false) {
    CatalogEntry e{m.name, std::move(description), std::move(m), expected, disputed, Measurement::None, {}, {}};
    out.push_back(std::move(e));
    return &out.back();
  };

  const Metric r4_off_axis =
      flat(4, {{0.5, 2}, {0.5, 2}, {0.5, 2}, {-2, 2}}, "x1^2 + x2^2 + x3^2");
  const Metric r4_punctured = flat(4, cube(4, 0.5, 2), "x1^2 + x2^2 + x3^2 + x4^2");

  SmoothMap ex1 = make_map("ex1", r4_off_axis, {"sqrt(x1^2 + x2^2 + x3^2)", "x4"}, "1");
  SmoothMap inversion = make_map(
      "inversion4", r4_punctured,
      {"x1/(x1^2+x2^2+x3^2+x4^2)", "x2/(x1^2+x2^2+x3^2+x4^2)", "x3/(x1^2+x2^2+x3^2+x4^2)",
       "x4/(x1^2+x2^2+x3^2+x4^2)"},
      "1/(x1^2+x2^2+x3^2+x4^2)");
  SmoothMap hopf = make_map("hopf", flat(4, cube(4, -2, 2)),
                            {"x1^2 + x2^2 - x3^2 - x4^2", "2*x1*x3 - 2*x2*x4", "2*x1*x4 + 2*x2*x3"},
                            "2*sqrt(x1^2+x2^2+x3^2+x4^2)");
  SmoothMap projection = make_map("projection-r3-r2", flat(3, cube(3, -2, 2)), {"x1", "x2"}, "1");
  SmoothMap z2 = make_map("holomorphic-z2", flat(2, cube(2, -2, 2)), {"x1^2 - x2^2", "2*x1*x2"},
                          "2*sqrt(x1^2 + x2^2)");
  SmoothMap z3 = make_map("holomorphic-z3", flat(2, cube(2, -2, 2)), {"x1^3 - 3*x1*x2^2", "3*x1^2*x2 - x2^3"},
                          "3*(x1^2 + x2^2)");

  entry(ex1, "sqrt(x1^2+x2^2+x3^2) + i x4 on R^4 minus the x4-axis", Verdict::ProperGHM);
  entry(make_map("bfo", flat(3, cube(3, 0.5, 1.5), "x2^2 + x3^2"),
                 {"((1 - (x1^2+x2^2+x3^2)/2)*x2 + sqrt(2)*x1*x3)/(x2^2 + x3^2)",
                  "((1 - (x1^2+x2^2+x3^2)/2)*x3 - sqrt(2)*x1*x2)/(x2^2 + x3^2)"}),
        "conformal biharmonic map R^3 -> R^2 whose square is not biharmonic", Verdict::BiharmonicHWC_notGHM);
  entry(inversion, "inversion x/|x|^2 on R^4 minus the origin", Verdict::ProperGHM);
  entry(hopf, "Hopf map R^4 -> R^3", Verdict::HarmonicMorphism);
  {
    SmoothMap m = compose(ex1, inversion);
    m.name = "ex2";
    entry(m, "ex1 after the inversion", Verdict::ProperGHM);
  }
  SmoothMap ex3 = compose(hopf, inversion);
  ex3.name = "ex3";
  ex3.declared_dilation = parse("2/(x1^2+x2^2+x3^2+x4^2)^(3/4)", names_of(ex3.chart()));
  ex3.dilation_disputed = true;
  {
    CatalogEntry* e = entry(ex3, "Hopf map after the inversion (quadratic over |x|^4)", Verdict::ProperGHM);
    e->measurement = Measurement::DilationExponent;
  }
  entry(make_map("ex3-as-printed", r4_punctured,
                 {"(x1^2+x2^2-x3^2-x4^2)/(x1^2+x2^2+x3^2+x4^2)", "(2*x1*x3-2*x2*x4)/(x1^2+x2^2+x3^2+x4^2)",
                  "(2*x1*x4+2*x2*x3)/(x1^2+x2^2+x3^2+x4^2)"}),
        "Hopf map divided by |x|^2; differs from the composition", std::nullopt, true);
  for (auto [a, b] : {std::pair{1, 2}, {1, 3}, {2, 3}}) {
    SmoothMap proj = make_map("p", flat(3, cube(3, -2, 2)), {"x" + std::to_string(a), "x" + std::to_string(b)});
    SmoothMap m = compose(proj, ex3);
    m.name = "ex4-" + std::to_string(a) + std::to_string(b);
    m.declared_dilation.reset();
    m.dilation_disputed = false;
    entry(m, "components " + std::to_string(a) + "," + std::to_string(b) + " of ex3", Verdict::ProperGHM);
  }
  {
    SmoothMap m = ex1;
    m.name = "ex10";
    m.declared_dilation.reset();
    m.codomain_conformal_factor = parse("4/(1 + y1^2 + y2^2)^2", std::set<std::string>{"y1", "y2"});
    entry(m, "ex1 followed by inverse stereographic projection onto the 2-sphere", Verdict::ProperGHM);
  }
  {
    SmoothMap m = make_map("stereo-inverse", flat(2, cube(2, -2, 2)), {"x1", "x2"});
    m.codomain_conformal_factor = parse("4/(1 + y1^2 + y2^2)^2", std::set<std::string>{"y1", "y2"});
    entry(m, "inverse stereographic projection R^2 -> S^2 in the stereographic chart",
          Verdict::HarmonicMorphism);
  }
  entry(projection, "orthogonal projection R^3 -> R^2", Verdict::HarmonicMorphism);
  entry(make_map("identity2", flat(2, cube(2, -2, 2)), {"x1", "x2"}, "1"), "identity of R^2",
        Verdict::HarmonicMorphism);
  entry(make_map("identity3", flat(3, cube(3, -2, 2)), {"x1", "x2", "x3"}, "1"), "identity of R^3",
        Verdict::HarmonicMorphism);
  entry(z2, "z^2 on the complex plane", Verdict::HarmonicMorphism);
  entry(z3, "z^3 on the complex plane", Verdict::HarmonicMorphism);
  {
    SmoothMap m = direct_sum(ex1, z2);
    m.name = "ex1-plus-z2";
    CatalogEntry* e = entry(m, "direct sum of ex1 and z^2 on R^4 x C", Verdict::ProperGHM);
    e->measurement = Measurement::DirectSumDilation;
    std::map<std::string, Expr> sa, sb;
    for (const auto& n : ex1.chart().names()) sa[n] = variable("a_" + n);
    for (const auto& n : z2.chart().names()) sb[n] = variable("b_" + n);
    e->dilation_a = substitute(*ex1.declared_dilation, sa);
    e->dilation_b = substitute(*z2.declared_dilation, sb);
  }
  {
    SmoothMap m = direct_sum(ex1, ex1);
    m.name = "ex1-plus-ex1";
    m.declared_dilation.reset();
    m.dilation_disputed = false;
    entry(m, "direct sum of two copies of ex1", Verdict::BiharmonicHWC_notGHM);
  }
  {
    Metric w = metric_warped(parse("(x + y)^(-2)", std::set<std::string>{"x", "y"}));
    entry(make_map("warped-projection", w, {"x", "y"}, "1"),
          "projection (x,y,z) -> (x,y) from the warped product with beta = (x+y)^-2", Verdict::ProperGHM);
    entry(make_map("warped-square", w, {"x^2 - y^2", "2*x*y"}, "2*sqrt(x^2 + y^2)"),
          "(x^2 - y^2, 2xy) on the same warped product", Verdict::ProperGHM);
  }
  return out;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

inline const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = detail::build_catalog();
  return entries;
}

/// Case-insensitive lookup by catalog name.
inline const CatalogEntry& catalog_lookup(const std::string& name) {
  const std::string key = detail::lowercase(name);
  for (const auto& e : catalog())
    if (e.name == key) return e;
  std::string valid;
  for (const auto& e : catalog()) valid += (valid.empty() ? "" : ", ") + e.name;
  throw std::out_of_range("unknown catalog entry '" + name + "'; valid names: " + valid);
}

// ---------------------------------------------------------------------------
// Running catalog entries

struct DilationComparison {
  std::string candidate;
  double max_rel_deviation = 0.0;
  bool matches = false;
};

/// A measured quantity set against one or more declared candidates.
struct MeasurementRecord {
  std::string label;
  std::string declared;
  double measured = 0.0;
  std::vector<DilationComparison> comparisons;
};

struct CatalogResult {
  std::string name;
  CheckReport report;
  std::optional<Verdict> expected;
  bool disputed = false;
  bool verdict_matches = true;  // true when nothing is expected
  std::optional<DilationComparison> declared_dilation;
  std::vector<MeasurementRecord> measurements;
  bool pass() const { return disputed || (verdict_matches && (!declared_dilation || declared_dilation->matches)); }
};

namespace detail {

inline DilationComparison compare_dilation(const std::string& label, const Expr& candidate_squared,
                                           const Metric& g, const std::vector<Point>& points,
                                           const std::vector<double>& lambda_squared, double tol) {
  Evaluator ev({candidate_squared}, g.chart().names());
  DilationComparison c{label, 0.0, false};
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double want = ev.evaluate_one(points[k]);
    const double got = lambda_squared[k];
    const double d = std::abs(std::sqrt(std::abs(got)) - std::sqrt(std::abs(want))) /
                     std::max(1e-300, std::sqrt(std::abs(want)));
    c.max_rel_deviation = std::max(c.max_rel_deviation, d);
  }
  c.matches = c.max_rel_deviation < tol;
  return c;
}

}  // namespace detail

inline CatalogResult run_catalog_entry(const CatalogEntry& e, const CheckOptions& opt = {}) {
  CatalogResult r;
  r.name = e.name;
  r.expected = e.expected;
  r.disputed = e.disputed;
  MapAnalysis an(e.map, opt.swell_cap);
  r.report = classify(an, opt);
  if (e.expected) r.verdict_matches = r.report.verdict == *e.expected;
  const auto& lam2 = r.report.dilation_squared;
  const Metric& g = e.map.domain;
  if (e.map.declared_dilation && !lam2.empty()) {
    const Expr declared2 = pow(*e.map.declared_dilation, 2);
    auto cmp = detail::compare_dilation(to_string(*e.map.declared_dilation), declared2, g, r.report.points, lam2, 1e-6);
    if (e.map.dilation_disputed) {
      if (e.measurement != Measurement::DirectSumDilation) {
        MeasurementRecord m{"declared dilation", to_string(*e.map.declared_dilation), std::nan(""), {cmp}};
        r.measurements.push_back(m);
      }
    } else {
      r.declared_dilation = cmp;
    }
  }
  if (e.measurement == Measurement::DilationExponent) {
    // lambda along the diagonal ray, radii 1, 2, 4.
    const std::vector<double> radii{1.0, 2.0, 4.0};
    Evaluator ev({an.G(0, 0)}, g.chart().names());
    std::vector<double> lam;
    const double c = 1.0 / std::sqrt(static_cast<double>(g.dim()));
    for (double rad : radii) lam.push_back(std::sqrt(ev.evaluate_one(Point(g.dim(), rad * c))));
    MeasurementRecord m{"dilation exponent", "-3/2", loglog_slope(radii, lam), {}};
    for (double cand : {-1.5, -3.0})
      m.comparisons.push_back({std::to_string(cand).substr(0, 4), std::abs(m.measured - cand),
                               std::abs(m.measured - cand) < 1e-9});
    r.measurements.push_back(m);
  }
  if (e.measurement == Measurement::DirectSumDilation && e.dilation_a && e.dilation_b && !lam2.empty()) {
    MeasurementRecord m{"direct-sum dilation", "lambda1 + lambda2", std::nan(""), {}};
    m.comparisons.push_back(detail::compare_dilation("(lambda1 + lambda2)^2", pow(*e.dilation_a + *e.dilation_b, 2),
                                                     g, r.report.points, lam2, 1e-6));
    m.comparisons.push_back(detail::compare_dilation("lambda1^2 + lambda2^2",
                                                     pow(*e.dilation_a, 2) + pow(*e.dilation_b, 2), g,
                                                     r.report.points, lam2, 1e-6));
    r.measurements.push_back(m);
  }
  return r;
}

}  // namespace morphlab
