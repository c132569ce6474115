#pragma once

// Coordinate charts, Riemannian metrics and the differential operators built
// on them.
//
// Sign convention: the Laplace-Beltrami operator is div grad,
//
//     lap f = (1/sqrt|g|) d_i( sqrt|g| g^ij d_j f ),
//
// so lap r = 2/r for r = |x| in three variables. It is assembled as
// g^ij d_ij f + b^j d_j f with the drift b^j = d_i g^ij + g^ij d_i ln sqrt|g|
// precomputed per metric.

#include "morphlab/calculus.hpp"
#include "morphlab/evaluator.hpp"
#include "morphlab/parse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace morphlab {

using Point = std::vector<double>;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Points where `predicate` evaluates below `margin` (including negative
/// values and points where it is undefined) are excluded from sampling.
struct AvoidRegion {
  Expr predicate;
  double margin = 1e-3;
};

class Chart {
 public:
  Chart(std::vector<std::string> names, std::vector<Interval> box, std::vector<AvoidRegion> avoid = {})
      : names_(std::move(names)), box_(std::move(box)), avoid_(std::move(avoid)) {
    if (names_.empty()) throw std::invalid_argument("chart dimension must be at least 1");
    if (box_.size() != names_.size()) throw std::invalid_argument("chart box must have one interval per variable");
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw std::invalid_argument("chart variable names must be distinct");
    for (const auto& iv : box_)
      if (!(iv.lo < iv.hi)) throw std::invalid_argument("chart box interval is degenerate");
    for (const auto& a : avoid_)
      for (const auto& n : free_names(a.predicate))
        if (!seen.count(n)) throw std::invalid_argument("avoid predicate references unknown name '" + n + "'");
  }

  /// Chart x1..x_dim over the cube [lo, hi]^dim.
  static Chart cartesian(std::size_t dim, double lo = -2.0, double hi = 2.0, const std::string& prefix = "x") {
    std::vector<std::string> names;
    for (std::size_t i = 1; i <= dim; ++i) names.push_back(prefix + std::to_string(i));
    return Chart(std::move(names), std::vector<Interval>(dim, Interval{lo, hi}));
  }

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Interval>& box() const { return box_; }
  const std::vector<AvoidRegion>& avoid() const { return avoid_; }

  Expr coordinate(std::size_t i) const { return variable(names_.at(i)); }
  std::vector<Expr> coordinates() const {
    std::vector<Expr> out;
    for (const auto& n : names_) out.push_back(variable(n));
    return out;
  }
  Scope scope() const { return Scope{{names_.begin(), names_.end()}, {}}; }

  Chart with_box(std::vector<Interval> box) const { return Chart(names_, std::move(box), avoid_); }
  Chart with_avoid(AvoidRegion region) const {
    auto avoid = avoid_;
    avoid.push_back(std::move(region));
    return Chart(names_, box_, std::move(avoid));
  }

  /// True when x is inside the box (by `boundary_margin`) and clear of every avoid region.
  bool admissible(std::span<const double> x, double boundary_margin = 1e-3) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < box_[i].lo + boundary_margin || x[i] > box_[i].hi - boundary_margin) return false;
    if (avoid_.empty()) return true;
    ensure_avoid_evaluator();
    try {
      std::vector<double> v(avoid_.size());
      avoid_eval_->evaluate(x, v);
      for (std::size_t k = 0; k < avoid_.size(); ++k)
        if (!(v[k] >= avoid_[k].margin)) return false;
    } catch (const DomainError&) {
      return false;
    }
    return true;
  }

 private:
  void ensure_avoid_evaluator() const {
    if (avoid_eval_) return;
    std::vector<Expr> preds;
    for (const auto& a : avoid_) preds.push_back(a.predicate);
    avoid_eval_ = std::make_shared<Evaluator>(std::move(preds), names_);
  }

  std::vector<std::string> names_;
  std::vector<Interval> box_;
  std::vector<AvoidRegion> avoid_;
  mutable std::shared_ptr<const Evaluator> avoid_eval_;
};

/// Seeded uniform sample of admissible chart points.
struct SampleSet {
  std::uint64_t seed = 0;
  std::vector<Point> points;
};

inline SampleSet sample_points(const Chart& chart, std::size_t count, std::uint64_t seed,
                               double boundary_margin = 1e-3) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  SampleSet s{seed, {}};
  s.points.reserve(count);
  const std::size_t max_attempts = 1000 * count + 1000;
  Point x(chart.dim());
  for (std::size_t attempt = 0; attempt < max_attempts && s.points.size() < count; ++attempt) {
    for (std::size_t i = 0; i < chart.dim(); ++i) {
      const auto& iv = chart.box()[i];
      x[i] = iv.lo + (iv.hi - iv.lo) * unit();
    }
    if (chart.admissible(x, boundary_margin)) s.points.push_back(x);
  }
  if (s.points.size() < count)
    throw std::runtime_error("could only draw " + std::to_string(s.points.size()) + " of " +
                             std::to_string(count) + " admissible sample points");
  return s;
}

// ---------------------------------------------------------------------------
// Metrics

class Metric {
 public:
  enum class Kind { Euclidean, Diagonal, Dense };

  /// Metric g_ij = rows[i][j] on `chart`. Rows must be symmetric as trees.
  static Metric from_matrix(Chart chart, std::vector<std::vector<Expr>> rows) {
    const std::size_t m = chart.dim();
    if (rows.size() != m) throw std::invalid_argument("metric must be dim x dim");
    bool diagonal = true;
    bool identity = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (rows[i].size() != m) throw std::invalid_argument("metric must be dim x dim");
      for (std::size_t j = 0; j < m; ++j) {
        if (!structurally_equal(rows[i][j], rows[j][i]))
          throw std::invalid_argument("metric is not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
        if (i != j && !rows[i][j].is_zero()) diagonal = false;
        if ((i == j && !rows[i][j].is_one()) || (i != j && !rows[i][j].is_zero())) identity = false;
      }
    }
    const Kind kind = identity ? Kind::Euclidean : diagonal ? Kind::Diagonal : Kind::Dense;
    return Metric(std::move(chart), std::move(rows), kind);
  }

  const Chart& chart() const { return d_->chart; }
  std::size_t dim() const { return d_->chart.dim(); }
  Kind kind() const { return d_->kind; }
  bool is_euclidean() const { return d_->kind == Kind::Euclidean; }
  const Expr& g(std::size_t i, std::size_t j) const { return d_->g[i][j]; }
  const Expr& inv(std::size_t i, std::size_t j) const { return d_->inv[i][j]; }
  const Expr& det() const { return d_->det; }
  const Expr& sqrt_det() const { return d_->sqrt_det; }
  /// b^j in  lap f = g^ij d_ij f + b^j d_j f.
  const Expr& drift(std::size_t j) const { return d_->drift[j]; }
  const std::vector<std::vector<Expr>>& rows() const { return d_->g; }

  /// Same metric over a chart with the same variable names but another box or avoid set.
  Metric with_chart(Chart chart) const {
    if (chart.names() != d_->chart.names()) throw std::invalid_argument("with_chart: variable names differ");
    Metric out = *this;
    auto d = std::make_shared<Data>(*d_);
    d->chart = std::move(chart);
    out.d_ = std::move(d);
    return out;
  }

  /// Evaluates the metric and the identity g * g^-1 = I at sampled points.
  void validate(std::size_t samples = 12, std::uint64_t seed = 0x5eedULL) const {
    const std::size_t m = dim();
    std::vector<Expr> roots;
    for (std::size_t i = 0; i < m; ++i) roots.push_back(d_->g[i][i]);
    roots.push_back(d_->det);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) roots.push_back(d_->g[i][j]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) roots.push_back(d_->inv[i][j]);
    Evaluator ev(roots, chart().names());
    SampleSet pts = sample_points(chart(), samples, seed);
    std::vector<double> v(roots.size());
    for (const auto& x : pts.points) {
      ev.evaluate(x, v);
      for (std::size_t i = 0; i < m; ++i)
        if (!(v[i] > 0.0))
          throw std::domain_error("nonpositive metric entry g" + std::to_string(i + 1) + std::to_string(i + 1) +
                                  " at a sample point");
      if (!(v[m] > 0.0)) throw std::domain_error("metric determinant is not positive at a sample point");
      const double* G = v.data() + m + 1;
      const double* H = G + m * m;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < m; ++k) s += G[i * m + k] * H[k * m + j];
          if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-10)
            throw std::domain_error("metric inverse check failed at a sample point");
        }
    }
  }

 private:
  struct Data {
    Chart chart;
    Kind kind;
    std::vector<std::vector<Expr>> g, inv;
    Expr det, sqrt_det;
    std::vector<Expr> drift;
  };

  Metric(Chart chart, std::vector<std::vector<Expr>> rows, Kind kind) {
    const std::size_t m = chart.dim();
    auto d = std::make_shared<Data>(Data{std::move(chart), kind, std::move(rows), {}, {}, {}, {}});
    d->inv = invert(d->g);
    d->det = determinant(d->g);
    d->sqrt_det = sqrt(d->det);
    // d_i ln sqrt|g| = (1/2) d_i det / det; diagonal metrics sum per entry to avoid det swell.
    std::vector<Expr> dlog(m);
    const auto& names = d->chart.names();
    for (std::size_t i = 0; i < m; ++i) {
      if (kind == Kind::Euclidean) {
        dlog[i] = constant(0);
      } else if (kind == Kind::Diagonal) {
        std::vector<Expr> t;
        for (std::size_t k = 0; k < m; ++k) {
          Expr dk = diff(d->g[k][k], names[i]);
          if (!dk.is_zero()) t.push_back(div(dk, d->g[k][k]));
        }
        dlog[i] = simplify(mul({constant(1, 2), add(std::move(t))})).expr;
      } else {
        dlog[i] = simplify(div(diff(d->det, names[i]), mul({constant(2), d->det}))).expr;
      }
    }
    d->drift.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<Expr> t;
      for (std::size_t i = 0; i < m; ++i) {
        if (d->inv[i][j].is_zero()) continue;
        t.push_back(diff(d->inv[i][j], names[i]));
        if (!dlog[i].is_zero()) t.push_back(mul({d->inv[i][j], dlog[i]}));
      }
      d->drift[j] = simplify(add(std::move(t))).expr;
    }
    d_ = std::move(d);
  }

  static Expr determinant(const std::vector<std::vector<Expr>>& a) {
    const std::size_t n = a.size();
    if (n == 1) return a[0][0];
    bool diagonal = true;
    for (std::size_t i = 0; i < n && diagonal; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && !a[i][j].is_zero()) {
          diagonal = false;
          break;
        }
    if (diagonal) {
      std::vector<Expr> d;
      for (std::size_t i = 0; i < n; ++i) d.push_back(a[i][i]);
      return mul(std::move(d));
    }
    if (n > 4) {
      // Product of elimination pivots; SPD matrices need no pivoting.
      auto w = a;
      std::vector<Expr> pivots;
      for (std::size_t k = 0; k < n; ++k) {
        pivots.push_back(w[k][k]);
        for (std::size_t i = k + 1; i < n; ++i) {
          if (w[i][k].is_zero()) continue;
          Expr f = simplify(div(w[i][k], w[k][k])).expr;
          for (std::size_t j = k; j < n; ++j) w[i][j] = simplify(w[i][j] - f * w[k][j]).expr;
        }
      }
      return simplify(mul(std::move(pivots))).expr;
    }
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < n; ++j) {
      if (a[0][j].is_zero()) continue;
      Expr c = mul({a[0][j], determinant(minor(a, 0, j))});
      terms.push_back(j % 2 == 0 ? c : neg(c));
    }
    return simplify(add(std::move(terms))).expr;
  }

  static std::vector<std::vector<Expr>> minor(const std::vector<std::vector<Expr>>& a, std::size_t r,
                                              std::size_t c) {
    std::vector<std::vector<Expr>> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i == r) continue;
      std::vector<Expr> row;
      for (std::size_t j = 0; j < a.size(); ++j)
        if (j != c) row.push_back(a[i][j]);
      out.push_back(std::move(row));
    }
    return out;
  }

  // Inverse by independent blocks: 1x1 reciprocal, adjugate up to 4x4,
  // Gauss-Jordan above that.
  static std::vector<std::vector<Expr>> invert(const std::vector<std::vector<Expr>>& a) {
    const std::size_t n = a.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!a[i][j].is_zero()) parent[find(i)] = find(j);
    std::vector<std::vector<Expr>> inv(n, std::vector<Expr>(n, constant(0)));
    std::vector<bool> done(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < n; ++j)
        if (find(j) == find(i)) idx.push_back(j);
      for (auto j : idx) done[j] = true;
      std::vector<std::vector<Expr>> block(idx.size(), std::vector<Expr>(idx.size()));
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c) block[r][c] = a[idx[r]][idx[c]];
      auto bi = invert_block(block);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c) inv[idx[r]][idx[c]] = bi[r][c];
    }
    return inv;
  }

  static std::vector<std::vector<Expr>> invert_block(const std::vector<std::vector<Expr>>& a) {
    const std::size_t n = a.size();
    if (n == 1) return {{simplify(div(constant(1), a[0][0])).expr}};
    std::vector<std::vector<Expr>> out(n, std::vector<Expr>(n));
    if (n <= 4) {
      Expr det = determinant(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          Expr cof = determinant(minor(a, j, i));
          if ((i + j) % 2) cof = neg(cof);
          out[i][j] = simplify(div(cof, det)).expr;
        }
      return out;
    }
    auto w = a;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] = constant(i == j ? 1 : 0);
    for (std::size_t k = 0; k < n; ++k) {
      Expr p = w[k][k];
      for (std::size_t j = 0; j < n; ++j) {
        w[k][j] = simplify(div(w[k][j], p)).expr;
        out[k][j] = simplify(div(out[k][j], p)).expr;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (i == k || w[i][k].is_zero()) continue;
        Expr f = w[i][k];
        for (std::size_t j = 0; j < n; ++j) {
          w[i][j] = simplify(w[i][j] - f * w[k][j]).expr;
          out[i][j] = simplify(out[i][j] - f * out[k][j]).expr;
        }
      }
    }
    return out;
  }

  std::shared_ptr<const Data> d_;
};

/// Flat metric on the chart x1..x_dim.
inline Metric metric_euclidean(std::size_t dim) {
  Chart chart = Chart::cartesian(dim);
  std::vector<std::vector<Expr>> rows(dim, std::vector<Expr>(dim));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) rows[i][j] = constant(i == j ? 1 : 0);
  return Metric::from_matrix(std::move(chart), std::move(rows));
}

inline Metric metric_euclidean(Chart chart) {
  const std::size_t dim = chart.dim();
  std::vector<std::vector<Expr>> rows(dim, std::vector<Expr>(dim));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) rows[i][j] = constant(i == j ? 1 : 0);
  return Metric::from_matrix(std::move(chart), std::move(rows));
}

inline Metric metric_diagonal(Chart chart, const std::vector<Expr>& diag) {
  const std::size_t dim = chart.dim();
  if (diag.size() != dim) throw std::invalid_argument("diagonal metric needs one entry per variable");
  std::vector<std::vector<Expr>> rows(dim, std::vector<Expr>(dim, constant(0)));
  for (std::size_t i = 0; i < dim; ++i) rows[i][i] = diag[i];
  Metric g = Metric::from_matrix(std::move(chart), std::move(rows));
  g.validate();
  return g;
}

/// Default chart (x, y, z) for warped products over the plane.
inline Chart warped_chart(std::vector<Interval> box = {{0.5, 1.5}, {0.5, 1.5}, {0.0, 1.0}}) {
  return Chart({"x", "y", "z"}, std::move(box));
}

/// dx^2 + dy^2 + beta(x,y)^-2 dz^2.
inline Metric metric_warped(const Expr& beta, Chart chart = warped_chart()) {
  if (chart.dim() != 3) throw std::invalid_argument("warped metric needs a 3-dimensional chart");
  for (const auto& n : free_names(beta))
    if (n != chart.names()[0] && n != chart.names()[1])
      throw std::invalid_argument("warping function may depend only on the first two coordinates");
  {
    SampleSet s = sample_points(chart, 16, 0xbe7aULL);
    Evaluator ev({beta}, chart.names());
    for (const auto& x : s.points)
      if (!(ev.evaluate_one(x) > 0.0)) throw std::domain_error("warping function is not positive on the box");
  }
  return metric_diagonal(std::move(chart), {constant(1), constant(1), pow(beta, -2)});
}

/// Product metric on the disjoint union of two charts' variables.
inline Metric metric_product(const Metric& a, const Metric& b) {
  std::vector<std::string> names = a.chart().names();
  names.insert(names.end(), b.chart().names().begin(), b.chart().names().end());
  std::vector<Interval> box = a.chart().box();
  box.insert(box.end(), b.chart().box().begin(), b.chart().box().end());
  std::vector<AvoidRegion> avoid = a.chart().avoid();
  avoid.insert(avoid.end(), b.chart().avoid().begin(), b.chart().avoid().end());
  Chart chart(std::move(names), std::move(box), std::move(avoid));
  const std::size_t m = a.dim() + b.dim();
  std::vector<std::vector<Expr>> rows(m, std::vector<Expr>(m, constant(0)));
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) rows[i][j] = a.g(i, j);
  for (std::size_t i = 0; i < b.dim(); ++i)
    for (std::size_t j = 0; j < b.dim(); ++j) rows[a.dim() + i][a.dim() + j] = b.g(i, j);
  return Metric::from_matrix(std::move(chart), std::move(rows));
}

// ---------------------------------------------------------------------------
// Operators

/// g^ij d_i f d_j h.
inline Expr grad_inner(const Metric& g, const Expr& f, const Expr& h, CaveatLog* caveats = nullptr) {
  const auto& names = g.chart().names();
  const std::size_t m = g.dim();
  std::vector<Expr> df(m), dh(m);
  for (std::size_t i = 0; i < m; ++i) {
    df[i] = diff(f, names[i], caveats);
    dh[i] = f.get() == h.get() ? df[i] : diff(h, names[i], caveats);
  }
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < m; ++i) {
    if (df[i].is_zero()) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (dh[j].is_zero() || g.inv(i, j).is_zero()) continue;
      terms.push_back(mul({g.inv(i, j), df[i], dh[j]}));
    }
  }
  return add(std::move(terms));
}

inline Expr laplace_beltrami(const Metric& g, const Expr& f, CaveatLog* caveats = nullptr) {
  const auto& names = g.chart().names();
  const std::size_t m = g.dim();
  std::vector<Expr> df(m);
  for (std::size_t i = 0; i < m; ++i) df[i] = diff(f, names[i], caveats);
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < m; ++i) {
    if (df[i].is_zero()) continue;
    for (std::size_t j = i; j < m; ++j) {
      const Expr& gij = g.inv(i, j);
      if (gij.is_zero()) continue;
      Expr dij = diff(df[i], names[j], caveats);
      if (dij.is_zero()) continue;
      terms.push_back(i == j ? mul({gij, dij}) : mul({constant(2), gij, dij}));
    }
    if (!g.drift(i).is_zero()) terms.push_back(mul({g.drift(i), df[i]}));
  }
  return add(std::move(terms));
}

/// A scalar field: a sum of terms coefficient * payload, where a payload is
/// either an expression or the Laplacian of an expression applied lazily
/// (evaluated through second-order jets instead of a flattened tree).
class Field {
 public:
  struct Term {
    Expr coefficient;
    Expr payload;
    bool lazy_laplacian = false;
  };

  Field() = default;
  Field(Expr e) { terms_.push_back({constant(1), std::move(e), false}); }  // NOLINT: implicit by design of the algebra

  static Field lazy_laplacian(const Metric& g, Expr inner) {
    Field f;
    f.metric_ = std::make_shared<Metric>(g);
    f.terms_.push_back({constant(1), std::move(inner), true});
    return f;
  }

  const std::vector<Term>& terms() const { return terms_; }
  const Metric* metric() const { return metric_.get(); }

  bool is_symbolic() const {
    return std::none_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.lazy_laplacian; });
  }

  /// Single expression; only for symbolic fields.
  Expr expr() const {
    if (!is_symbolic()) throw std::logic_error("field holds a lazily composed operator");
    std::vector<Expr> parts;
    for (const auto& t : terms_) parts.push_back(mul({t.coefficient, t.payload}));
    return add(std::move(parts));
  }

  std::size_t node_count() const {
    std::size_t n = 0;
    for (const auto& t : terms_) n += dag_size(t.coefficient) + dag_size(t.payload);
    return n;
  }

  std::string describe(std::size_t limit = 160) const {
    if (is_symbolic()) return abbreviate(expr(), limit);
    return "<lazy Laplacian composition, " + std::to_string(node_count()) + " nodes>";
  }

  friend Field operator+(const Field& a, const Field& b) {
    Field out = a;
    out.terms_.insert(out.terms_.end(), b.terms_.begin(), b.terms_.end());
    if (!out.metric_) out.metric_ = b.metric_;
    return out;
  }
  friend Field operator*(const Expr& c, const Field& f) {
    Field out = f;
    for (auto& t : out.terms_) t.coefficient = mul({c, t.coefficient});
    return out;
  }
  friend Field operator-(const Field& a) { return constant(-1) * a; }
  friend Field operator-(const Field& a, const Field& b) { return a + (-b); }

 private:
  std::vector<Term> terms_;
  std::shared_ptr<const Metric> metric_;
};

inline constexpr std::size_t kDefaultSwellCap = 200000;

/// lap(lap f). Falls back to a lazily composed evaluator when the flattened
/// tree would exceed `swell_cap` nodes.
inline Field bilaplacian(const Metric& g, const Expr& f, CaveatLog* caveats = nullptr,
                         std::size_t swell_cap = kDefaultSwellCap) {
  Expr inner = laplace_beltrami(g, f, caveats);
  if (dag_size(inner) * 8 > swell_cap) return Field::lazy_laplacian(g, inner);
  Expr outer = laplace_beltrami(g, inner, caveats);
  if (dag_size(outer) > swell_cap) return Field::lazy_laplacian(g, inner);
  return Field(outer);
}

struct FieldValue {
  double value = 0.0;
  double scale = 0.0;  // largest magnitude among the summed terms
};

/// Evaluates a batch of fields over the coordinates of one chart.
class FieldEvaluator {
 public:
  FieldEvaluator(const std::vector<Field>& fields, const std::vector<std::string>& inputs) {
    std::vector<Expr> plain, lazy;
    for (const auto& f : fields) {
      std::vector<Slot> slots;
      for (const auto& t : f.terms()) {
        Slot s;
        s.coefficient = static_cast<std::uint32_t>(plain.size());
        plain.push_back(t.coefficient);
        if (t.lazy_laplacian) {
          if (!metric_) metric_ = std::make_shared<Metric>(*f.metric());
          s.lazy = true;
          s.payload = static_cast<std::uint32_t>(lazy.size());
          lazy.push_back(t.payload);
        } else {
          s.payload = static_cast<std::uint32_t>(plain.size());
          plain.push_back(t.payload);
        }
        slots.push_back(s);
      }
      fields_.push_back(std::move(slots));
    }
    plain_ = Evaluator(plain, inputs);
    plain_count_ = plain.size();
    if (!lazy.empty()) {
      if (metric_->chart().names() != inputs)
        throw std::invalid_argument("lazy operator chart differs from evaluation inputs");
      lazy_ = Evaluator(lazy, inputs);
      const std::size_t m = inputs.size();
      std::vector<Expr> coeffs;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) coeffs.push_back(metric_->inv(i, j));
      for (std::size_t j = 0; j < m; ++j) coeffs.push_back(metric_->drift(j));
      metric_eval_ = Evaluator(coeffs, inputs);
      lazy_count_ = lazy.size();
    }
  }

  std::vector<FieldValue> operator()(std::span<const double> x) const {
    std::vector<double> v(plain_count_), s(plain_count_);
    plain_.evaluate(x, v, s);
    std::vector<double> lv(lazy_count_), ls(lazy_count_);
    if (lazy_count_ > 0) {
      const std::size_t m = x.size();
      std::vector<double> coeff = metric_eval_(x);
      auto jets = lazy_.jets(x);
      for (std::size_t k = 0; k < lazy_count_; ++k) {
        double sum = 0.0, mag = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            const double t = coeff[i * m + j] * jets[k].hess[i * m + j];
            sum += t;
            mag = std::max(mag, std::abs(t));
          }
          const double t = coeff[m * m + i] * jets[k].grad[i];
          sum += t;
          mag = std::max(mag, std::abs(t));
        }
        lv[k] = sum;
        ls[k] = mag;
      }
    }
    std::vector<FieldValue> out;
    out.reserve(fields_.size());
    for (const auto& slots : fields_) {
      FieldValue fv;
      for (const auto& sl : slots) {
        const double c = v[sl.coefficient];
        const double pv = sl.lazy ? lv[sl.payload] : v[sl.payload];
        const double ps = sl.lazy ? ls[sl.payload] : s[sl.payload];
        fv.value += c * pv;
        fv.scale = std::max(fv.scale, std::abs(c) * std::max(ps, std::abs(pv)));
      }
      out.push_back(fv);
    }
    return out;
  }

 private:
  struct Slot {
    std::uint32_t coefficient = 0;
    std::uint32_t payload = 0;
    bool lazy = false;
  };
  std::vector<std::vector<Slot>> fields_;
  Evaluator plain_, lazy_, metric_eval_;
  std::size_t plain_count_ = 0, lazy_count_ = 0;
  std::shared_ptr<const Metric> metric_;
};

/// Value of a field at one point.
inline double evaluate(const Field& f, const std::vector<std::string>& inputs, std::span<const double> x) {
  return FieldEvaluator({f}, inputs)(x).front().value;
}

}  // namespace morphlab
