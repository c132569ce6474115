#pragma once

// Finite-difference oracle for the Laplace-Beltrami operator and its square.
//
// Only point evaluation is used here, never the symbolic derivative, so a
// disagreement with the symbolic path points at one of the two.
//
// Stencils are 4th-order central differences. Operators are assembled in
// divergence form (1/s) d_i(s g^ij d_j f), s = sqrt det g, by nesting first
// derivative stencils; flat metrics use the pure second-derivative stencil.
// Each operator value is Richardson-extrapolated from steps h and h/2.

#include "morphlab/geometry.hpp"
#include "morphlab/parallel.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphlab {

class StencilError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleValue {
  double value = 0.0;
  double error = 0.0;  // truncation estimate plus rounding estimate
};

namespace detail {

// A value together with the sum of magnitudes that went into it; the latter
// bounds accumulated rounding.
struct Acc {
  double value = 0.0;
  double absum = 0.0;
};

struct Stencil {
  int order;
  std::vector<int> offsets;
  std::vector<double> weights;  // already divided by the proper power of h = 1
};

inline const Stencil& stencil(int order) {
  static const std::array<Stencil, 4> table = {
      Stencil{1, {-2, -1, 1, 2}, {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12}},
      Stencil{2, {-2, -1, 0, 1, 2}, {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12}},
      Stencil{3, {-3, -2, -1, 1, 2, 3}, {1.0 / 8, -1.0, 13.0 / 8, -13.0 / 8, 1.0, -1.0 / 8}},
      Stencil{4, {-3, -2, -1, 0, 1, 2, 3}, {-1.0 / 6, 2.0, -13.0 / 2, 28.0 / 3, -13.0 / 2, 2.0, -1.0 / 6}},
  };
  if (order < 1 || order > 4) throw std::invalid_argument("stencil order must be 1..4");
  return table[static_cast<std::size_t>(order - 1)];
}

using PointFn = std::function<Acc(const Point&)>;

// Applies the order-k stencil along `axis` to fn.
inline Acc apply(const PointFn& fn, const Point& x, std::size_t axis, int order, double h) {
  const Stencil& s = stencil(order);
  const double scale = 1.0 / std::pow(h, order);
  Acc out;
  Point y = x;
  for (std::size_t k = 0; k < s.offsets.size(); ++k) {
    y[axis] = x[axis] + s.offsets[k] * h;
    Acc a = fn(y);
    out.value += s.weights[k] * a.value;
    out.absum += std::abs(s.weights[k]) * a.absum;
  }
  out.value *= scale;
  out.absum *= scale;
  return out;
}

inline PointFn expr_fn(const Expr& f, const std::vector<std::string>& inputs) {
  auto ev = std::make_shared<Evaluator>(std::vector<Expr>{f}, inputs);
  return [ev](const Point& x) {
    try {
      const double v = ev->evaluate_one(x);
      return Acc{v, std::abs(v)};
    } catch (const DomainError& e) {
      throw StencilError(std::string("stencil left the valid domain: ") + e.what());
    }
  };
}

/// Metric data for the divergence form, evaluated without differentiation.
class MetricPointData {
 public:
  explicit MetricPointData(const Metric& g) : m_(g.dim()), flat_(g.is_euclidean()) {
    std::vector<Expr> roots{g.sqrt_det()};
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j) roots.push_back(g.inv(i, j));
    ev_ = std::make_shared<Evaluator>(roots, g.chart().names());
  }
  bool flat() const { return flat_; }
  std::size_t dim() const { return m_; }
  std::vector<double> at(const Point& x) const {
    try {
      return (*ev_)(x);
    } catch (const DomainError& e) {
      throw StencilError(std::string("stencil left the metric's domain: ") + e.what());
    }
  }

 private:
  std::size_t m_;
  bool flat_;
  std::shared_ptr<const Evaluator> ev_;
};

inline PointFn laplace_fn(const MetricPointData& md, PointFn f, double h) {
  const std::size_t m = md.dim();
  if (md.flat()) {
    return [f, h, m](const Point& x) {
      Acc out;
      for (std::size_t i = 0; i < m; ++i) {
        Acc a = apply(f, x, i, 2, h);
        out.value += a.value;
        out.absum += a.absum;
      }
      return out;
    };
  }
  return [&md, f, h, m](const Point& x) {
    Acc out;
    for (std::size_t i = 0; i < m; ++i) {
      // flux_i(y) = s(y) g^ij(y) d_j f(y)
      PointFn flux = [&md, &f, h, m, i](const Point& y) {
        std::vector<double> gd = md.at(y);
        Acc acc;
        for (std::size_t j = 0; j < m; ++j) {
          const double c = gd[0] * gd[1 + i * m + j];
          if (c == 0.0) continue;
          Acc dj = apply(f, y, j, 1, h);
          acc.value += c * dj.value;
          acc.absum += std::abs(c) * dj.absum;
        }
        return acc;
      };
      Acc a = apply(flux, x, i, 1, h);
      out.value += a.value;
      out.absum += a.absum;
    }
    const double s = md.at(x)[0];
    return Acc{out.value / s, out.absum / s};
  };
}

inline OracleValue richardson(const std::function<Acc(double)>& at_step, double h) {
  const Acc coarse = at_step(h);
  const Acc fine = at_step(h / 2);
  const double diff = fine.value - coarse.value;
  OracleValue r;
  r.value = fine.value + diff / 15.0;
  r.error = std::abs(diff) / 15.0 + 2.0 * std::numeric_limits<double>::epsilon() * fine.absum;
  return r;
}

}  // namespace detail

inline constexpr double kDefaultLaplaceStep = 1e-2;
inline constexpr double kDefaultBilaplaceStep = 3e-2;

/// Partial derivative of f along the listed axes (at most 4 entries, repeats
/// allowed), one 4th-order stencil per distinct axis. No extrapolation.
inline double fd_partial(const std::function<double(const Point&)>& f, const Point& x,
                         const std::vector<std::size_t>& axes, double h) {
  if (axes.size() > 4) throw std::invalid_argument("fd_partial supports order up to 4");
  std::vector<std::pair<std::size_t, int>> plan;
  for (auto a : axes) {
    if (a >= x.size()) throw std::invalid_argument("fd_partial axis out of range");
    auto it = std::find_if(plan.begin(), plan.end(), [a](const auto& p) { return p.first == a; });
    if (it == plan.end())
      plan.emplace_back(a, 1);
    else
      ++it->second;
  }
  detail::PointFn fn = [&f](const Point& y) {
    const double v = f(y);
    return detail::Acc{v, std::abs(v)};
  };
  for (const auto& [axis, order] : plan) {
    detail::PointFn inner = fn;
    fn = [inner, axis = axis, order = order, h](const Point& y) { return detail::apply(inner, y, axis, order, h); };
  }
  return fn(x).value;
}

inline double fd_partial(const Expr& f, const std::vector<std::string>& inputs, const Point& x,
                         const std::vector<std::size_t>& axes, double h) {
  auto fn = detail::expr_fn(f, inputs);
  return fd_partial([&fn](const Point& y) { return fn(y).value; }, x, axes, h);
}

inline OracleValue fd_laplace(const Metric& g, const Expr& f, const Point& x, double h = kDefaultLaplaceStep) {
  detail::MetricPointData md(g);
  auto fn = detail::expr_fn(f, g.chart().names());
  return detail::richardson([&](double step) { return detail::laplace_fn(md, fn, step)(x); }, h);
}

inline OracleValue fd_bilaplace(const Metric& g, const Expr& f, const Point& x,
                                double h = kDefaultBilaplaceStep) {
  detail::MetricPointData md(g);
  auto fn = detail::expr_fn(f, g.chart().names());
  return detail::richardson(
      [&](double step) {
        auto inner = detail::laplace_fn(md, fn, step);
        return detail::laplace_fn(md, inner, step)(x);
      },
      h);
}

enum class Operator { Laplace, Bilaplace };

struct CrosscheckPoint {
  Point x;
  double symbolic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
  bool agree = false;
};

struct CrosscheckReport {
  bool agree = true;
  bool inconclusive = false;        // some oracle error estimate exceeded tol
  bool relied_on_estimate = false;  // some point agreed only through an estimate above tol
  std::size_t worst = 0;      // index of the largest |symbolic - numeric|
  double max_deviation = 0.0;
  std::vector<CrosscheckPoint> points;
};

/// Compares a symbolic operator value against the oracle at each point. A
/// point agrees iff |symbolic - numeric| <= max(tol, error estimate).
inline CrosscheckReport crosscheck(const Field& symbolic, const Metric& g, const Expr& f, Operator op,
                                   const std::vector<Point>& points, double tol = 1e-5, double h = 0.0) {
  if (h <= 0.0) h = op == Operator::Laplace ? kDefaultLaplaceStep : kDefaultBilaplaceStep;
  FieldEvaluator sym({symbolic}, g.chart().names());
  CrosscheckReport r;
  r.points.resize(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    CrosscheckPoint& p = r.points[k];
    p.x = points[k];
    p.symbolic = sym(p.x).front().value;
    OracleValue o = op == Operator::Laplace ? fd_laplace(g, f, p.x, h) : fd_bilaplace(g, f, p.x, h);
    p.numeric = o.value;
    p.error = o.error;
    p.agree = std::abs(p.symbolic - p.numeric) <= std::max(tol, p.error);
  });
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    const auto& p = r.points[k];
    const double d = std::abs(p.symbolic - p.numeric);
    if (k == 0 || d > r.max_deviation) {
      r.max_deviation = d;
      r.worst = k;
    }
    r.agree = r.agree && p.agree;
    r.inconclusive = r.inconclusive || p.error > tol;
    r.relied_on_estimate = r.relied_on_estimate || (p.agree && std::abs(p.symbolic - p.numeric) > tol);
  }
  return r;
}

/// Least-squares slope of ln|value| against ln(radius).
inline double loglog_slope(const std::vector<double>& radii, const std::vector<double>& values) {
  if (radii.size() != values.size() || radii.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double a = std::log(radii[i]);
    const double b = std::log(std::abs(values[i]));
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace morphlab
