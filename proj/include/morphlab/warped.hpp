#pragma once

// Projections (x, y, z) -> (x, y) from the warped product
// dx^2 + dy^2 + beta(x,y)^-2 dz^2.
//
// With u = (ln beta)_x and v = (ln beta)_y the projection is a generalized
// harmonic morphism iff
//
//   (1) u_xx + u_yy - u u_x - v u_y = 0      (= lap u)
//   (2) v_xx + v_yy - u v_x - v v_y = 0      (= lap v)
//   (3) u^2 - 2 u_x - v^2 + 2 v_y   = 0      (= lap^2(x^2 - y^2) / 2 once (1), (2) hold)
//   (4) u v - u_y - v_x             = 0      (= lap^2(xy) / 2 once (1), (2) hold)
//
// and the solutions are beta = C (x + C1 y + C2)^-2 or C (C1 x + y + C2)^-2.
// Each equation is evaluated from the u, v formula and again through the
// operators on the 3-dimensional metric.

#include "morphlab/morphism.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphlab {

enum class FamilyKind { SpX, SpY, S1, S2 };

inline const char* family_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::SpX: return "Sp-x";
    case FamilyKind::SpY: return "Sp-y";
    case FamilyKind::S1: return "S1";
    case FamilyKind::S2: return "S2";
  }
  return "?";
}

inline std::optional<FamilyKind> parse_family(const std::string& s) {
  std::string k;
  for (char c : s) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "sp-x" || k == "spx") return FamilyKind::SpX;
  if (k == "sp-y" || k == "spy") return FamilyKind::SpY;
  if (k == "s1") return FamilyKind::S1;
  if (k == "s2") return FamilyKind::S2;
  return std::nullopt;
}

struct WarpedSpec {
  Expr beta;
  Chart chart = warped_chart();

  Expr u() const { return simplify(diff(ln(beta), chart.names()[0])).expr; }
  Expr v() const { return simplify(diff(ln(beta), chart.names()[1])).expr; }
  Metric metric() const { return metric_warped(beta, chart); }
};

namespace detail {

/// A unit box near (1, 1) on which |a x + b y + c| >= 1, or failing that the
/// candidate maximizing its minimum (which must be at least 0.1).
inline std::vector<Interval> box_avoiding_line(double a, double b, double c) {
  struct Cand {
    double cx, cy, dist;
  };
  std::vector<Cand> cands;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j) {
      const double cx = 1.0 + 0.5 * i, cy = 1.0 + 0.5 * j;
      cands.push_back({cx, cy, std::hypot(cx - 1.0, cy - 1.0)});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& p, const Cand& q) { return p.dist < q.dist; });
  auto score = [&](const Cand& k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double dx : {-0.5, 0.5})
      for (double dy : {-0.5, 0.5}) {
        const double L = a * (k.cx + dx) + b * (k.cy + dy) + c;
        lo = std::min(lo, L);
        hi = std::max(hi, L);
      }
    if (lo <= 0.0 && hi >= 0.0) return -1.0;
    return std::min(std::abs(lo), std::abs(hi));
  };
  const Cand* best = nullptr;
  double best_score = -1.0;
  for (const auto& k : cands) {
    const double s = score(k);
    if (s >= 1.0) {
      best = &k;
      break;
    }
    if (s > best_score) {
      best_score = s;
      best = &k;
    }
  }
  if (!best || score(*best) < 0.1) throw std::domain_error("no sampling box keeps clear of the singular line");
  return {{best->cx - 0.5, best->cx + 0.5}, {best->cy - 0.5, best->cy + 0.5}, {0.0, 1.0}};
}

inline Rational exact(double d) { return Rational(d); }

}  // namespace detail

/// Closed-form warping functions:
///   Sp-x  C (x + C2)^-2         Sp-y  C (y + C2)^-2
///   S1    C (C1 x + y + C2)^-2  S2    C (x + C1 y + C2)^-2
/// The sampling box is placed clear of the line where the bracket vanishes.
inline WarpedSpec family(FamilyKind kind, double C, double C1, double C2) {
  if (!(C > 0.0)) throw std::invalid_argument("family constant C must be positive");
  double a = 0, b = 0;
  switch (kind) {
    case FamilyKind::SpX: a = 1, b = 0; break;
    case FamilyKind::SpY: a = 0, b = 1; break;
    case FamilyKind::S1: a = C1, b = 1; break;
    case FamilyKind::S2: a = 1, b = C1; break;
  }
  const Expr x = variable("x"), y = variable("y");
  const Expr L = add({constant(detail::exact(a)) * x, constant(detail::exact(b)) * y, constant(detail::exact(C2))});
  WarpedSpec w;
  w.beta = constant(detail::exact(C)) * pow(L, -2);
  w.chart = warped_chart(detail::box_avoiding_line(a, b, C2));
  return w;
}

enum class WPVerdict { GHM, BiharmonicOnly, Neither };

inline const char* wp_verdict_name(WPVerdict v) {
  switch (v) {
    case WPVerdict::GHM: return "GHM";
    case WPVerdict::BiharmonicOnly: return "BiharmonicOnly";
    case WPVerdict::Neither: return "Neither";
  }
  return "?";
}

struct WPEquation {
  ResidualSummary printed;         // from the u, v formula
  std::vector<double> geometric;   // operator value on the warped metric, rescaled to the printed form
  double max_path_deviation = 0.0; // relative
  bool paths_agree = true;
  bool sign_flipped = false;       // geometric consistently the negative of printed
};

struct TemplateFit {
  std::string name;  // "S2", "S1", "Sp-x", "Sp-y"
  double C = 0, C1 = 0, C2 = 0;
};

struct FamilyFit {
  bool degenerate = false;  // beta constant: the Sp/constant boundary, or too few points
  std::string template_name;  // best template, "constant" or "none"
  double C = 0, C1 = 0, C2 = 0;
  double residual = 0.0;  // max |w_fit - w| / max |w| with w = beta^(-1/2)
  std::optional<TemplateFit> alternative;  // the other template, when it also fits
  std::string note;
};

struct TensionResult {
  std::vector<std::array<double, 2>> values;  // (-u, -v) per sample
  bool proper = false;
};

struct WPReport {
  std::string beta;
  std::uint64_t seed = 0;
  std::vector<Point> points;
  std::array<WPEquation, 4> equations;
  double mixed_partial_deviation = 0.0;  // max |u_y - v_x|
  TensionResult tension;
  WPVerdict verdict = WPVerdict::Neither;
  std::optional<FamilyFit> fit;
  bool paths_agree = true;
  std::vector<std::string> notes;
};

inline TensionResult tension(const WarpedSpec& w, const std::vector<Point>& points, double tol = 1e-9) {
  Evaluator ev({w.u(), w.v()}, w.chart.names());
  TensionResult t;
  for (const auto& p : points) {
    auto uv = ev(p);
    t.values.push_back({-uv[0], -uv[1]});
    if (std::hypot(uv[0], uv[1]) > tol) t.proper = true;
  }
  return t;
}

/// The four equations in u = (ln beta)_x, v = (ln beta)_y, each zero for the
/// respective condition: lap u, lap v, lap^2(x^2 - y^2)/2, lap^2(xy)/2.
inline std::array<Expr, 4> wp_equations(const WarpedSpec& w) {
  const std::string X = w.chart.names()[0], Y = w.chart.names()[1];
  const Expr u = w.u(), v = w.v();
  const Expr ux = diff(u, X), uy = diff(u, Y), vx = diff(v, X), vy = diff(v, Y);
  const Expr uxx = diff(ux, X), uyy = diff(uy, Y), vxx = diff(vx, X), vyy = diff(vy, Y);
  return {add({uxx, uyy, neg(u * ux), neg(v * uy)}), add({vxx, vyy, neg(u * vx), neg(v * vy)}),
          add({u * u, -2 * ux, neg(v * v), 2 * vy}), add({u * v, neg(uy), neg(vx)})};
}

inline WPReport wp_residuals(const WarpedSpec& w, const CheckOptions& opt = {}) {
  const Metric g = w.metric();
  const auto& names = w.chart.names();
  const std::string X = names[0], Y = names[1];
  WPReport r;
  r.beta = to_string(w.beta);
  r.seed = opt.seed;
  r.points = sample_points(w.chart, opt.samples, opt.seed).points;
  const Expr u = w.u(), v = w.v();
  const Expr uy = diff(u, Y), vx = diff(v, X);
  std::vector<Field> printed;
  for (const auto& e : wp_equations(w)) printed.emplace_back(e);
  const std::vector<std::string> labels{"eq1 (lap u)", "eq2 (lap v)", "eq3 (lap^2(x^2-y^2)/2)", "eq4 (lap^2(xy)/2)"};
  ConditionEntry entry = detail::decide("WP", labels, printed, g, r.points, opt);

  const Expr x = variable(X), y = variable(Y);
  // For any beta, lap^2(x^2 - y^2) = 2 eq3 - 2x lap u + 2y lap v and
  // lap^2(xy) = 2 eq4 - x lap v - y lap u; the correction vanishes where (1), (2) hold.
  const Expr lap_u = laplace_beltrami(g, u), lap_v = laplace_beltrami(g, v);
  std::vector<Field> geometric{
      Field(lap_u),
      Field(lap_v),
      constant(1, 2) * bilaplacian(g, x * x - y * y, nullptr, opt.swell_cap) + Field(x * lap_u - y * lap_v),
      constant(1, 2) * bilaplacian(g, x * y, nullptr, opt.swell_cap) + Field(constant(1, 2) * (x * lap_v + y * lap_u)),
  };
  auto gv = detail::sample_fields(geometric, g, r.points);
  for (std::size_t i = 0; i < 4; ++i) {
    WPEquation& eq = r.equations[i];
    eq.printed = entry.residuals[i];
    std::size_t flips = 0, nonzero = 0;
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      const double a = eq.printed.values[k];
      const double b = gv[i][k].value;
      eq.geometric.push_back(b);
      const double d = std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
      eq.max_path_deviation = std::max(eq.max_path_deviation, d);
      if (std::abs(a) > 1e-6) {
        ++nonzero;
        if (std::abs(a + b) <= 1e-7 * std::max(1.0, std::abs(a))) ++flips;
      }
    }
    eq.paths_agree = eq.max_path_deviation < 1e-7;
    eq.sign_flipped = nonzero > 0 && flips == nonzero;
    if (eq.sign_flipped) r.notes.push_back(labels[i] + ": operator path is the negative of the formula");
    r.paths_agree = r.paths_agree && eq.paths_agree;
  }
  {
    Evaluator mixed({uy - vx}, names);
    for (const auto& p : r.points) r.mixed_partial_deviation = std::max(r.mixed_partial_deviation, std::abs(mixed.evaluate_one(p)));
  }
  r.tension = tension(w, r.points, opt.tol_abs);
  const bool e12 = r.equations[0].printed.pass && r.equations[1].printed.pass;
  const bool e34 = r.equations[2].printed.pass && r.equations[3].printed.pass;
  r.verdict = e12 && e34 ? WPVerdict::GHM : e12 ? WPVerdict::BiharmonicOnly : WPVerdict::Neither;
  if (entry.inconclusive) r.notes.push_back("inconclusive at tol");
  return r;
}

/// Fits beta^(-1/2) = a x + b y + c by least squares over the sample points
/// and reads off the family constants.
inline FamilyFit fit_family(const WarpedSpec& w, const std::vector<Point>& points) {
  Evaluator ev({w.beta}, w.chart.names());
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& p = points[static_cast<std::size_t>(k)];
    A(k, 0) = p[0];
    A(k, 1) = p[1];
    A(k, 2) = 1.0;
    rhs(k) = std::exp(-0.5 * std::log(ev.evaluate_one(p)));
  }
  FamilyFit f;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) {
    f.degenerate = true;
    f.template_name = "none";
    f.note = "sample points do not determine a plane fit";
    return f;
  }
  const Eigen::Vector3d coef = qr.solve(rhs);
  f.residual = (A * coef - rhs).cwiseAbs().maxCoeff() / std::max(1e-300, rhs.cwiseAbs().maxCoeff());
  const double a = coef(0), b = coef(1), c = coef(2);
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  const double eps = 1e-9 * scale;
  if (std::abs(a) <= eps && std::abs(b) <= eps) {
    f.degenerate = true;
    f.template_name = "constant";
    f.C = 1.0 / (c * c);
    f.note = "beta is constant: boundary of the Sp families (C1 undetermined)";
    return f;
  }
  if (std::abs(a) > eps) {
    f.C = 1.0 / (a * a);
    f.C1 = std::abs(b) <= eps ? 0.0 : b / a;
    f.C2 = std::abs(c) <= eps ? 0.0 : c / a;
    f.template_name = f.C1 == 0.0 ? "Sp-x" : "S2";
    if (std::abs(b) > eps) f.alternative = TemplateFit{"S1", 1.0 / (b * b), a / b, std::abs(c) <= eps ? 0.0 : c / b};
  } else {
    f.C = 1.0 / (b * b);
    f.C1 = 0.0;
    f.C2 = std::abs(c) <= eps ? 0.0 : c / b;
    f.template_name = "Sp-y";
  }
  return f;
}

/// wp_residuals, then a family fit when the verdict is GHM.
inline WPReport classify_beta(const WarpedSpec& w, const CheckOptions& opt = {}) {
  WPReport r = wp_residuals(w, opt);
  if (r.verdict == WPVerdict::GHM) {
    r.fit = fit_family(w, r.points);
    if (!r.fit->degenerate && r.fit->residual > 1e-8)
      r.notes.push_back("GHM verdict but no family template fits (residual " + std::to_string(r.fit->residual) + ")");
  }
  return r;
}

struct SquareWitness {
  CheckReport report;
  bool hwc = false;
  bool lambda_matches = false;  // lambda^2 = 4 (x^2 + y^2)
  bool biharmonic = false;
  bool harmonic = false;
};

/// Classifies (x^2 - y^2, 2xy) from the warped product. Requires the
/// projection to be a generalized harmonic morphism.
inline SquareWitness square_map_ghm_witness(const WarpedSpec& w, const CheckOptions& opt = {}) {
  WPReport wp = wp_residuals(w, opt);
  if (wp.verdict != WPVerdict::GHM)
    throw PreconditionError(std::string("projection is not a generalized harmonic morphism (verdict ") +
                            wp_verdict_name(wp.verdict) + ")");
  std::set<std::string> names{w.chart.names().begin(), w.chart.names().end()};
  const std::string X = w.chart.names()[0], Y = w.chart.names()[1];
  SmoothMap m("warped-square", w.metric(),
              {parse(X + "^2 - " + Y + "^2", names), parse("2*" + X + "*" + Y, names)});
  MapAnalysis an(m, opt.swell_cap);
  SquareWitness s;
  s.report = classify(an, opt);
  s.hwc = s.report.condition("HWC").pass;
  s.biharmonic = s.report.condition("Bi").pass;
  s.harmonic = s.report.condition("Harm").pass;
  if (s.hwc) {
    Evaluator ev({parse("4*(" + X + "^2 + " + Y + "^2)", names)}, w.chart.names());
    double worst = 0.0;
    for (std::size_t k = 0; k < s.report.points.size(); ++k) {
      const double want = ev.evaluate_one(s.report.points[k]);
      worst = std::max(worst, std::abs(s.report.dilation_squared[k] - want) / std::max(1.0, want));
    }
    s.lambda_matches = worst < 1e-9;
  }
  return s;
}

}  // namespace morphlab
