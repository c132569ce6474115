#include "morphlab/geometry.hpp"
#include "morphlab/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace morphlab;

namespace {

Chart ex1_chart() {
  Chart c = Chart::cartesian(4).with_box({{0.5, 2}, {0.5, 2}, {0.5, 2}, {-2, 2}});
  return c.with_avoid({parse("x1^2 + x2^2 + x3^2", std::set<std::string>{"x1", "x2", "x3", "x4"})});
}

Expr P(const Chart& c, const std::string& s) { return parse(s, c.scope()); }

double at(const Expr& e, const Chart& c, const Point& x) { return Evaluator({e}, c.names()).evaluate_one(x); }

}  // namespace

TEST(Chart, Validation) {
  EXPECT_THROW(Chart({}, {}), std::invalid_argument);
  EXPECT_THROW(Chart({"x", "x"}, {{0, 1}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(Chart({"x"}, {{1, 1}}), std::invalid_argument);
  EXPECT_THROW(Chart({"x"}, {{0, 1}, {0, 1}}), std::invalid_argument);
}

TEST(Chart, SamplingAvoidsSingularSetAndBoundary) {
  Chart c = Chart({"x", "y"}, {{-1, 1}, {-1, 1}}).with_avoid({parse("x^2 + y^2 - 1/4", std::set<std::string>{"x", "y"})});
  auto s = sample_points(c, 64, 5);
  ASSERT_EQ(s.points.size(), 64u);
  for (const auto& p : s.points) {
    EXPECT_GE(p[0] * p[0] + p[1] * p[1] - 0.25, 1e-3);
    EXPECT_GT(std::abs(p[0]), -1 + 1e-3);
    EXPECT_LT(std::abs(p[0]), 1 - 1e-3);
  }
}

TEST(Chart, SamplingIsSeeded) {
  Chart c = Chart::cartesian(3);
  EXPECT_EQ(sample_points(c, 10, 42).points, sample_points(c, 10, 42).points);
  EXPECT_NE(sample_points(c, 10, 42).points, sample_points(c, 10, 43).points);
}

TEST(Metric, EuclideanIsIdentity) {
  Metric g = metric_euclidean(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      ASSERT_EQ(g.g(i, j).op(), Op::Const);
      EXPECT_EQ(g.g(i, j).value(), i == j ? 1 : 0);
    }
  EXPECT_TRUE(g.is_euclidean());
}

TEST(Metric, WarpedWithUnitBetaIsEuclidean) {
  Metric g = metric_warped(constant(1));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(at(g.g(i, j), g.chart(), {1, 1, 0.5}), i == j ? 1.0 : 0.0);
}

TEST(Metric, WarpedEntry) {
  Chart c = warped_chart();
  Metric g = metric_warped(P(c, "(x + y)^(-2)"));
  for (const auto& p : sample_points(c, 16, 3).points) {
    const double s = p[0] + p[1];
    EXPECT_NEAR(at(g.g(2, 2), c, p), std::pow(s, 4), 1e-12 * std::pow(s, 4));
    EXPECT_NEAR(at(grad_inner(g, P(c, "z"), P(c, "z")), c, p), std::pow(s, -4), 1e-14);
  }
}

TEST(Metric, RejectsNonPositiveEntries) {
  Chart c = Chart::cartesian(2);
  EXPECT_THROW(metric_diagonal(c, {constant(1), P(c, "x1")}), std::domain_error);
  EXPECT_THROW(metric_warped(P(warped_chart(), "x - 1")), std::domain_error);
  EXPECT_THROW(metric_warped(P(warped_chart(), "z + 1")), std::invalid_argument);
}

TEST(Metric, DenseInverse) {
  Chart c = Chart({"x", "y"}, {{0.5, 1.5}, {0.5, 1.5}});
  Metric g = Metric::from_matrix(c, {{P(c, "2 + x^2"), P(c, "x*y")}, {P(c, "x*y"), P(c, "1 + y^2")}});
  g.validate();
  for (const auto& p : sample_points(c, 8, 1).points) {
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 2; ++k) s += at(g.g(i, k), c, p) * at(g.inv(k, j), c, p);
        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
      }
    EXPECT_NEAR(at(g.det(), c, p), (2 + p[0] * p[0]) * (1 + p[1] * p[1]) - p[0] * p[0] * p[1] * p[1], 1e-12);
  }
}

TEST(Metric, BlockInverseAboveFour) {
  Chart c = Chart::cartesian(6, 0.5, 1.5);
  std::vector<std::vector<Expr>> rows(6, std::vector<Expr>(6, constant(0)));
  for (std::size_t i = 0; i < 6; ++i) rows[i][i] = P(c, "2 + x" + std::to_string(i + 1) + "^2");
  rows[0][5] = rows[5][0] = P(c, "x1/2");
  Metric g = Metric::from_matrix(c, rows);
  g.validate();
}

TEST(GradInner, Ex1Conformality) {
  Chart c = ex1_chart();
  Metric g = metric_euclidean(c);
  Expr r = P(c, "sqrt(x1^2 + x2^2 + x3^2)"), x4 = P(c, "x4");
  for (const auto& p : sample_points(c, 32, 42).points) {
    EXPECT_NEAR(at(grad_inner(g, r, x4), c, p), 0.0, 1e-12);
    EXPECT_NEAR(at(grad_inner(g, r, r), c, p), 1.0, 1e-12);
    EXPECT_NEAR(at(grad_inner(g, x4, x4), c, p), 1.0, 1e-12);
  }
}

TEST(Laplace, Ex1Values) {
  Chart c = ex1_chart();
  Metric g = metric_euclidean(c);
  EXPECT_NEAR(at(laplace_beltrami(g, P(c, "sqrt(x1^2 + x2^2 + x3^2)")), c, {3, 4, 0, 5}), 0.4, 1e-15);
  EXPECT_TRUE(simplify(laplace_beltrami(g, P(c, "x4"))).expr.is_zero());
}

TEST(Laplace, WarpedCoordinate) {
  Chart c = warped_chart();
  Metric g = metric_warped(P(c, "(x + y)^(-2)"));
  Expr lx = laplace_beltrami(g, P(c, "x"));
  for (const auto& p : sample_points(c, 16, 9).points) {
    EXPECT_NEAR(at(lx, c, p), 2 / (p[0] + p[1]), 1e-13);
    EXPECT_NEAR(fd_laplace(g, P(c, "x"), p).value, 2 / (p[0] + p[1]), 1e-8);
  }
}

TEST(Laplace, EuclideanEqualsSecondPartialSum) {
  Chart c = Chart::cartesian(3, 0.5, 1.5);
  Metric g = metric_euclidean(c);
  Expr f = P(c, "exp(x1*x2)*ln(x3) + x1^3/x2");
  Expr raw = add({diff(f, std::vector<std::string>{"x1", "x1"}), diff(f, std::vector<std::string>{"x2", "x2"}), diff(f, std::vector<std::string>{"x3", "x3"})});
  Expr lap = laplace_beltrami(g, f);
  for (const auto& p : sample_points(c, 16, 4).points) {
    const double a = at(lap, c, p), b = at(raw, c, p);
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST(Laplace, LinearityAndProductRule) {
  Chart c = Chart({"x", "y", "z"}, {{0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}});
  Metric g = metric_diagonal(c, {P(c, "1 + x^2"), P(c, "exp(y)"), P(c, "(x + z)^2")});
  Expr f = P(c, "x*y^2 + sin(z)"), h = P(c, "exp(x - y)*z");
  Expr a = constant(5, 2);
  Expr lin = laplace_beltrami(g, a * f + h);
  Expr prod = laplace_beltrami(g, f * h);
  Expr lf = laplace_beltrami(g, f), lh = laplace_beltrami(g, h), gi = grad_inner(g, f, h);
  for (const auto& p : sample_points(c, 16, 8).points) {
    const double want_lin = 2.5 * at(lf, c, p) + at(lh, c, p);
    EXPECT_NEAR(at(lin, c, p), want_lin, 1e-9 * std::max(1.0, std::abs(want_lin)));
    const double want_prod = at(f, c, p) * at(lh, c, p) + at(h, c, p) * at(lf, c, p) + 2 * at(gi, c, p);
    EXPECT_NEAR(at(prod, c, p), want_prod, 1e-9 * std::max(1.0, std::abs(want_prod)));
  }
}

TEST(Laplace, AgreesWithOracleOnCurvedMetric) {
  Chart c = Chart({"x", "y"}, {{0.5, 1.5}, {0.5, 1.5}});
  Metric g = Metric::from_matrix(c, {{P(c, "2 + x^2"), P(c, "x*y/2")}, {P(c, "x*y/2"), P(c, "1 + y^2")}});
  Expr f = P(c, "exp(x)*y^3");
  Expr lap = laplace_beltrami(g, f);
  for (const auto& p : sample_points(c, 16, 2).points) {
    const double want = fd_laplace(g, f, p).value;
    EXPECT_NEAR(at(lap, c, p), want, 1e-6 * std::max(1.0, std::abs(want)));
  }
}

TEST(Bilaplacian, Ex1Values) {
  Chart c = ex1_chart();
  Metric g = metric_euclidean(c);
  Field b1 = bilaplacian(g, P(c, "sqrt(x1^2 + x2^2 + x3^2)"));
  Field b2 = bilaplacian(g, P(c, "2*x4*sqrt(x1^2 + x2^2 + x3^2)"));
  for (const auto& p : sample_points(c, 32, 42).points) {
    EXPECT_NEAR(evaluate(b1, c.names(), p), 0.0, 1e-12);
    EXPECT_NEAR(evaluate(b2, c.names(), p), 0.0, 1e-11);
  }
}

TEST(Bilaplacian, QuarticIsConstant) {
  Metric g = metric_euclidean(2);
  Field b = bilaplacian(g, P(g.chart(), "x1^4"));
  ASSERT_TRUE(b.is_symbolic());
  EXPECT_EQ(simplify(b.expr()).expr.value(), 24);
}

TEST(Bilaplacian, LazyFormMatchesFlattened) {
  Chart c = Chart({"x", "y", "z"}, {{0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}});
  Metric g = metric_diagonal(c, {P(c, "1 + x^2"), P(c, "exp(y)"), P(c, "(x + z)^2")});
  Expr f = P(c, "x*y^2*sin(z)");
  Field flat = bilaplacian(g, f);
  Field lazy = bilaplacian(g, f, nullptr, 10);
  EXPECT_TRUE(flat.is_symbolic());
  EXPECT_FALSE(lazy.is_symbolic());
  for (const auto& p : sample_points(c, 16, 6).points) {
    const double a = evaluate(flat, c.names(), p), b = evaluate(lazy, c.names(), p);
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a)));
    const double o = fd_bilaplace(g, f, p).value;
    EXPECT_NEAR(a, o, 1e-6 * std::max(1.0, std::abs(a)));
  }
}
