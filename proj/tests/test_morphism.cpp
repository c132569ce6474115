#include "morphlab/constructions.hpp"
#include "morphlab/morphism.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace morphlab;

namespace {

SmoothMap flat_map(std::string name, std::size_t dim, double lo, double hi, const std::vector<std::string>& comps,
                   std::optional<std::string> avoid = std::nullopt) {
  Chart c = Chart::cartesian(dim, lo, hi);
  if (avoid) c = c.with_avoid({parse(*avoid, c.scope())});
  std::vector<Expr> e;
  for (const auto& s : comps) e.push_back(parse(s, c.scope()));
  return SmoothMap(std::move(name), metric_euclidean(c), std::move(e));
}

const SmoothMap& ex1() { return catalog_lookup("ex1").map; }
const SmoothMap& bfo() { return catalog_lookup("bfo").map; }

std::vector<Point> samples(const SmoothMap& m, std::size_t n = 16, std::uint64_t seed = 42) {
  return sample_points(m.chart(), n, seed).points;
}

CheckOptions quick() {
  CheckOptions o;
  o.oracle_points = 0;
  return o;
}

}  // namespace

TEST(Verdict, Lattice) {
  EXPECT_EQ(verdict_from_flags(true, true, true, true), Verdict::HarmonicMorphism);
  EXPECT_EQ(verdict_from_flags(true, true, true, false), Verdict::ProperGHM);
  EXPECT_EQ(verdict_from_flags(true, true, false, false), Verdict::BiharmonicHWC_notGHM);
  EXPECT_EQ(verdict_from_flags(false, true, true, false), Verdict::BiharmonicOnly);
  EXPECT_EQ(verdict_from_flags(true, false, false, false), Verdict::HWCOnly);
  EXPECT_EQ(verdict_from_flags(false, false, true, false), Verdict::None);
  EXPECT_EQ(parse_verdict("propergHM"), Verdict::ProperGHM);
  EXPECT_FALSE(parse_verdict("ghm"));
}

TEST(SmoothMapTest, RejectsForeignNames) {
  Chart c = Chart::cartesian(2);
  EXPECT_THROW(SmoothMap("m", metric_euclidean(c), {parameter("a")}), std::invalid_argument);
  EXPECT_THROW(SmoothMap("m", metric_euclidean(c), {}), std::invalid_argument);
}

TEST(CheckHwc, Ex1IsSubmersion) {
  MapAnalysis an(ex1());
  std::vector<double> lam2;
  auto e = check_hwc(an, samples(ex1(), 32), quick(), &lam2);
  EXPECT_TRUE(e.pass);
  ASSERT_EQ(lam2.size(), 32u);
  for (double v : lam2) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(CheckHwc, Ex2Dilation) {
  const SmoothMap& m = catalog_lookup("ex2").map;
  MapAnalysis an(m);
  auto pts = samples(m);
  std::vector<double> lam2;
  EXPECT_TRUE(check_hwc(an, pts, quick(), &lam2).pass);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double r2 = 0;
    for (double x : pts[k]) r2 += x * x;
    EXPECT_NEAR(lam2[k], 1 / (r2 * r2), 1e-9 / (r2 * r2));
  }
}

TEST(CheckHwc, AnisotropicScalingFails) {
  SmoothMap m = flat_map("scale", 2, -2, 2, {"x1", "2*x2"});
  MapAnalysis an(m);
  auto e = check_hwc(an, samples(m), quick(), nullptr);
  EXPECT_FALSE(e.pass);
  double worst = 0;
  for (const auto& r : e.residuals) worst = std::max(worst, r.max_abs);
  EXPECT_NEAR(worst, 3.0, 1e-12);
}

TEST(CheckBiharmonic, Ex1IsProperlyBiharmonic) {
  MapAnalysis an(ex1());
  ConditionEntry harm;
  EXPECT_TRUE(check_biharmonic(an, samples(ex1()), quick(), &harm).pass);
  EXPECT_FALSE(harm.pass);
}

TEST(CheckBiharmonic, HopfIsHarmonic) {
  const SmoothMap& m = catalog_lookup("hopf").map;
  MapAnalysis an(m);
  ConditionEntry harm;
  EXPECT_TRUE(check_biharmonic(an, samples(m), quick(), &harm).pass);
  EXPECT_TRUE(harm.pass);
}

TEST(CheckBiharmonic, CubicOnTheLine) {
  SmoothMap m = flat_map("cubic", 1, -2, 2, {"x1^3"});
  MapAnalysis an(m);
  ConditionEntry harm;
  EXPECT_TRUE(check_biharmonic(an, samples(m), quick(), &harm).pass);
  EXPECT_FALSE(harm.pass);
  EXPECT_TRUE(check_square_biharmonic(an, samples(m), quick()).vacuous);
}

TEST(CheckSquare, Ex1PassesBfoFails) {
  MapAnalysis a(ex1());
  EXPECT_TRUE(check_square_biharmonic(a, samples(ex1()), quick()).pass);
  MapAnalysis b(bfo());
  auto e = check_square_biharmonic(b, samples(bfo()), quick());
  EXPECT_FALSE(e.pass);
  double worst = 0;
  for (const auto& r : e.residuals) worst = std::max(worst, r.max_abs);
  EXPECT_GT(worst, 1e-3);
}

// Reference: lap^2(phi1 phi2)(1, 1, 1) = -1/2 (sympy); the oracle agrees.
TEST(CheckSquare, BfoProductAtProbePoint) {
  MapAnalysis an(bfo());
  Expr prod = bfo().components[0] * bfo().components[1];
  Field f = an.bilap_of(prod);
  EXPECT_NEAR(evaluate(f, bfo().chart().names(), Point{1, 1, 1}), -0.5, 1e-10);
  for (double h : {1e-2, 3e-2}) EXPECT_NEAR(fd_bilaplace(bfo().domain, prod, {1, 1, 1}, h).value, -0.5, 1e-4);
}

TEST(Classify, SpecExamples) {
  EXPECT_EQ(classify(ex1(), quick()).verdict, Verdict::ProperGHM);
  EXPECT_EQ(classify(catalog_lookup("projection-r3-r2").map, quick()).verdict, Verdict::HarmonicMorphism);
  EXPECT_EQ(classify(bfo(), quick()).verdict, Verdict::BiharmonicHWC_notGHM);
}

TEST(Classify, ReportIsDeterministic) {
  CheckReport a = classify(ex1()), b = classify(ex1());
  EXPECT_EQ(a.points, b.points);
  for (std::size_t i = 0; i < a.conditions.size(); ++i)
    for (std::size_t j = 0; j < a.conditions[i].residuals.size(); ++j)
      EXPECT_EQ(a.conditions[i].residuals[j].values, b.conditions[i].residuals[j].values);
  EXPECT_EQ(a.seed, 42u);
  EXPECT_TRUE(a.oracle_agree);
}

TEST(Classify, InvariantUnderPermutationAndReflection) {
  for (const char* name : {"ex1", "bfo", "hopf", "holomorphic-z3", "inversion4"}) {
    const SmoothMap& m = catalog_lookup(name).map;
    const Verdict base = classify(m, quick()).verdict;
    std::vector<Expr> rev(m.components.rbegin(), m.components.rend());
    EXPECT_EQ(classify(SmoothMap(m.name, m.domain, rev), quick()).verdict, base) << name;

    // x_last -> -x_last, with the box reflected to match.
    const std::string last = m.chart().names().back();
    std::vector<Expr> refl;
    for (const auto& c : m.components) refl.push_back(substitute(c, {{last, neg(variable(last))}}));
    auto box = m.chart().box();
    box.back() = {-box.back().hi, -box.back().lo};
    std::vector<AvoidRegion> avoid;
    for (const auto& a : m.chart().avoid())
      avoid.push_back({substitute(a.predicate, {{last, neg(variable(last))}}), a.margin});
    Metric g = metric_euclidean(Chart(m.chart().names(), box, avoid));
    EXPECT_EQ(classify(SmoothMap(m.name, g, refl), quick()).verdict, base) << name;
  }
}

TEST(Suite, Members) {
  auto s2 = harmonic_suite(2);
  EXPECT_EQ(s2.members.size(), 8u);
  std::set<std::string> n2{"y1", "y2"};
  std::vector<std::string> want{"y1", "y2", "y1*y2", "y1^2-y2^2", "y1^3-3*y1*y2^2", "y2^3-3*y2*y1^2",
                                "y1^3*y2-y2^3*y1", "y1^4-6*y1^2*y2^2+y2^4"};
  for (const auto& w : want) {
    Expr e = parse(w, n2);
    bool found = false;
    for (const auto& m : s2.members) found = found || simplify(m - e).expr.is_zero();
    EXPECT_TRUE(found) << w;
  }
  EXPECT_EQ(harmonic_suite(1).members.size(), 1u);
  auto s3 = harmonic_suite(3);
  bool triple = false;
  for (const auto& m : s3.members)
    triple = triple || simplify(m - parse("y1*y2*y3", std::set<std::string>{"y1", "y2", "y3"})).expr.is_zero();
  EXPECT_TRUE(triple);
  Metric flat = metric_euclidean(3);
  for (const auto& m : s3.members) {
    std::map<std::string, Expr> sub{{"y1", variable("x1")}, {"y2", variable("x2")}, {"y3", variable("x3")}};
    EXPECT_TRUE(simplify(laplace_beltrami(flat, substitute(m, sub))).expr.is_zero());
  }
}

TEST(ChainRule, LinearProbeReducesToBilaplacian) {
  MapAnalysis an(bfo());
  Field chain = pullback_bilaplacian_chain(an, variable("y1"));
  for (const auto& p : samples(bfo(), 8)) {
    const double a = evaluate(chain, bfo().chart().names(), p);
    const double b = evaluate(an.bilap(0), bfo().chart().names(), p);
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(b)));
  }
}

TEST(ChainRule, Ex1ProductProbeVanishes) {
  MapAnalysis an(ex1());
  Field chain = pullback_bilaplacian_chain(an, parse("y1*y2", std::set<std::string>{"y1", "y2"}));
  for (const auto& p : samples(ex1())) EXPECT_NEAR(evaluate(chain, ex1().chart().names(), p), 0.0, 1e-10);
}

TEST(ChainRule, RandomPolynomialMapMatchesDirect) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> coef(-3, 3);
  auto poly = [&](const std::vector<std::string>& v) {
    std::string s = "0";
    for (int i = 0; i <= 3; ++i)
      for (int j = 0; i + j <= 3; ++j) {
        const int c = coef(rng);
        if (c) s += " + (" + std::to_string(c) + ")*" + v[0] + "^" + std::to_string(i) + "*" + v[1] + "^" + std::to_string(j);
      }
    return s;
  };
  for (int trial = 0; trial < 3; ++trial) {
    SmoothMap m = flat_map("poly", 2, -1, 1, {poly({"x1", "x2"}), poly({"x1", "x2"})});
    MapAnalysis an(m);
    Expr f = parse(poly({"y1", "y2"}) + " + y1^4 - y2^2*y1^2", std::set<std::string>{"y1", "y2"});
    Field chain = pullback_bilaplacian_chain(an, f);
    Field direct = an.bilap_of(pull_back(m, f));
    for (const auto& p : samples(m)) {
      const double a = evaluate(chain, m.chart().names(), p), b = evaluate(direct, m.chart().names(), p);
      EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST(ClosedForm, Ex1WithSquaredNorm) {
  MapAnalysis an(ex1());
  auto pts = samples(ex1());
  CheckReport rep = classify(an, quick());
  auto e = check_ce_identity(an, rep, parse("y1^2 + y2^2", std::set<std::string>{"y1", "y2"}), pts, quick());
  EXPECT_TRUE(e.pass);
  EXPECT_NE(e.note.find("deviation"), std::string::npos);
}

TEST(ClosedForm, IdentityWithQuartic) {
  const SmoothMap& m = catalog_lookup("identity2").map;
  MapAnalysis an(m);
  CheckReport rep = classify(an, quick());
  auto e = check_ce_identity(an, rep, parse("y1^4 + 3*y1*y2^3 - y2^2", std::set<std::string>{"y1", "y2"}),
                             samples(m), quick());
  EXPECT_TRUE(e.pass);
}

TEST(ClosedForm, RefusesNonGhm) {
  MapAnalysis an(bfo());
  CheckReport rep = classify(an, quick());
  EXPECT_THROW(check_ce_identity(an, rep, variable("y1"), samples(bfo()), quick()), PreconditionError);
}

TEST(Pullbacks, Ex1PassesBfoFailsProjectionIsZero) {
  MapAnalysis a(ex1());
  auto e = check_ghm_via_pullbacks(a, samples(ex1()), quick());
  EXPECT_TRUE(e.pass);
  EXPECT_EQ(e.residuals.size(), 8u);

  MapAnalysis b(bfo());
  auto f = check_ghm_via_pullbacks(b, samples(bfo()), quick());
  EXPECT_FALSE(f.pass);
  bool square_probe_fails = false;
  for (const auto& r : f.residuals)
    if (!r.pass && (r.label.find("y1y2") != std::string::npos || r.label.find("y1^2-y2^2") != std::string::npos))
      square_probe_fails = true;
  EXPECT_TRUE(square_probe_fails);

  const SmoothMap& p = catalog_lookup("projection-r3-r2").map;
  MapAnalysis c(p);
  auto g = check_ghm_via_pullbacks(c, samples(p), quick());
  EXPECT_TRUE(g.pass);
  for (const auto& r : g.residuals) EXPECT_TRUE(r.symbolic_zero) << r.label;
}

TEST(QuasiHarmonic, Examples) {
  for (const char* name : {"identity3", "projection-r3-r2"}) {
    const SmoothMap& m = catalog_lookup(name).map;
    MapAnalysis an(m);
    CheckReport rep = classify(an, quick());
    auto q = quasiharmonic_pullback(an, rep, rep.points);
    EXPECT_TRUE(q.matches) << name;
    for (double v : q.lambda_squared) EXPECT_NEAR(v, 1.0, 1e-12);
  }
  const SmoothMap& z2 = catalog_lookup("holomorphic-z2").map;
  MapAnalysis an(z2);
  CheckReport rep = classify(an, quick());
  auto q = quasiharmonic_pullback(an, rep, rep.points);
  EXPECT_TRUE(q.matches);
  EXPECT_TRUE(q.nonzero_somewhere);
  for (std::size_t k = 0; k < rep.points.size(); ++k) {
    const auto& x = rep.points[k];
    EXPECT_NEAR(q.lambda_squared[k], 4 * (x[0] * x[0] + x[1] * x[1]), 1e-12);
  }
  MapAnalysis e(ex1());
  EXPECT_THROW(quasiharmonic_pullback(e, classify(e, quick()), rep.points), PreconditionError);
}

TEST(Codomain, HigherDimensionalConformalFactorRejected) {
  SmoothMap m = catalog_lookup("identity3").map;
  m.codomain_conformal_factor = constant(2);
  EXPECT_THROW(MapAnalysis an(m), std::invalid_argument);
}
