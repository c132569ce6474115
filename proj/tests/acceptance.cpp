// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "morphlab/morphlab.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace morphlab;

namespace {

struct Criterion {
  int id;
  std::string title;
  bool ok = true;
  std::vector<std::string> failures;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      failures.push_back(what);
    }
  }
};

// Reports from criteria 1, 2 and 7, reused by criterion 9.
std::vector<CheckReport> g_oracle_reports;

double at(const Expr& e, const Chart& c, const Point& x) { return Evaluator({e}, c.names()).evaluate_one(x); }

void criterion1(Criterion& c) {
  const SmoothMap& m = catalog_lookup("ex1").map;
  CheckReport r = classify(m);
  g_oracle_reports.push_back(r);
  c.require(r.verdict == Verdict::ProperGHM, std::string("verdict ") + verdict_name(r.verdict));
  MapAnalysis an(m);
  const Chart& ch = m.chart();
  const auto pts = sample_points(ch, 32, 42).points;
  Evaluator ev({an.G(0, 0), an.G(1, 1), an.G(0, 1)}, ch.names());
  for (const auto& p : pts) {
    auto v = ev(p);
    c.require(std::abs(v[0] - 1) < 1e-9 && std::abs(v[1] - 1) < 1e-9 && std::abs(v[2]) < 1e-9, "conformality");
  }
  c.require(std::abs(at(an.lap(0), ch, {3, 4, 0, 5}) - 0.4) < 1e-9, "lap phi1 at (3,4,0,5)");
  const Expr& p1 = m.components[0];
  const Expr& p2 = m.components[1];
  std::vector<Field> fields{an.bilap(0), an.bilap(1), an.bilap_of(p1 * p1 - p2 * p2), an.bilap_of(2 * (p1 * p2))};
  FieldEvaluator fe(fields, ch.names());
  double worst = 0;
  for (const auto& p : pts)
    for (const auto& fv : fe(p)) worst = std::max(worst, std::abs(fv.value));
  c.require(worst < 1e-8, "bilaplacians reach " + std::to_string(worst));
}

void criterion2(Criterion& c) {
  const SmoothMap& m = catalog_lookup("bfo").map;
  CheckOptions opt;
  opt.tol_rel = 1e-7;
  CheckReport r = classify(m, opt);
  g_oracle_reports.push_back(r);
  c.require(r.verdict == Verdict::BiharmonicHWC_notGHM, std::string("verdict ") + verdict_name(r.verdict));
  c.require(r.condition("HWC").pass && r.condition("Bi").pass, "HWC and Bi");
  const ResidualSummary* big = nullptr;
  for (const auto& res : r.condition("Sbi").residuals)
    if (res.max_abs > 1e-3 && (!big || res.max_abs > big->max_abs)) big = &res;
  c.require(big != nullptr, "no Sbi residual above 1e-3");
  if (!big) return;
  const Point& x = r.points[big->worst_sample];
  const Expr& p1 = m.components[0];
  const Expr& p2 = m.components[1];
  const Expr f = big->label.find("phi1 phi2") != std::string::npos ? p1 * p2 : p1 * p1 - p2 * p2;
  OracleValue o = fd_bilaplace(m.domain, f, x);
  const double sym = big->values[big->worst_sample];
  c.require(std::abs(o.value) > o.error && std::abs(o.value) > 1e-3, "oracle residual not beyond its estimate");
  c.require(std::abs(o.value - sym) <= std::max(1e-5, o.error), "oracle disagrees with symbolic Sbi value");
}

Expr random_polynomial(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coef(-3, 3), deg(0, 4), var(0, static_cast<int>(n) - 1);
  const auto ys = codomain_names(n);
  std::vector<Expr> terms;
  for (int t = 0; t < 5; ++t) {
    const int d = deg(rng);
    int k = coef(rng);
    if (k == 0) k = 1;
    std::vector<Expr> factors{constant(k)};
    for (int i = 0; i < d; ++i) factors.push_back(variable(ys[static_cast<std::size_t>(var(rng))]));
    terms.push_back(mul(factors));
  }
  return add(terms);
}

void criterion3(Criterion& c) {
  std::mt19937_64 rng(2024);
  CheckOptions opt;
  opt.oracle_points = 0;
  for (const auto& e : catalog()) {
    MapAnalysis an(e.map);
    const auto pts = sample_points(e.map.chart(), 16, 42).points;
    HarmonicSuite s = harmonic_suite(an.n(), 4);
    std::vector<Field> chain, direct;
    for (const auto& f : s.members) {
      chain.push_back(pullback_bilaplacian_chain(an, f));
      direct.push_back(an.bilap_of(pull_back(e.map, f)));
    }
    FieldEvaluator ec(chain, e.map.chart().names()), ed(direct, e.map.chart().names());
    double worst = 0;
    for (const auto& p : pts) {
      auto a = ec(p), b = ed(p);
      for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i].value - b[i].value) / std::max(1.0, std::abs(b[i].value)));
    }
    c.require(worst < 1e-8, e.name + ": chain rule deviates by " + std::to_string(worst));

    CheckReport r = classify(an, opt);
    if (!is_ghm(r.verdict)) continue;
    CheckOptions ce = opt;
    ce.tol_abs = 1e-7;
    ce.tol_rel = 1e-7;
    for (int k = 0; k < 5; ++k) {
      ConditionEntry ent = check_ce_identity(an, r, random_polynomial(an.n(), rng), pts, ce);
      c.require(ent.pass, e.name + ": CE residual " + std::to_string(ent.residuals[0].max_abs));
    }
  }
}

void criterion4(Criterion& c) {
  CheckOptions opt;
  opt.oracle_points = 0;
  for (const auto& e : catalog()) {
    MapAnalysis an(e.map);
    CheckReport r = classify(an, opt);
    ConditionEntry p = check_ghm_via_pullbacks(an, r.points, opt);
    c.require(p.pass == is_ghm(r.verdict), e.name);
  }
}

void criterion5(Criterion& c) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dC(0.05, 5.0), dC1(-3, 3), dC2(-2, 2);
  for (FamilyKind k : {FamilyKind::S1, FamilyKind::S2, FamilyKind::SpX}) {
    for (int i = 0; i < 20; ++i) {
      const double C = dC(rng), C1 = k == FamilyKind::SpX ? 0.0 : dC1(rng), C2 = dC2(rng);
      WarpedSpec w = family(k, C, C1, C2);
      WPReport r = wp_residuals(w);
      const std::string tag = std::string(family_name(k)) + "(" + std::to_string(C) + ", " + std::to_string(C1) + ", " +
                              std::to_string(C2) + ")";
      c.require(r.verdict == WPVerdict::GHM, tag + " verdict " + wp_verdict_name(r.verdict));
      for (const auto& eq : r.equations) c.require(eq.printed.max_abs < 1e-8, tag + " residual " + eq.printed.label);
      c.require(r.tension.proper, tag + " tension vanishes");
      c.require(r.paths_agree, tag + " paths disagree");
    }
  }
  for (const char* b : {"exp(x^2)", "exp(x + y^2)", "(x^2 + y^2 + 1)^(-1)"}) {
    WarpedSpec w;
    w.beta = parse(b, w.chart.scope());
    WPReport r = wp_residuals(w);
    c.require(r.verdict != WPVerdict::GHM, std::string(b) + " classified GHM");
    c.require(std::max(r.equations[2].printed.max_abs, r.equations[3].printed.max_abs) > 1e-2,
              std::string(b) + " eq3/eq4 residuals small");
  }
}

void criterion6(Criterion& c) {
  WarpedSpec w;
  w.beta = parse("3*(x + 2*y + 1)^(-2)", w.chart.scope());
  WPReport r = classify_beta(w);
  c.require(r.fit.has_value(), "no fit");
  if (!r.fit) return;
  c.require(std::abs(r.fit->C - 3) < 1e-6 && std::abs(r.fit->C1 - 2) < 1e-6 && std::abs(r.fit->C2 - 1) < 1e-6,
            "fit " + r.fit->template_name + " (" + std::to_string(r.fit->C) + ", " + std::to_string(r.fit->C1) + ", " +
                std::to_string(r.fit->C2) + ")");
}

void criterion7(Criterion& c) {
  SmoothMap ex3 = compose(catalog_lookup("hopf").map, catalog_lookup("inversion4").map);
  for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
    SmoothMap m("ex4", ex3.domain, {ex3.components[static_cast<std::size_t>(i)], ex3.components[static_cast<std::size_t>(j)]});
    CheckReport r = classify(m);
    g_oracle_reports.push_back(r);
    c.require(is_ghm(r.verdict), "projection of ex3 onto (" + std::to_string(i + 1) + std::to_string(j + 1) + ")");
  }
  CheckReport s = classify(direct_sum(catalog_lookup("ex1").map, catalog_lookup("holomorphic-z2").map));
  g_oracle_reports.push_back(s);
  c.require(is_ghm(s.verdict), "ex1 + z^2");
  CheckReport d = classify(direct_sum(catalog_lookup("ex1").map, catalog_lookup("ex1").map));
  g_oracle_reports.push_back(d);
  c.require(!is_ghm(d.verdict) && !d.condition("Sbi").pass, "ex1 + ex1");
  c.require(d.oracle_agree, "ex1 + ex1 oracle");
}

void criterion8(Criterion& c) {
  CheckOptions opt;
  opt.oracle_points = 0;
  int count = 0;
  for (const auto& e : catalog()) {
    if (e.expected != Verdict::HarmonicMorphism) continue;
    ++count;
    MapAnalysis an(e.map);
    CheckReport r = classify(an, opt);
    std::vector<double> lam2;
    check_hwc(an, r.points, opt, &lam2);
    QuasiHarmonicResult q = quasiharmonic_pullback(an, r, r.points);
    double worst = 0;
    for (std::size_t k = 0; k < lam2.size(); ++k)
      worst = std::max(worst, std::abs(q.lambda_squared[k] - lam2[k]) / std::max(1.0, std::abs(lam2[k])));
    c.require(q.matches && worst < 1e-8, e.name + " lambda^2 mismatch");
    c.require(q.nonzero_somewhere, e.name + " pullback vanishes");
  }
  c.require(count > 0, "no harmonic morphisms in catalog");
}

void criterion9(Criterion& c) {
  for (const auto& r : g_oracle_reports) {
    c.require(!r.oracle.empty(), r.map_name + ": no oracle values");
    for (const auto& o : r.oracle) c.require(o.agree, r.map_name + ": " + o.label);
  }
  for (const auto& e : catalog()) {
    CatalogResult r = run_catalog_entry(e);
    c.require(r.report.oracle_agree, e.name + " oracle");
    if (e.name == "ex3")
      c.require(std::any_of(r.measurements.begin(), r.measurements.end(),
                            [](const auto& m) { return m.label == "dilation exponent"; }),
                "ex3 exponent record");
    if (e.name == "ex1-plus-z2")
      c.require(std::any_of(r.measurements.begin(), r.measurements.end(),
                            [](const auto& m) { return m.label == "direct-sum dilation"; }),
                "direct-sum record");
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10(Criterion& c) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "morphlab_acc_a.json", b = dir / "morphlab_acc_b.json";
  for (const auto& p : {a, b}) {
    const std::string cmd = std::string(MORPHLAB_CLI) + " catalog --seed 42 --json " + p.string() + " > /dev/null";
    c.require(std::system(cmd.c_str()) == 0, "catalog run exit status");
  }
  const std::string ja = slurp(a), jb = slurp(b);
  c.require(!ja.empty() && ja == jb, "catalog JSON differs between runs");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, void (*)(Criterion&)>> all{
      {"ex1 reproduction", criterion1},
      {"bfo negative control", criterion2},
      {"chain rule and closed-form identity", criterion3},
      {"pullback definition agrees with classifier", criterion4},
      {"warped-product families", criterion5},
      {"family constants recovered", criterion6},
      {"construction closures", criterion7},
      {"quasi-harmonic pullback witness", criterion8},
      {"oracle discipline", criterion9},
      {"determinism", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Criterion c{static_cast<int>(i + 1), all[i].first};
    try {
      all[i].second(c);
    } catch (const std::exception& e) {
      c.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << "\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(c.failures.size(), 5); ++k)
      std::cout << "    " << c.failures[k] << "\n";
    failed += c.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
