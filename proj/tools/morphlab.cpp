// morphlab command line: check a map spec file, run the built-in catalog, or
// analyse a warped-product metric.
//
// Exit codes: 0 expectations met, 1 verdict mismatch, 2 usage or parse error,
// 3 inconclusive (tolerance band or oracle).

#include "morphlab/morphlab.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace morphlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInconclusive = 3;

// Tables go to stderr when the JSON report is written to stdout.
std::ostream* g_out = &std::cout;

std::string fmt(double v, const char* f = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

bool write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    return false;
  }
  out << text;
  return static_cast<bool>(out);
}

void print_conditions(const CheckReport& r) {
  *g_out << "  " << pad("condition", 11) << pad("result", 14) << pad("max ratio", 11) << "worst residual\n";
  for (const auto& c : r.conditions) {
    std::string result = c.vacuous ? "vacuous" : c.pass ? "pass" : "FAIL";
    if (c.inconclusive) result += "?";
    double ratio = 0;
    std::string worst;
    for (const auto& res : c.residuals)
      if (res.max_ratio >= ratio) {
        ratio = res.max_ratio;
        worst = res.label + " = " + fmt(res.max_abs);
      }
    *g_out << "  " << pad(c.id, 11) << pad(result, 14) << pad(fmt(ratio), 11) << worst << "\n";
  }
  for (const auto& o : r.oracle)
    *g_out << "  oracle " << pad(o.label, 26) << (o.agree ? (o.inconclusive ? "agree (by estimate)" : "agree") : "DISAGREE")
              << "  dev " << fmt(o.max_deviation) << "  est " << fmt(o.error) << "\n";
  for (const auto& n : r.notes) *g_out << "  note: " << n << "\n";
  for (const auto& c : r.caveats) *g_out << "  caveat: " << c << "\n";
}

// Agreement that rests on an error estimate above tolerance is reported but
// does not change the exit code; a disagreement or a failed stencil does.
bool oracle_unsettled(const CheckReport& r) { return !r.oracle_agree; }

struct CheckArgs {
  std::string spec;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_abs, tol_rel;
  std::string json, csv, expect;
};

int cmd_check(const CheckArgs& a) {
  MapSpec spec = [&] {
    try {
      return load_spec(a.spec);
    } catch (const SpecError& e) {
      std::cerr << "error: " << e.what() << "\n";
      throw kExitUsage;
    }
  }();
  if (a.samples) spec.options.samples = *a.samples;
  if (a.seed) spec.options.seed = *a.seed;
  if (a.tol_abs) spec.options.tol_abs = *a.tol_abs;
  if (a.tol_rel) spec.options.tol_rel = *a.tol_rel;
  if (!a.expect.empty()) {
    spec.expected = parse_expectation(a.expect);
    if (!spec.expected) {
      std::cerr << "error: unknown verdict '" << a.expect << "'\n";
      return kExitUsage;
    }
  }
  CheckReport r = classify(spec.map, spec.options);
  const bool matches = !spec.expected || spec.expected->matches(r.verdict);

  *g_out << spec.map.name << ": " << verdict_name(r.verdict);
  if (spec.expected) *g_out << "  (expected " << spec.expected->text << ": " << (matches ? "ok" : "MISMATCH") << ")";
  *g_out << "\n";
  print_conditions(r);

  if (!a.json.empty()) {
    Json j{{"schema", kReportSchema}, {"command", "check"}};
    j["expected"] = spec.expected ? Json(spec.expected->text) : Json(nullptr);
    j["verdict_matches"] = matches;
    j["report"] = to_json(r);
    if (!write_text(a.json, j.dump(2) + "\n")) return kExitUsage;
  }
  if (!a.csv.empty()) {
    std::ostringstream os;
    write_csv(os, r, spec.map.chart().names());
    if (!write_text(a.csv, os.str())) return kExitUsage;
  }
  if (!matches) return kExitMismatch;
  if (r.inconclusive() || oracle_unsettled(r)) return kExitInconclusive;
  return kExitOk;
}

std::string dilation_cell(const CatalogResult& c) {
  if (c.declared_dilation) return c.declared_dilation->matches ? "declared ok" : "declared MISMATCH";
  for (const auto& m : c.measurements)
    if (m.label == "dilation exponent") return "measured exponent " + fmt(m.measured, "%.4g");
  for (const auto& m : c.measurements) {
    for (const auto& cmp : m.comparisons)
      if (cmp.matches) return "measured " + cmp.candidate;
    if (!m.comparisons.empty()) return "measured (no candidate)";
  }
  return c.report.dilation_squared.empty() ? "-" : "not declared";
}

int cmd_catalog(const std::string& name, std::uint64_t seed, const std::string& json_path) {
  std::vector<const CatalogEntry*> entries;
  if (name.empty()) {
    for (const auto& e : catalog()) entries.push_back(&e);
  } else {
    try {
      entries.push_back(&catalog_lookup(name));
    } catch (const std::out_of_range& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  CheckOptions opt;
  opt.seed = seed;
  std::vector<CatalogResult> results;
  for (const auto* e : entries) results.push_back(run_catalog_entry(*e, opt));

  *g_out << pad("name", 20) << pad("verdict", 22) << pad("expected", 22) << pad("dilation", 34) << "oracle\n";
  bool all_pass = true, unsettled = false;
  for (const auto& c : results) {
    std::string expected = c.expected ? verdict_name(*c.expected) : "-";
    if (c.disputed) expected += " (disputed)";
    else if (!c.verdict_matches) expected += " MISMATCH";
    const std::string oracle = !c.report.oracle_agree ? "DISAGREE" : c.report.oracle_inconclusive ? "agree (by estimate)" : "agree";
    *g_out << pad(c.name, 20) << pad(verdict_name(c.report.verdict), 22) << pad(expected, 22)
              << pad(dilation_cell(c), 34) << oracle << "\n";
    all_pass = all_pass && c.pass();
    if (!c.disputed) unsettled = unsettled || oracle_unsettled(c.report);
  }
  if (!json_path.empty()) {
    Json list = Json::array();
    for (const auto& c : results) list.push_back(to_json(c));
    Json j{{"schema", kReportSchema}, {"command", "catalog"}, {"seed", seed}, {"all_pass", all_pass}, {"entries", list}};
    if (!write_text(json_path, j.dump(2) + "\n")) return kExitUsage;
  }
  if (!all_pass) return kExitMismatch;
  return unsettled ? kExitInconclusive : kExitOk;
}

struct WarpedArgs {
  std::string beta, family, expect, json;
  double C = 1, C1 = 0, C2 = 0;
  std::size_t samples = 32;
  std::uint64_t seed = 42;
};

int cmd_warped(const WarpedArgs& a) {
  WarpedSpec w;
  try {
    if (!a.beta.empty()) {
      w.beta = parse(a.beta, std::set<std::string>{"x", "y"});
    } else {
      auto kind = parse_family(a.family);
      if (!kind) {
        std::cerr << "error: unknown family '" << a.family << "' (Sp-x, Sp-y, S1, S2)\n";
        return kExitUsage;
      }
      w = family(*kind, a.C, a.C1, a.C2);
    }
    (void)w.metric();  // rejects beta that is not positive on the box
  } catch (const ParseError& e) {
    std::cerr << "error: in beta: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  CheckOptions opt;
  opt.samples = a.samples;
  opt.seed = a.seed;
  WPReport r = classify_beta(w, opt);

  *g_out << "beta = " << r.beta << ": " << wp_verdict_name(r.verdict) << "\n";
  for (const auto& e : r.equations)
    *g_out << "  " << pad(e.printed.label, 26) << pad(e.printed.pass ? "pass" : "FAIL", 6) << "max |r| "
              << pad(fmt(e.printed.max_abs), 10) << (e.paths_agree ? "paths agree" : "PATHS DISAGREE") << "\n";
  *g_out << "  tension " << (r.tension.proper ? "nonzero (proper)" : "zero (harmonic)") << "\n";
  if (r.fit) {
    *g_out << "  fit " << r.fit->template_name;
    if (!r.fit->degenerate)
      *g_out << "  C = " << fmt(r.fit->C, "%.10g") << "  C1 = " << fmt(r.fit->C1, "%.10g") << "  C2 = "
                << fmt(r.fit->C2, "%.10g");
    *g_out << "\n";
    if (r.fit->alternative)
      *g_out << "  also " << r.fit->alternative->name << "  C = " << fmt(r.fit->alternative->C, "%.10g")
                << "  C1 = " << fmt(r.fit->alternative->C1, "%.10g") << "  C2 = " << fmt(r.fit->alternative->C2, "%.10g")
                << "\n";
  }
  for (const auto& n : r.notes) *g_out << "  note: " << n << "\n";

  Json j = to_json(r);
  std::optional<SquareWitness> sq;
  if (r.verdict == WPVerdict::GHM) {
    sq = square_map_ghm_witness(w, opt);
    *g_out << "  square map: " << verdict_name(sq->report.verdict) << "  (HWC " << (sq->hwc ? "pass" : "FAIL")
              << ", lambda^2 = 4(x^2+y^2) " << (sq->lambda_matches ? "yes" : "no") << ")\n";
    j["square_map"] = Json{{"verdict", verdict_name(sq->report.verdict)},
                           {"hwc", sq->hwc},
                           {"lambda_matches", sq->lambda_matches},
                           {"biharmonic", sq->biharmonic},
                           {"harmonic", sq->harmonic}};
  } else {
    j["square_map"] = nullptr;
  }
  if (!a.json.empty() && !write_text(a.json, j.dump(2) + "\n")) return kExitUsage;

  if (!a.expect.empty()) {
    std::string want;
    for (char c : a.expect) want += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string got;
    for (const char* p = wp_verdict_name(r.verdict); *p; ++p) got += static_cast<char>(std::tolower(*p));
    if (want != "ghm" && want != "biharmoniconly" && want != "neither") {
      std::cerr << "error: unknown warped verdict '" << a.expect << "'\n";
      return kExitUsage;
    }
    if (want != got) return kExitMismatch;
  }
  return r.paths_agree ? kExitOk : kExitInconclusive;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classify maps between Riemannian charts as harmonic, generalized harmonic or biharmonic."};
  app.require_subcommand(1);

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "classify the map in a spec file");
  check->add_option("spec", ca.spec, "spec file")->required();
  check->add_option("--samples", ca.samples, "sample count")->check(CLI::Range(1, 100000));
  check->add_option("--seed", ca.seed, "sampling seed");
  check->add_option("--tol-abs", ca.tol_abs, "absolute tolerance")->check(CLI::PositiveNumber);
  check->add_option("--tol-rel", ca.tol_rel, "relative tolerance")->check(CLI::NonNegativeNumber);
  check->add_option("--json", ca.json, "write the JSON report here ('-' for stdout)");
  check->add_option("--csv", ca.csv, "write per-sample residuals here");
  check->add_option("--expect", ca.expect, "expected verdict (overrides the spec file)");

  std::string cat_name, cat_json;
  std::uint64_t cat_seed = 42;
  auto* cat = app.add_subcommand("catalog", "run built-in catalog entries");
  cat->add_option("name", cat_name, "entry name (all when omitted)");
  cat->add_option("--seed", cat_seed, "sampling seed");
  cat->add_option("--json", cat_json, "write the JSON report here ('-' for stdout)");

  WarpedArgs wa;
  auto* warped = app.add_subcommand("warped", "analyse the projection from a warped product R^2 x_beta R");
  auto* beta_opt = warped->add_option("--beta", wa.beta, "warping function of x, y");
  auto* fam_opt = warped->add_option("--family", wa.family, "Sp-x, Sp-y, S1 or S2");
  beta_opt->excludes(fam_opt);
  warped->add_option("--C", wa.C, "family constant C > 0");
  warped->add_option("--C1", wa.C1, "family constant C1");
  warped->add_option("--C2", wa.C2, "family constant C2");
  warped->add_option("--samples", wa.samples, "sample count")->check(CLI::Range(1, 100000));
  warped->add_option("--seed", wa.seed, "sampling seed");
  warped->add_option("--expect", wa.expect, "GHM, BiharmonicOnly or Neither");
  warped->add_option("--json", wa.json, "write the JSON report here ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (const std::string* json : {&ca.json, &cat_json, &wa.json})
    if (*json == "-") g_out = &std::cerr;
  try {
    if (*check) return cmd_check(ca);
    if (*cat) return cmd_catalog(cat_name, cat_seed, cat_json);
    if (*warped) {
      if (wa.beta.empty() && wa.family.empty()) {
        std::cerr << "error: warped needs --beta or --family\n";
        return kExitUsage;
      }
      return cmd_warped(wa);
    }
  } catch (int code) {
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
