#pragma once

// JSON and CSV renderings of reports. Key order is fixed and no timing or
// environment data is written, so equal inputs give byte-identical output.

#include "morphlab/constructions.hpp"
#include "morphlab/warped.hpp"

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>

namespace morphlab {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;

inline Json to_json(const ResidualSummary& r) {
  return Json{{"label", r.label},         {"expression", r.expression}, {"symbolic_zero", r.symbolic_zero},
              {"max_abs", r.max_abs},     {"max_ratio", r.max_ratio},   {"worst_sample", r.worst_sample},
              {"pass", r.pass}};
}

inline Json to_json(const ConditionEntry& c) {
  Json res = Json::array();
  for (const auto& r : c.residuals) res.push_back(to_json(r));
  return Json{{"id", c.id},     {"pass", c.pass}, {"vacuous", c.vacuous}, {"inconclusive", c.inconclusive},
              {"note", c.note}, {"residuals", res}};
}

inline Json to_json(const OracleSummary& o) {
  return Json{{"label", o.label},       {"agree", o.agree},     {"inconclusive", o.inconclusive},
              {"max_deviation", o.max_deviation}, {"symbolic", o.symbolic}, {"numeric", o.numeric},
              {"error_estimate", o.error}};
}

inline Json to_json(const CheckReport& r) {
  Json conds = Json::array();
  for (const auto& c : r.conditions) conds.push_back(to_json(c));
  Json oracle = Json::array();
  for (const auto& o : r.oracle) oracle.push_back(to_json(o));
  return Json{{"map", r.map_name},
              {"verdict", verdict_name(r.verdict)},
              {"seed", r.seed},
              {"samples", r.points.size()},
              {"conditions", conds},
              {"dilation_squared", r.dilation_squared},
              {"oracle", Json{{"agree", r.oracle_agree}, {"inconclusive", r.oracle_inconclusive}, {"checks", oracle}}},
              {"caveats", r.caveats},
              {"notes", r.notes},
              {"points", r.points}};
}

inline Json to_json(const DilationComparison& d) {
  return Json{{"candidate", d.candidate}, {"max_rel_deviation", d.max_rel_deviation}, {"matches", d.matches}};
}

inline Json to_json(const MeasurementRecord& m) {
  Json cmp = Json::array();
  for (const auto& c : m.comparisons) cmp.push_back(to_json(c));
  Json out{{"label", m.label}, {"declared", m.declared}};
  out["measured"] = std::isnan(m.measured) ? Json(nullptr) : Json(m.measured);
  out["comparisons"] = cmp;
  return out;
}

inline Json to_json(const CatalogResult& c) {
  Json meas = Json::array();
  for (const auto& m : c.measurements) meas.push_back(to_json(m));
  Json out{{"name", c.name},
           {"verdict", verdict_name(c.report.verdict)},
           {"expected", c.expected ? Json(verdict_name(*c.expected)) : Json(nullptr)},
           {"verdict_matches", c.verdict_matches},
           {"disputed", c.disputed},
           {"pass", c.pass()}};
  out["declared_dilation"] = c.declared_dilation ? to_json(*c.declared_dilation) : Json(nullptr);
  out["measurements"] = meas;
  out["report"] = to_json(c.report);
  return out;
}

inline Json to_json(const FamilyFit& f) {
  Json out{{"template", f.template_name}, {"degenerate", f.degenerate}, {"C", f.C},
           {"C1", f.C1},                  {"C2", f.C2},                 {"residual", f.residual}};
  out["alternative"] = f.alternative ? Json{{"template", f.alternative->name},
                                            {"C", f.alternative->C},
                                            {"C1", f.alternative->C1},
                                            {"C2", f.alternative->C2}}
                                     : Json(nullptr);
  out["note"] = f.note;
  return out;
}

inline Json to_json(const WPReport& r) {
  Json eqs = Json::array();
  for (const auto& e : r.equations) {
    Json j = to_json(e.printed);
    j["max_path_deviation"] = e.max_path_deviation;
    j["paths_agree"] = e.paths_agree;
    j["sign_flipped"] = e.sign_flipped;
    eqs.push_back(j);
  }
  Json tension = Json::array();
  for (const auto& t : r.tension.values) tension.push_back(Json::array({t[0], t[1]}));
  Json out{{"schema", kReportSchema},
           {"beta", r.beta},
           {"verdict", wp_verdict_name(r.verdict)},
           {"seed", r.seed},
           {"samples", r.points.size()},
           {"equations", eqs},
           {"paths_agree", r.paths_agree},
           {"mixed_partial_deviation", r.mixed_partial_deviation},
           {"tension", Json{{"proper", r.tension.proper}, {"values", tension}}}};
  out["fit"] = r.fit ? to_json(*r.fit) : Json(nullptr);
  out["notes"] = r.notes;
  return out;
}

/// One row per sample: coordinates, then every residual value.
inline void write_csv(std::ostream& os, const CheckReport& r, const std::vector<std::string>& coordinate_names) {
  os << "sample";
  for (const auto& n : coordinate_names) os << "," << n;
  for (const auto& c : r.conditions)
    for (const auto& res : c.residuals) os << ",\"" << c.id << ": " << res.label << "\"";
  if (!r.dilation_squared.empty()) os << ",lambda^2";
  os << "\n";
  char buf[64];
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    os << k;
    for (double x : r.points[k]) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      os << "," << buf;
    }
    for (const auto& c : r.conditions)
      for (const auto& res : c.residuals) {
        std::snprintf(buf, sizeof buf, "%.17g", res.values.at(k));
        os << "," << buf;
      }
    if (!r.dilation_squared.empty()) {
      std::snprintf(buf, sizeof buf, "%.17g", r.dilation_squared[k]);
      os << "," << buf;
    }
    os << "\n";
  }
}

}  // namespace morphlab
