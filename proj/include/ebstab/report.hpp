#pragma once

// Report emission in three formats. Output is a pure function of the result
// objects: no timestamps, no environment, fixed key order.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ebstab/analysis.hpp"
#include "ebstab/problem.hpp"
#include "ebstab/scenarios.hpp"

namespace ebstab {

inline constexpr const char* kReportSchema = "eb-report/1";

enum class ReportFormat { Human, Json, Csv };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "human") return ReportFormat::Human;
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::Precondition, "unknown report format '" + s + "'");
}

using ReportResults = std::variant<ProblemAnalysis, SweepResult, std::vector<ScenarioResult>>;

struct Report {
  std::string command;
  std::uint64_t seed = 0;
  std::optional<ProblemFile> problem;
  ReportResults results;
};

namespace json_out {

using Json = nlohmann::ordered_json;

inline Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline Json vector(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline Json notes(const std::vector<std::string>& n) { return Json(n); }

inline Json beta(const BetaCertificate& c) {
  return Json{{"beta", number(c.beta)},
              {"witness", vector(c.witness)},
              {"origin", to_string(c.origin_location.tag)},
              {"residual", number(c.residual)}};
}

inline Json modulus(const ModulusReport& r) {
  Json j{{"kind", to_string(r.kind)}};
  if (r.kind == ModulusKind::Local) j["center"] = vector(r.center);
  if (r.box) j["box"] = Json{{"lo", vector(r.box->lo)}, {"hi", vector(r.box->hi)}};
  j["eta"] = number(r.eta);
  j["tau"] = number(r.tau);
  j["vacuous"] = r.vacuous;
  j["sample_count"] = r.sample_count;
  Json levels = Json::array();
  for (const auto& l : r.shrink_levels) {
    levels.push_back(Json{{"radius", number(l.radius)},
                          {"min_distance", number(l.min_distance)},
                          {"infeasible_count", l.infeasible_count}});
  }
  j["levels"] = levels;
  j["empirical_ratio"] = number(r.empirical_ratio);
  j["consistent"] = r.consistent;
  j["resample_suggested"] = r.resample_suggested;
  j["notes"] = notes(r.notes);
  return j;
}

/// Every unstable verdict carries at least one witness: the destabilizing
/// direction, a qualification-condition pair, or the worst boundary point.
inline Json verdict(const StabilityVerdict& v) {
  Json j{{"scope", to_string(v.scope)}, {"verdict", to_string(v.verdict)}};
  if (v.scope == ModulusKind::Local) {
    j["center"] = vector(v.center);
    j["beta"] = number(v.beta);
  }
  j["beta_inf"] = number(v.beta_inf);
  Json w = Json::array();
  if (v.destabilizer) {
    w.push_back(Json{{"kind", "destabilizing-direction"},
                     {"direction", vector(v.destabilizer->direction)},
                     {"epsilon", number(v.destabilizer->epsilon)}});
  }
  for (const auto& q : v.qc_witnesses) {
    w.push_back(Json{{"kind", "qualification-condition"},
                     {"z", vector(q.z)},
                     {"x", vector(q.x)},
                     {"ratio", number(q.ratio)},
                     {"beta_z", number(q.beta_z)}});
  }
  if (v.scope == ModulusKind::Global && v.worst_point.size() > 0) {
    w.push_back(Json{{"kind", "worst-boundary-point"}, {"x", vector(v.worst_point)}, {"abs_beta", number(v.beta_inf)}});
  }
  j["witnesses"] = w;
  j["notes"] = notes(v.notes);
  return j;
}

inline Json analysis(const ProblemAnalysis& a) {
  Json j{{"name", a.name}};
  if (a.local) {
    Json l{{"point", vector(a.local->point)},
           {"beta", beta(a.local->beta)},
           {"verdict", verdict(a.local->verdict)},
           {"modulus", modulus(a.local->modulus)}};
    if (a.local->destabilized) l["destabilized_modulus"] = modulus(*a.local->destabilized);
    if (a.local->active_set) l["active_set"] = *a.local->active_set;
    j["local"] = l;
  }
  if (a.global) {
    Json g{{"tau", number(a.global->tau)},
           {"box", Json{{"lo", vector(a.global->box.lo)}, {"hi", vector(a.global->box.hi)}}},
           {"modulus", modulus(a.global->modulus)},
           {"verdict", verdict(a.global->verdict)}};
    if (a.global->active_set) g["active_set"] = *a.global->active_set;
    j["global"] = g;
  }
  return j;
}

inline Json sweep(const SweepResult& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    rows.push_back(Json{{"epsilon", number(r.epsilon)},
                        {"u_star", vector(r.u)},
                        {"beta_before", number(r.beta_before)},
                        {"beta_after", number(r.beta_after)},
                        {"tau_local", number(r.tau_local)},
                        {"tau_global", r.tau_global ? number(*r.tau_global) : Json(nullptr)},
                        {"verdict", to_string(r.verdict)}});
  }
  return Json{{"center", vector(s.center)}, {"consistent", sweep_rows_consistent(s)}, {"rows", rows}};
}

inline Json scenarios(const std::vector<ScenarioResult>& list) {
  Json out = Json::array();
  for (const auto& s : list) {
    Json checks = Json::array();
    for (const auto& c : s.checks) {
      checks.push_back(Json{{"label", c.label},
                            {"value", number(c.value)},
                            {"relation", c.relation},
                            {"target", number(c.target)},
                            {"tolerance", number(c.tolerance)},
                            {"passed", c.passed}});
    }
    out.push_back(Json{{"scenario", s.name}, {"passed", s.passed}, {"checks", checks}, {"notes", notes(s.notes)}});
  }
  return out;
}

}  // namespace json_out

inline std::string emit_json(const Report& r) {
  using json_out::Json;
  Json j;
  j["schema"] = kReportSchema;
  if (r.problem) {
    j["problem"] = Json{{"name", r.problem->name}, {"dim", r.problem->dim}, {"source", serialize_problem(*r.problem)}};
  } else {
    j["problem"] = nullptr;
  }
  j["command"] = r.command;
  j["seed"] = r.seed;
  j["results"] = std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ProblemAnalysis>) {
          return json_out::analysis(v);
        } else if constexpr (std::is_same_v<T, SweepResult>) {
          return json_out::sweep(v);
        } else {
          return json_out::scenarios(v);
        }
      },
      r.results);
  return j.dump(2) + "\n";
}

namespace text_out {

inline std::string join(const Vector& v, const char* sep) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) s += sep;
    s += format_number(v[i]);
  }
  return s;
}

inline void modulus(std::ostringstream& o, const char* title, const ModulusReport& m) {
  o << "  " << title << ": eta " << format_number(m.eta) << ", tau " << format_number(m.tau);
  if (m.vacuous) o << " (vacuous)";
  o << ", " << m.sample_count << " samples, empirical ratio " << format_number(m.empirical_ratio);
  if (!m.consistent) o << " [inconsistent]";
  if (m.resample_suggested) o << " [resample suggested]";
  o << "\n";
}

inline void verdict(std::ostringstream& o, const StabilityVerdict& v) {
  o << "  verdict: " << to_string(v.verdict) << "\n";
  if (v.destabilizer) {
    o << "  destabilizing direction " << format_vector(v.destabilizer->direction) << " at eps "
      << format_number(v.destabilizer->epsilon) << "\n";
  }
  if (!v.qc_witnesses.empty()) {
    const auto& q = v.qc_witnesses.front();
    o << "  qualification witnesses: " << v.qc_witnesses.size() << " (best z " << format_vector(q.z) << ", ratio "
      << format_number(q.ratio) << ")\n";
  }
  for (const auto& n : v.notes) o << "  note: " << n << "\n";
}

}  // namespace text_out

inline std::string emit_human(const Report& r) {
  std::ostringstream o;
  o << r.command << " (seed " << r.seed << ")\n";
  if (r.problem && !r.problem->name.empty()) o << "problem: " << r.problem->name << "\n";
  if (const auto* a = std::get_if<ProblemAnalysis>(&r.results)) {
    if (a->local) {
      const auto& l = *a->local;
      o << "local analysis at " << format_vector(l.point) << "\n";
      o << "  beta: " << format_number(l.beta.beta) << " (" << to_string(l.beta.origin_location.tag) << ")\n";
      if (l.active_set) o << "  active set: " << *l.active_set << "\n";
      text_out::verdict(o, l.verdict);
      text_out::modulus(o, "modulus", l.modulus);
      if (l.destabilized) text_out::modulus(o, "destabilized modulus", *l.destabilized);
    }
    if (a->global) {
      const auto& g = *a->global;
      o << "global analysis, slope threshold " << format_number(g.tau) << "\n";
      o << "  inf |beta| on sampled boundary: " << format_number(g.verdict.beta_inf) << "\n";
      if (g.active_set) o << "  active set at worst boundary point: " << *g.active_set << "\n";
      text_out::verdict(o, g.verdict);
      text_out::modulus(o, "modulus", g.modulus);
    }
    if (!a->local && !a->global) o << "nothing to analyze: declare a point, or a box and tau\n";
  } else if (const auto* s = std::get_if<SweepResult>(&r.results)) {
    o << "sweep at " << format_vector(s->center) << "\n";
    for (const auto& row : s->rows) {
      o << "  eps " << format_number(row.epsilon) << " u " << format_vector(row.u) << ": beta "
        << format_number(row.beta_before) << " -> " << format_number(row.beta_after) << ", tau_local "
        << format_number(row.tau_local);
      if (row.tau_global) o << ", tau_global " << format_number(*row.tau_global);
      o << ", " << to_string(row.verdict) << "\n";
    }
    o << (sweep_rows_consistent(*s) ? "all rows within the beta shift bound\n" : "beta shift bound VIOLATED\n");
  } else {
    for (const auto& sc : std::get<std::vector<ScenarioResult>>(r.results)) {
      o << sc.name << ": " << (sc.passed ? "PASS" : "FAIL") << "\n";
      for (const auto& c : sc.checks) {
        o << "  " << (c.passed ? "ok  " : "FAIL") << " " << c.label << ": " << format_number(c.value) << " "
          << c.relation << " " << format_number(c.target);
        if (c.tolerance > 0.0) o << " (tol " << format_number(c.tolerance) << ")";
        o << "\n";
      }
      for (const auto& n : sc.notes) o << "  note: " << n << "\n";
    }
  }
  return o.str();
}

inline std::string emit_csv(const Report& r) {
  std::ostringstream o;
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  if (const auto* a = std::get_if<ProblemAnalysis>(&r.results)) {
    o << "scope,radius,min_distance,infeasible_count,eta,tau,verdict\n";
    auto rows = [&](const char* scope, const ModulusReport& m, Verdict v) {
      for (const auto& l : m.shrink_levels) {
        o << scope << "," << format_number(l.radius) << "," << format_number(l.min_distance) << ","
          << l.infeasible_count << "," << format_number(m.eta) << "," << format_number(m.tau) << "," << to_string(v)
          << "\n";
      }
    };
    if (a->local) rows("local", a->local->modulus, a->local->verdict.verdict);
    if (a->global) rows("global", a->global->modulus, a->global->verdict.verdict);
  } else if (const auto* s = std::get_if<SweepResult>(&r.results)) {
    o << "epsilon,u_star,beta_before,beta_after,tau_local,tau_global,verdict\n";
    for (const auto& row : s->rows) {
      o << format_number(row.epsilon) << "," << text_out::join(row.u, " ") << "," << format_number(row.beta_before)
        << "," << format_number(row.beta_after) << "," << format_number(row.tau_local) << "," << opt(row.tau_global)
        << "," << to_string(row.verdict) << "\n";
    }
  } else {
    o << "scenario,check,value,relation,target,tolerance,passed\n";
    for (const auto& sc : std::get<std::vector<ScenarioResult>>(r.results)) {
      for (const auto& c : sc.checks) {
        o << sc.name << ",\"" << c.label << "\"," << format_number(c.value) << "," << c.relation << ","
          << format_number(c.target) << "," << format_number(c.tolerance) << "," << (c.passed ? "true" : "false")
          << "\n";
      }
    }
  }
  return o.str();
}

inline std::string emit_report(const Report& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return emit_json(r);
    case ReportFormat::Csv: return emit_csv(r);
    case ReportFormat::Human: return emit_human(r);
  }
  return {};
}

}  // namespace ebstab
