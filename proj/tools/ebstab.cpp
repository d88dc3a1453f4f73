// Command-line front end: analyze problem files, run perturbation sweeps,
// reproduce the canned scenarios.

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebstab/ebstab.hpp"

namespace {

using namespace ebstab;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kExitParse = 3;
constexpr int kExitNonConvergence = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Precondition, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const char* what) {
  double v = 0.0;
  const char* first = s.data() + (!s.empty() && s.front() == '+' ? 1 : 0);
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::Syntax, std::string("malformed ") + what + " '" + s + "'");
  }
  return v;
}

// "[1, 0]", "1,0" and "1 0" all parse.
Vector parse_vector(const std::string& s, Eigen::Index dim, const char* what) {
  const auto parts = split(s, "[], \t");
  if (static_cast<Eigen::Index>(parts.size()) != dim) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " needs " + std::to_string(dim) + " entries, got " + std::to_string(parts.size()));
  }
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = to_double(parts[static_cast<std::size_t>(i)], what);
  return v;
}

// "lo..hi" for every axis, or one "lo..hi" per axis separated by commas or spaces.
Box parse_box(const std::string& s, Eigen::Index dim) {
  const auto parts = split(s, ", \t");
  if (parts.size() != 1 && static_cast<Eigen::Index>(parts.size()) != dim) {
    throw Error(ErrorCode::DimensionMismatch, "box needs one range or one per axis");
  }
  Box b{Vector(dim), Vector(dim)};
  for (Eigen::Index i = 0; i < dim; ++i) {
    const std::string& r = parts[parts.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    const auto sep = r.find("..", 1);
    if (sep == std::string::npos) throw Error(ErrorCode::Syntax, "box range '" + r + "' is not lo..hi");
    b.lo[i] = to_double(r.substr(0, sep), "box bound");
    b.hi[i] = to_double(r.substr(sep + 2), "box bound");
    if (!(b.lo[i] < b.hi[i])) throw Error(ErrorCode::Syntax, "box range '" + r + "' is empty");
  }
  return b;
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t samples = 256;
  int levels = 8;
  double tol = 1e-8;
  std::string format = "human";

  AnalysisOptions analysis() const {
    AnalysisOptions o;
    o.seed = seed;
    o.samples = samples;
    o.levels = levels;
    o.tolerance = tol;
    return o;
  }
};

int emit(const Report& r, const Common& c) {
  std::cout << emit_report(r, parse_report_format(c.format));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-bound stability analysis of convex inequality systems"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--seed", common.seed, "Seed for all sampling")->capture_default_str();
  app.add_option("--samples", common.samples, "Samples per estimator level")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_option("--levels", common.levels, "Shrinking-ball levels for local moduli")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_option("--tol", common.tol, "Relative gap tolerance of distance computations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--format", common.format, "Output format")
      ->capture_default_str()
      ->check(CLI::IsMember({"human", "json", "csv"}));

  std::string file;
  std::string at;
  std::string box;
  std::string eps_list;
  std::vector<std::string> dirs;
  std::string scenario;
  double tau = 0.0;

  auto* local = app.add_subcommand("analyze-local", "Local stability and modulus at a boundary point");
  local->add_option("file", file, "Problem file")->required();
  local->add_option("--at", at, "Reference point, e.g. [0, 0]")->required();

  auto* global = app.add_subcommand("analyze-global", "Global stability and modulus over a box");
  global->add_option("file", file, "Problem file")->required();
  global->add_option("--tau", tau, "Boundary slope threshold")->required()->check(CLI::PositiveNumber);
  global->add_option("--box", box, "Box: lo..hi, or lo..hi per axis")->required();

  auto* perturb = app.add_subcommand("perturb", "Sweep epsilon-linear perturbations f + eps <u, x - at>");
  perturb->add_option("file", file, "Problem file")->required();
  perturb->add_option("--at", at, "Reference point with f = 0")->required();
  perturb->add_option("--eps", eps_list, "Comma-separated perturbation sizes")->required();
  perturb->add_option("--dir", dirs, "Direction u with |u| <= 1; repeatable")->required();
  perturb->add_option("--box", box, "Box for the global modulus column");

  auto* repro = app.add_subcommand("reproduce", "Run a canned scenario and check its inequalities");
  repro->add_option("scenario", scenario, "REM8, REM10, REM12A, REM12B, HOFFMAN, T32-ZERO-BETA or all")->required();

  auto* report = app.add_subcommand("report", "Full analysis using the point, box and tau declared in the file");
  report->add_option("file", file, "Problem file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (repro->parsed()) {
      ScenarioOptions so;
      so.seed = common.seed;
      so.samples = common.samples;
      const auto results = reproduce(scenario, so);
      emit(Report{"reproduce " + scenario, common.seed, std::nullopt, results}, common);
      for (const auto& r : results) {
        if (!r.passed) return kExitCheckFailed;
      }
      return kExitOk;
    }

    const ProblemFile p = parse_problem(read_file(file));
    const AnalysisOptions opt = common.analysis();
    if (local->parsed()) {
      ProblemAnalysis a;
      a.name = p.name;
      a.local = analyze_local(p, parse_vector(at, p.dim, "point"), opt);
      return emit(Report{"analyze-local", common.seed, p, a}, common);
    }
    if (global->parsed()) {
      ProblemAnalysis a;
      a.name = p.name;
      a.global = analyze_global(p, tau, parse_box(box, p.dim), opt);
      return emit(Report{"analyze-global", common.seed, p, a}, common);
    }
    if (perturb->parsed()) {
      std::vector<double> eps;
      for (const auto& e : split(eps_list, ", ")) eps.push_back(to_double(e, "epsilon"));
      std::vector<Vector> us;
      for (const auto& d : dirs) us.push_back(parse_vector(d, p.dim, "direction"));
      std::optional<Box> b;
      if (!box.empty()) b = parse_box(box, p.dim);
      const SweepResult s = run_perturbation_sweep(p, parse_vector(at, p.dim, "point"), us, eps, b, opt);
      emit(Report{"perturb", common.seed, p, s}, common);
      return sweep_rows_consistent(s) ? kExitOk : kExitCheckFailed;
    }
    return emit(Report{"report", common.seed, p, analyze_problem(p, opt)}, common);
  } catch (const ParseError& e) {
    std::cerr << file << ": " << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::NonConvergence || e.code() == ErrorCode::UndeterminedInradius) {
      return kExitNonConvergence;
    }
    if (e.code() == ErrorCode::Syntax) return kExitParse;
    return kExitError;
  }
}
