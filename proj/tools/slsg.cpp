// Batch driver: level and precision sweeps, error tables and reference values.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slsg/problems.hpp"
#include "slsg/report.hpp"

using namespace slsg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

// Values from the command line; unset fields fall back to the config file, then the problem.
struct Flags {
  std::string config;
  std::string problem;
  std::string levels;
  std::string eps;
  std::string interp;
  std::string boundary;
  std::optional<int> steps;
  std::optional<int> controls;
  std::string command;
  std::optional<int> command_level;
  bool truncate = false;
  std::optional<int> workers;
  std::string out;
  std::string metric;
  bool no_timing = false;
  bool full = false;
  bool quiet = false;
};

// Keys of the config file as "section.key".
using Ini = std::map<std::string, std::string>;

Ini read_ini(const std::string& path) {
  Ini ini;
  if (path.empty()) return ini;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw Error("cannot read config '" + path + "': " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    ini[key] = value;
  }
  return ini;
}

std::string pick(const std::string& flag, const Ini& ini, const std::string& key, const std::string& fallback = "") {
  if (!flag.empty()) return flag;
  const auto it = ini.find(key);
  return it == ini.end() ? fallback : it->second;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep))
    if (!trim(part).empty()) out.push_back(trim(part));
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t n = 0;
    const int v = std::stoi(s, &n);
    if (n == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error("bad integer '" + s + "' for " + what);
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t n = 0;
    const double v = std::stod(s, &n);
    if (n == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error("bad number '" + s + "' for " + what);
}

bool to_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw Error("bad flag '" + s + "' for " + what);
}

// "4,5,6" or "4-9" or a mix.
std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_int(part, "levels"));
    } else {
      const int a = to_int(part.substr(0, dash), "levels"), b = to_int(part.substr(dash + 1), "levels");
      if (b < a) throw Error("empty level range '" + part + "'");
      for (int l = a; l <= b; ++l) out.push_back(l);
    }
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_double(part, what));
  return out;
}

Point parse_point(const std::string& text, const std::string& what) {
  Point p;
  for (double v : parse_doubles(text, what)) p.push_back(v);
  return p;
}

int parse_order(const std::string& s) {
  if (s == "linear" || s == "1") return 1;
  if (s == "quad" || s == "quadratic" || s == "2") return 2;
  if (s == "cubic" || s == "3") return 3;
  throw Error("unknown interpolator '" + s + "' (linear, quad, cubic)");
}

std::string order_name(int p) { return p == 1 ? "linear" : p == 2 ? "quad" : "cubic"; }

int default_workers() {
  const char* env = std::getenv("SLSG_WORKERS");
  if (!env || !*env) return 1;
  const int w = to_int(env, "SLSG_WORKERS");
  if (w < 1) throw Error("SLSG_WORKERS must be at least 1");
  return w;
}

// Published test case 2 runs take hours on one core; the default is the reduced desk setting.
void apply_desk_scale(TestProblem& tp, SolveConfig& c) {
  if (tp.name == "test2_2d_control") {
    c.steps = 200;
    tp.problem.controls = ControlSet::circle(100);
  }
}

TestProblem load_problem(const Ini& ini, const std::string& flag) {
  const std::string name = pick(flag, ini, "problem.name");
  if (name.empty()) throw Error("no problem given (--problem or [problem] name)");
  if (name != "custom") return builtin(name);
  std::map<std::string, std::string> keys;
  for (const auto& [k, v] : ini)
    if (k.rfind("problem.", 0) == 0 && k != "problem.name") keys[k.substr(8)] = v;
  return custom_problem(keys);
}

// Resets the control discretization to n points per axis (or n angles).
void set_control_count(ControlSet& cs, int n) {
  if (n < 1) throw Error("--controls must be positive");
  switch (cs.mode) {
    case ControlSet::Mode::circle_grid: cs.angles = n; break;
    case ControlSet::Mode::box_grid: cs.counts.assign(cs.box.dimension(), n); break;
    case ControlSet::Mode::sparse_command: cs.thin = n; break;
    case ControlSet::Mode::list: throw Error("--controls needs a box, circle or sparse control set");
  }
}

void set_command_mode(ControlSet& cs, const std::string& mode, std::optional<int> level) {
  if (mode.empty()) return;
  if (mode == "grid") {
    if (cs.mode == ControlSet::Mode::sparse_command) {
      const int n = cs.thin;
      cs = ControlSet::box_grid(cs.box, std::vector<int>(cs.box.dimension(), n));
    }
  } else if (mode == "sparse") {
    if (cs.mode != ControlSet::Mode::box_grid && cs.mode != ControlSet::Mode::sparse_command)
      throw Error("sparse command search needs a box control set");
    if (cs.mode == ControlSet::Mode::box_grid) cs = ControlSet::sparse(cs.box, level.value_or(4), cs.counts.front());
  } else {
    throw Error("unknown command mode '" + mode + "' (grid, sparse)");
  }
  if (level) cs.sparse_level = *level;
}

nlohmann::ordered_json config_json(const TestProblem& tp, const SolveConfig& c, const SweepSpec& s) {
  nlohmann::ordered_json j;
  j["problem"] = tp.name;
  j["interp"] = order_name(c.order);
  j["boundary"] = to_string(c.boundary);
  j["steps"] = c.steps;
  j["horizon"] = tp.problem.horizon;
  j["truncate"] = c.truncate;
  j["workers"] = c.workers;
  j["clamp_feet"] = c.clamp_feet;
  j["full_grid"] = c.full_grid;
  const ControlSet& cs = tp.problem.controls;
  nlohmann::ordered_json cj;
  switch (cs.mode) {
    case ControlSet::Mode::list: cj["mode"] = "list"; cj["count"] = cs.list.size(); break;
    case ControlSet::Mode::circle_grid: cj["mode"] = "circle"; cj["angles"] = cs.angles; break;
    case ControlSet::Mode::box_grid: cj["mode"] = "box"; cj["counts"] = std::vector<int>(cs.counts); break;
    case ControlSet::Mode::sparse_command:
      cj["mode"] = "sparse";
      cj["level"] = cs.sparse_level;
      cj["thin"] = cs.thin;
      break;
  }
  j["controls"] = cj;
  if (s.precisions.empty()) {
    j["levels"] = s.levels;
  } else {
    j["adapt"] = {{"eps", s.precisions},
                  {"initial_level", c.level},
                  {"max_level", c.max_level},
                  {"coarsen_factor", c.coarsen_factor}};
    if (c.refine_box.dimension() > 0) {
      j["adapt"]["refine_lower"] = std::vector<double>(c.refine_box.lower.begin(), c.refine_box.lower.end());
      j["adapt"]["refine_upper"] = std::vector<double>(c.refine_box.upper.begin(), c.refine_box.upper.end());
    }
  }
  j["metric"] = tp.exact && !s.report_value ? (s.metric == ErrorMetric::nodes ? "nodes" : "sample") : "value";
  if (tp.exact && !s.report_value && s.metric == ErrorMetric::sample) j["per_axis"] = s.per_axis;
  j["report_point"] = std::vector<double>(tp.report_point.begin(), tp.report_point.end());
  return j;
}

int run(const Flags& f) {
  TestProblem tp;
  SolveConfig c;
  SweepSpec spec;
  std::string out;
  std::string run_log;
  try {
    const Ini ini = read_ini(f.config);
    tp = load_problem(ini, f.problem);
    c = tp.recommended;
    const bool full = f.full || to_bool(pick("", ini, "solver.full", "false"), "full");
    if (!full) apply_desk_scale(tp, c);

    c.order = parse_order(pick(f.interp, ini, "basis.interp", order_name(c.order)));
    c.boundary = parse_boundary_mode(pick(f.boundary, ini, "basis.boundary", to_string(c.boundary)));
    if (const auto s = pick("", ini, "solver.steps"); !s.empty()) c.steps = to_int(s, "steps");
    if (f.steps) c.steps = *f.steps;
    if (const auto s = pick("", ini, "problem.horizon"); !s.empty() && tp.name != "custom")
      tp.problem.horizon = to_double(s, "horizon");
    if (const auto s = pick("", ini, "solver.controls"); !s.empty())
      set_control_count(tp.problem.controls, to_int(s, "controls"));
    if (f.controls) set_control_count(tp.problem.controls, *f.controls);
    std::optional<int> command_level = f.command_level;
    if (!command_level) {
      if (const auto s = pick("", ini, "solver.command_level"); !s.empty())
        command_level = to_int(s, "command_level");
    }
    set_command_mode(tp.problem.controls, pick(f.command, ini, "solver.command"), command_level);
    c.truncate = f.truncate || to_bool(pick("", ini, "solver.truncate", "false"), "truncate");
    c.clamp_feet = to_bool(pick("", ini, "solver.clamp_feet", c.clamp_feet ? "true" : "false"), "clamp_feet");
    c.workers = default_workers();
    if (const auto s = pick("", ini, "solver.workers"); !s.empty()) c.workers = to_int(s, "workers");
    if (f.workers) c.workers = *f.workers;
    c.full_grid = to_bool(pick("", ini, "grid.full", "false"), "full grid");

    const std::string eps = pick(f.eps, ini, "adapt.eps");
    if (!eps.empty()) {
      spec.precisions = parse_doubles(eps, "eps");
      c.level = tp.adapt_initial_level > 0 ? tp.adapt_initial_level : c.level;
      if (tp.adapt_max_level > 0) c.max_level = tp.adapt_max_level;
      if (const auto s = pick("", ini, "adapt.initial_level"); !s.empty()) c.level = to_int(s, "initial_level");
      if (const auto s = pick("", ini, "adapt.max_level"); !s.empty()) c.max_level = to_int(s, "max_level");
      if (const auto s = pick("", ini, "adapt.coarsen_factor"); !s.empty())
        c.coarsen_factor = to_double(s, "coarsen_factor");
      const auto lo = pick("", ini, "adapt.refine_lower"), hi = pick("", ini, "adapt.refine_upper");
      if (!lo.empty() || !hi.empty()) c.refine_box = Box{parse_point(lo, "refine_lower"), parse_point(hi, "refine_upper")};
    } else {
      const std::string levels = pick(f.levels, ini, "grid.levels");
      spec.levels = levels.empty() ? std::vector<int>{c.level} : parse_levels(levels);
    }

    const std::string metric = pick(f.metric, ini, "output.metric", "sample");
    if (metric == "sample")
      spec.metric = ErrorMetric::sample;
    else if (metric == "nodes")
      spec.metric = ErrorMetric::nodes;
    else if (metric == "value")
      spec.report_value = true;
    else
      throw Error("unknown metric '" + metric + "' (sample, nodes, value)");
    if (const auto s = pick("", ini, "output.per_axis"); !s.empty()) spec.per_axis = to_int(s, "per_axis");
    spec.timing = !(f.no_timing || to_bool(pick("", ini, "output.no_timing", "false"), "no_timing"));
    out = pick(f.out, ini, "output.out");
    run_log = pick("", ini, "output.run_log");

    tp.problem.validate();
    tp.problem.controls.validate();
    SolveConfig probe = c;
    if (!spec.precisions.empty()) probe.adapt = true;
    probe.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const auto echo = config_json(tp, c, spec);
  if (!f.quiet) std::cerr << "config " << echo.dump() << '\n';
  std::vector<StepDiagnostics> log;
  if (!run_log.empty()) c.on_step = [&log](const StepDiagnostics& d) { log.push_back(d); };
  spec.on_row = [&f](const ResultRow& r) {
    if (f.quiet) return;
    if (r.failed())
      std::cerr << "row " << r.key << " failed: " << r.message << '\n';
    else
      std::cerr << "row " << r.key << " done\n";
  };

  const auto rows = run_sweep(tp, c, spec);
  const bool value_mode = !tp.exact || spec.report_value;
  std::ostringstream table;
  write_table(rows, table, spec.precisions.empty() ? "Level" : "Eps", value_mode ? "Value" : "Err");
  std::cout << table.str();

  try {
    if (!out.empty()) {
      std::ostringstream csv, json;
      write_csv(rows, csv);
      write_json(rows, echo.dump(), json);
      write_file(out + ".csv", csv.str());
      write_file(out + ".json", json.str());
      write_file(out + ".txt", table.str());
    }
    if (!run_log.empty()) {
      std::ostringstream s;
      write_run_log(log, s, spec.timing);
      write_file(run_log, s.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kExitPartial;
  }

  for (const auto& r : rows)
    if (r.failed()) return kExitPartial;
  return kExitOk;
}

int reference(const std::string& problem, const std::string& method, std::size_t paths, int steps,
              std::uint64_t seed, int space_points) {
  try {
    const TestProblem tp = builtin(problem);
    ReferenceOracle o;
    if (method == "mc")
      o.method = ReferenceOracle::Method::monte_carlo;
    else if (method == "quadrature")
      o.method = ReferenceOracle::Method::one_dim_quadrature;
    else
      throw Error("unknown method '" + method + "' (mc, quadrature)");
    o.paths = paths;
    o.time_steps = steps;
    o.seed = seed;
    o.space_points = space_points;
    const ReferenceEstimate r = reference_value(tp, o);
    std::printf("%s %s value %.7f error %.2e\n", problem.c_str(), method.c_str(), r.value, r.error);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-Lagrangian adaptive sparse grid solver for controlled diffusions"};
  app.require_subcommand(0, 1);
  Flags f;
  app.add_option("--config", f.config, "INI file with [problem] [basis] [grid] [adapt] [solver] [output]");
  app.add_option("--problem", f.problem, "builtin name or 'custom' (keys in [problem])");
  app.add_option("--level,--levels", f.levels, "levels, e.g. 4-9 or 6,8,10");
  app.add_option("--eps", f.eps, "adaptive precisions, e.g. 1e-3,2.5e-4");
  app.add_option("--interp", f.interp, "linear, quad or cubic")->check(CLI::IsMember({"linear", "quad", "cubic"}));
  app.add_option("--boundary", f.boundary, "exact or modified")->check(CLI::IsMember({"exact", "modified"}));
  app.add_option("--steps", f.steps, "time steps");
  app.add_option("--controls", f.controls, "points per control axis, or angles");
  app.add_option("--command", f.command, "control search: grid or sparse")->check(CLI::IsMember({"grid", "sparse"}));
  app.add_option("--command-level", f.command_level, "level of the control-space sparse grid");
  app.add_flag("--truncate", f.truncate, "truncated interpolation");
  app.add_option("--workers", f.workers, "worker threads (default $SLSG_WORKERS or 1)");
  app.add_option("--out", f.out, "output prefix for .csv, .json and .txt");
  app.add_option("--metric", f.metric, "sample, nodes or value")->check(CLI::IsMember({"sample", "nodes", "value"}));
  app.add_flag("--no-timing", f.no_timing, "write zero times (bit-reproducible files)");
  app.add_flag("--full", f.full, "published settings even where they take hours");
  app.add_flag("-q,--quiet", f.quiet, "no progress on stderr");

  auto* list = app.add_subcommand("list", "list builtin problems");
  auto* ref = app.add_subcommand("reference", "reference value of the portfolio problem");
  std::string ref_problem = "heston_portfolio_2d", method = "mc";
  std::size_t paths = 1000000;
  int ref_steps = 100, space_points = 1500;
  std::uint64_t seed = 20120501;
  ref->add_option("--problem", ref_problem, "problem name");
  ref->add_option("--method", method, "mc or quadrature")->check(CLI::IsMember({"mc", "quadrature"}));
  ref->add_option("--paths", paths, "Monte Carlo paths");
  ref->add_option("--time-steps", ref_steps, "time steps");
  ref->add_option("--seed", seed, "random seed");
  ref->add_option("--space-points", space_points, "quadrature grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*list) {
    for (const auto& name : builtin_names()) std::cout << name << "  " << builtin(name).description << '\n';
    return kExitOk;
  }
  if (*ref) return reference(ref_problem, method, paths, ref_steps, seed, space_points);
  return run(f);
}
