#include "slsg/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace slsg {

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in CSV");
  return v;
}

std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad count '" + s + "' in CSV");
  return v;
}

std::string key_of(double eps) {
  std::ostringstream s;
  s << eps;
  return s.str();
}

}  // namespace

std::optional<double> convergence_rate(double previous, double current) {
  if (!(previous > 0.0) || !(current > 0.0) || !std::isfinite(previous) || !std::isfinite(current)) return std::nullopt;
  if (previous == current) return 0.0;
  return std::log(previous / current);
}

void assign_rates(std::vector<ResultRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rate.reset();
    if (i > 0 && !rows[i - 1].failed() && !rows[i].failed())
      rows[i].rate = convergence_rate(rows[i - 1].value, rows[i].value);
  }
}

std::vector<ResultRow> run_sweep(const TestProblem& problem, const SolveConfig& config, const SweepSpec& spec) {
  const bool adaptive = !spec.precisions.empty();
  const std::size_t n = adaptive ? spec.precisions.size() : spec.levels.size();
  if (n == 0) throw Error("empty sweep");
  const bool error_mode = problem.exact && !spec.report_value;
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ResultRow row;
    SolveConfig c = config;
    if (adaptive) {
      c.adapt = true;
      c.eps = spec.precisions[i];
      row.key = key_of(c.eps);
    } else {
      c.level = spec.levels[i];
      row.key = std::to_string(c.level);
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Solution s = solve(problem.problem, c);
      if (error_mode)
        row.value = spec.metric == ErrorMetric::nodes ? max_nodal_error(s, problem.exact)
                                                      : max_error(s, problem.exact, spec.per_axis);
      else
        row.value = problem.value_sign * s.value(problem.report_point);
      row.nodes_max = s.peak_nodes;
      row.nodes_final = s.final_grid().size();
    } catch (const std::exception& e) {
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.message = e.what();
      if (row.message.empty()) row.message = "failed";
    }
    if (spec.timing) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
    assign_rates(rows);
    if (spec.on_row) spec.on_row(rows.back());
  }
  return rows;
}

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "key,err_or_value,rate,seconds,nodes_max,nodes_final\n";
  for (const ResultRow& r : rows) {
    out << r.key << ',' << (r.failed() ? "" : format_double(r.value)) << ',' << (r.rate ? format_double(*r.rate) : "")
        << ',' << format_double(r.seconds) << ',' << r.nodes_max << ',' << r.nodes_final << '\n';
  }
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "key,err_or_value,rate,seconds,nodes_max,nodes_final")
    throw Error("CSV header mismatch");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw Error("CSV row with " + std::to_string(f.size()) + " fields: " + line);
    ResultRow r;
    r.key = f[0];
    if (f[1].empty()) {
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.message = "failed";
    } else {
      r.value = parse_double(f[1]);
    }
    if (!f[2].empty()) r.rate = parse_double(f[2]);
    r.seconds = parse_double(f[3]);
    r.nodes_max = parse_count(f[4]);
    r.nodes_final = parse_count(f[5]);
    rows.push_back(r);
  }
  return rows;
}

void write_json(const std::vector<ResultRow>& rows, const std::string& config_json, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["config"] = config_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(config_json);
  auto& arr = doc["rows"] = nlohmann::ordered_json::array();
  for (const ResultRow& r : rows) {
    nlohmann::ordered_json j;
    j["key"] = r.key;
    j["err_or_value"] = r.failed() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.value);
    j["rate"] = r.rate ? nlohmann::ordered_json(*r.rate) : nlohmann::ordered_json(nullptr);
    j["seconds"] = r.seconds;
    j["nodes_max"] = r.nodes_max;
    j["nodes_final"] = r.nodes_final;
    if (r.failed()) j["error"] = r.message;
    arr.push_back(j);
  }
  out << doc.dump(2) << '\n';
}

void write_table(const std::vector<ResultRow>& rows, std::ostream& out, const std::string& key_header,
                 const std::string& value_header) {
  out << std::left << std::setw(10) << key_header << " | " << std::setw(10) << value_header << " | " << std::setw(6)
      << "Rate"
      << " | " << std::setw(9) << "Time"
      << " | " << std::setw(9) << "Nodes max"
      << " | "
      << "Nodes final\n";
  for (const ResultRow& r : rows) {
    std::ostringstream value, rate, time;
    if (r.failed())
      value << "failed";
    else
      value << std::fixed << std::setprecision(4) << r.value;
    if (r.rate)
      rate << std::fixed << std::setprecision(2) << *r.rate;
    else
      rate << '-';
    time << std::fixed << std::setprecision(1) << r.seconds;
    out << std::left << std::setw(10) << r.key << " | " << std::setw(10) << value.str() << " | " << std::setw(6)
        << rate.str() << " | " << std::setw(9) << time.str() << " | " << std::setw(9) << r.nodes_max << " | "
        << r.nodes_final << '\n';
    if (r.failed()) out << "  error: " << r.message << '\n';
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

}  // namespace slsg
