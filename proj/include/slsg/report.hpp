#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slsg/problems.hpp"

namespace slsg {

/// One row of a sweep: a level or a precision with its error (or value) and costs.
struct ResultRow {
  std::string key;             // level or eps as written
  double value = 0.0;          // max-norm error, or the reported solution value; NaN when failed
  std::optional<double> rate;  // ln(previous / value); absent on the first row
  double seconds = 0.0;
  std::size_t nodes_max = 0;
  std::size_t nodes_final = 0;
  std::string message;  // failure reason, empty on success (not part of the CSV)

  bool failed() const { return !message.empty(); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// ln(previous / current); 0 for equal errors. Empty when either is non-positive or non-finite.
std::optional<double> convergence_rate(double previous, double current);

/// Fills the rate of every row after the first from its predecessor.
void assign_rates(std::vector<ResultRow>& rows);

enum class ErrorMetric { sample, nodes };

struct SweepSpec {
  std::vector<int> levels;          // fixed-level sweep
  std::vector<double> precisions;   // adaptive sweep (overrides levels when non-empty)
  ErrorMetric metric = ErrorMetric::sample;
  int per_axis = 201;               // sample metric
  bool report_value = false;        // report the value at the report point even with an exact solution
  bool timing = true;               // false writes zero seconds
  std::function<void(const ResultRow&)> on_row;
};

/// One solve per sweep entry. Failures are recorded in the row and the sweep continues.
std::vector<ResultRow> run_sweep(const TestProblem& problem, const SolveConfig& config, const SweepSpec& spec);

/// CSV with header key,err_or_value,rate,seconds,nodes_max,nodes_final.
void write_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> parse_csv(std::istream& in);

/// JSON object {"config": <config_json>, "rows": [...]}; config_json must be a JSON text.
void write_json(const std::vector<ResultRow>& rows, const std::string& config_json, std::ostream& out);

/// Aligned table "Level | Err | Rate | Time | Nodes max | Nodes final".
void write_table(const std::vector<ResultRow>& rows, std::ostream& out, const std::string& key_header = "Level",
                 const std::string& value_header = "Err");

/// Writes text to a file, throwing Error with the path on failure.
void write_file(const std::string& path, const std::string& text);

}  // namespace slsg
