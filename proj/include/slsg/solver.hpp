#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slsg/adapt.hpp"
#include "slsg/grid.hpp"
#include "slsg/interp.hpp"

namespace slsg {

/// Coefficients of the controlled diffusion at one (t, x, a).
struct Coefficients {
  Point drift;  // b_a(t,x), length d
  std::array<double, kMaxDim * kMaxNoise> sigma{};  // column-major: column i at [i*d, i*d + d)
  double discount = 0.0;  // c_a(t,x)
  double running = 0.0;   // f_a(t,x)

  double& sig(int row, int col, int d) { return sigma[col * d + row]; }
  double sig(int row, int col, int d) const { return sigma[col * d + row]; }
};

/// How the control set is discretized.
struct ControlSet {
  enum class Mode { list, box_grid, circle_grid, sparse_command };
  Mode mode = Mode::list;
  std::vector<Control> list;  // list mode; a single empty control for uncontrolled problems
  Box box;                    // box_grid and sparse_command
  std::vector<int> counts;    // box_grid: points per axis, endpoints included
  int angles = 0;             // circle_grid: equally spaced angles from 0
  int sparse_level = 4;       // sparse_command: level of the control-space sparse grid
  int thin = 64;              // sparse_command: thin-grid points per axis

  static ControlSet none();
  static ControlSet from_list(std::vector<Control> controls);
  static ControlSet box_grid(Box box, std::vector<int> counts);
  static ControlSet circle(int angles);
  static ControlSet sparse(Box box, int level, int thin = 64);

  int dimension() const;
  /// Controls in enumeration order; sparse_command enumerates its thin grid.
  std::vector<Control> enumerate() const;
  void validate() const;
};

/// Optional Lipschitz and sup bounds used only for the time-step diagnostic.
struct StabilityConstants {
  double sigma_lipschitz = 0.0;
  double drift_lipschitz = 0.0;
  double discount_sup = 0.0;
};

/// dv/dt = inf_a [ 1/2 tr(sigma sigma^T D2 v) + b.Dv + c v + f ] forward from v(0) = g, on a box.
struct ControlProblem {
  int dimension = 1;
  int noise = 1;  // q, columns of sigma
  Box domain;
  double horizon = 1.0;
  std::function<void(double t, const Point& x, const Control& a, Coefficients& out)> coefficients;
  std::function<double(const Point& x)> payoff;
  std::function<double(double t, const Point& x)> boundary;  // exact-mode boundary data (optional)
  ControlSet controls = ControlSet::none();
  std::optional<StabilityConstants> stability;

  void validate() const;
  Coefficients evaluate(double t, const Point& x, const Control& a) const;
};

struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;
  double h() const { return horizon / steps; }
};

/// Largest h allowed by the stability bound: 1 / max(16 (L_sigma^2 + L_b^2 + 1), 2 sup|c|).
double stability_bound(const StabilityConstants& k);

struct StepDiagnostics {
  int step = 0;
  double t = 0.0;
  std::size_t node_count = 0;   // stored grid
  std::size_t working_count = 0;  // after coarsening
  double max_surplus = 0.0;     // largest leaf surplus of the stored grid
  std::size_t clamp_count = 0;  // truncation engagements during the step
  std::size_t nodes_added = 0;
  std::size_t fathers_added = 0;
  std::size_t nodes_removed = 0;
  double wall_ms = 0.0;
  double envelope_gap = -1.0;  // max(v+ - v-) over nodes when envelopes run, else -1
};

struct SolveConfig {
  int order = 1;
  BoundaryMode boundary = BoundaryMode::exact;
  int level = 4;           // regular level, or initial level when adapting
  bool full_grid = false;  // |l|_inf <= level instead of the sparse grid
  int steps = 100;
  bool truncate = false;
  bool adapt = false;
  double eps = 1e-3;
  int max_level = 10;
  double coarsen_factor = 10;
  Box refine_box;  // physical coordinates; empty means the whole domain
  /// Feet leaving the box are clamped onto it. In exact boundary mode with boundary data, they
  /// take the boundary data at the foot unless this is set.
  bool clamp_feet = false;
  int workers = 1;
  bool keep_trajectory = false;       // keep every stored and coarsened grid
  std::string snapshot_prefix;        // when set, stored grids go to <prefix><step>.bin
  std::function<void(const StepDiagnostics&)> on_step;

  void validate() const;
  AdaptPolicy policy(const Box& domain) const;
};


void write_run_log(const std::vector<StepDiagnostics>& diagnostics, std::ostream& out, bool timing = true);

/// Solution trajectory. Grids live on [0,1]^d; queries take physical points.
class Solution {
public:
  Box domain;
  double horizon = 0.0;
  int steps = 0;
  bool truncate = false;
  std::function<double(const Point&)> payoff;
  /// stored[k] holds v(k h); always present for k = 0, 1 and steps, others when kept.
  std::vector<std::shared_ptr<const AdaptiveSparseGrid>> stored;
  /// working[k] is the coarsened grid used to step from k h (kept trajectories only).
  std::vector<std::shared_ptr<const AdaptiveSparseGrid>> working;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<std::string> warnings;
  std::size_t peak_nodes = 0;

  double h() const { return horizon / steps; }
  const AdaptiveSparseGrid& final_grid() const { return *stored.back(); }
  /// v(T, x).
  double value(const Point& x) const;
  /// v(t, x) at a stored time, or the linear blend of g and v(h) for t in (0, h).
  double value_at(double t, const Point& x) const;

private:
  mutable std::shared_ptr<const Interpolant> final_;
};

/// The 2q feet x + b h +- sigma_i sqrt(h q), order: + then - for each column.
std::vector<Point> characteristic_points(const ControlProblem& problem, const Control& a, double t,
                                         const Point& x, double h);

/// Physical point to [0,1]^d, clamped componentwise.
Point to_unit_clamped(const Box& domain, const Point& x);

/// L_{a,h} v at physical x, with v(t,x) given by `value_at_x` and feet values from itp (truncated
/// when the interpolant truncates).
double apply_L(const ControlProblem& problem, const Control& a, double t, const Point& x, double h,
               const Interpolant& itp, double value_at_x);
double apply_L(const ControlProblem& problem, const Control& a, double t, const Point& x, double h,
               const Interpolant& itp);

struct ControlChoice {
  Control control;
  double value = 0.0;  // min over controls of v + L_{a,h} v
};

/// Sparse-grid search over a box control set: the map a -> v + L_{a,h} v is sampled on a regular
/// sparse grid of the control box, interpolated on the thin grid, and the thin-grid argmin is
/// re-evaluated exactly.
ControlChoice optimize_control_sparse(const ControlProblem& problem, double t, const Point& x, double h,
                                      const Interpolant& itp, double value_at_x, const ControlSet& cs,
                                      int order = 3);

/// Exhaustive minimum over the enumerated controls; ties keep the earlier control.
ControlChoice optimize_control(const ControlProblem& problem, double t, const Point& x, double h,
                               const Interpolant& itp, double value_at_x, const ControlSet& cs);

struct StepResult {
  std::shared_ptr<AdaptiveSparseGrid> stored;   // v(t+h) on the refined grid
  std::shared_ptr<AdaptiveSparseGrid> working;  // coarsened grid for the next step
  StepDiagnostics diagnostics;
};

/// One step from t: `previous` holds v(t) (values and surpluses, linked).
StepResult step(const ControlProblem& problem, double t, const std::shared_ptr<const AdaptiveSparseGrid>& previous,
                const SolveConfig& config);

/// Grid holding g at t = 0, dimension-adapted when adapting (coarsening is left to the caller).
std::shared_ptr<AdaptiveSparseGrid> initial_grid(const ControlProblem& problem, const SolveConfig& config);

Solution solve(const ControlProblem& problem, const SolveConfig& config);

struct EnvelopeRun {
  Solution main;   // run with its trajectory kept
  Solution lower;  // v- on the same grids
  Solution upper;  // v+
};

/// Runs the main scheme, then replays its grids with the lower and upper envelope interpolants.
EnvelopeRun solve_envelopes(const ControlProblem& problem, const SolveConfig& config);

}  // namespace slsg
