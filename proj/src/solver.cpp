#include "slsg/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "slsg/basis.hpp"
#include "slsg/grid_io.hpp"
#include "slsg/parallel.hpp"

namespace slsg {

// ---------------------------------------------------------------- control sets

ControlSet ControlSet::none() { return from_list({Control(0)}); }

ControlSet ControlSet::from_list(std::vector<Control> controls) {
  ControlSet cs;
  cs.mode = Mode::list;
  cs.list = std::move(controls);
  return cs;
}

ControlSet ControlSet::box_grid(Box box, std::vector<int> counts) {
  ControlSet cs;
  cs.mode = Mode::box_grid;
  cs.box = std::move(box);
  cs.counts = std::move(counts);
  return cs;
}

ControlSet ControlSet::circle(int angles) {
  ControlSet cs;
  cs.mode = Mode::circle_grid;
  cs.angles = angles;
  return cs;
}

ControlSet ControlSet::sparse(Box box, int level, int thin) {
  ControlSet cs;
  cs.mode = Mode::sparse_command;
  cs.box = std::move(box);
  cs.sparse_level = level;
  cs.thin = thin;
  return cs;
}

int ControlSet::dimension() const {
  switch (mode) {
    case Mode::list:
      return list.empty() ? 0 : list.front().size();
    case Mode::box_grid:
    case Mode::sparse_command:
      return box.dimension();
    case Mode::circle_grid:
      return 2;
  }
  return 0;
}

void ControlSet::validate() const {
  switch (mode) {
    case Mode::list:
      if (list.empty()) throw Error("control list is empty");
      for (const auto& a : list)
        if (a.size() != list.front().size()) throw Error("controls of different dimensions in the list");
      break;
    case Mode::box_grid:
      if (box.dimension() == 0 || box.upper.size() != box.dimension()) throw Error("control box is empty");
      if (static_cast<int>(counts.size()) != box.dimension()) throw Error("control box needs one count per axis");
      for (int j = 0; j < box.dimension(); ++j) {
        if (counts[j] < 1) throw Error("control counts must be positive");
        if (box.upper[j] < box.lower[j]) throw Error("control box bounds are reversed");
      }
      break;
    case Mode::circle_grid:
      if (angles < 1) throw Error("circle control set needs at least one angle");
      break;
    case Mode::sparse_command:
      if (box.dimension() == 0 || box.upper.size() != box.dimension()) throw Error("control box is empty");
      if (sparse_level < 1) throw Error("command sparse level must be positive");
      if (thin < 2) throw Error("thin grid needs at least two points per axis");
      for (int j = 0; j < box.dimension(); ++j)
        if (box.upper[j] < box.lower[j]) throw Error("control box bounds are reversed");
      break;
  }
}

namespace {

double linspace(double lo, double hi, int count, int k) {
  if (count == 1) return 0.5 * (lo + hi);
  if (k == count - 1) return hi;
  return lo + (hi - lo) * k / (count - 1);
}

std::vector<Control> tensor_points(const Box& box, const std::vector<int>& counts) {
  const int m = box.dimension();
  std::vector<Control> out;
  std::vector<int> k(m, 0);
  for (;;) {
    Control a(m);
    for (int j = 0; j < m; ++j) a[j] = linspace(box.lower[j], box.upper[j], counts[j], k[j]);
    out.push_back(a);
    int j = m - 1;
    while (j >= 0 && ++k[j] == counts[j]) k[j--] = 0;
    if (j < 0) break;
  }
  return out;
}

}  // namespace

std::vector<Control> ControlSet::enumerate() const {
  validate();
  switch (mode) {
    case Mode::list:
      return list;
    case Mode::box_grid:
      return tensor_points(box, counts);
    case Mode::circle_grid: {
      std::vector<Control> out;
      for (int k = 0; k < angles; ++k) {
        const double th = 2.0 * M_PI * k / angles;
        out.push_back(Control{std::cos(th), std::sin(th)});
      }
      return out;
    }
    case Mode::sparse_command:
      return tensor_points(box, std::vector<int>(box.dimension(), thin));
  }
  return {};
}

// ---------------------------------------------------------------- problem and config

void ControlProblem::validate() const {
  if (dimension < 1 || dimension > kMaxDim) throw Error("problem dimension outside [1, " + std::to_string(kMaxDim) + "]");
  if (noise < 1 || noise > kMaxNoise) throw Error("noise dimension outside [1, " + std::to_string(kMaxNoise) + "]");
  if (domain.dimension() != dimension || domain.upper.size() != dimension) throw Error("domain dimension mismatch");
  for (int j = 0; j < dimension; ++j)
    if (!(domain.upper[j] > domain.lower[j])) throw Error("domain axis " + std::to_string(j) + " is empty");
  if (!(horizon > 0.0)) throw Error("horizon must be positive");
  if (!coefficients) throw Error("problem has no coefficient function");
  if (!payoff) throw Error("problem has no payoff");
  controls.validate();
}

Coefficients ControlProblem::evaluate(double t, const Point& x, const Control& a) const {
  Coefficients c;
  c.drift = Point(dimension, 0.0);
  coefficients(t, x, a, c);
  return c;
}

double stability_bound(const StabilityConstants& k) {
  const double a = 16.0 * (k.sigma_lipschitz * k.sigma_lipschitz + k.drift_lipschitz * k.drift_lipschitz + 1.0);
  return 1.0 / std::max(a, 2.0 * std::abs(k.discount_sup));
}

void SolveConfig::validate() const {
  if (order < 1 || order > 3) throw Error("interpolator order must be 1, 2 or 3");
  if (level < 1) throw Error("level must be positive");
  if (steps < 1) throw Error("steps must be positive");
  if (workers < 1) throw Error("workers must be positive");
  if (adapt) {
    if (!(eps >= 0.0)) throw Error("adaptation precision must be non-negative");
    if (max_level < level) throw Error("max_level must be at least the initial level");
    if (full_grid) throw Error("adaptation starts from the sparse grid; full_grid is for fixed runs");
  }
}

AdaptPolicy SolveConfig::policy(const Box& domain) const {
  AdaptPolicy p;
  p.eps = eps;
  p.max_level = max_level;
  p.coarsen_factor = coarsen_factor;
  p.base_level = level;
  if (refine_box.dimension() > 0) {
    p.refine_box = Box{to_unit(domain, refine_box.lower), to_unit(domain, refine_box.upper)};
    for (int j = 0; j < p.refine_box.dimension(); ++j) {
      p.refine_box.lower[j] = std::clamp(p.refine_box.lower[j], 0.0, 1.0);
      p.refine_box.upper[j] = std::clamp(p.refine_box.upper[j], 0.0, 1.0);
    }
  }
  return p;
}

void write_run_log(const std::vector<StepDiagnostics>& diagnostics, std::ostream& out, bool timing) {
  out << "step,t,node_count,max_surplus,clamp_count,wall_ms\n";
  out.precision(17);
  for (const auto& d : diagnostics)
    out << d.step << ',' << d.t << ',' << d.node_count << ',' << d.max_surplus << ',' << d.clamp_count << ','
        << (timing ? d.wall_ms : 0.0) << '\n';
}

// ---------------------------------------------------------------- the scheme

Point to_unit_clamped(const Box& domain, const Point& x) {
  Point u = to_unit(domain, x);
  for (double& v : u) v = std::clamp(v, 0.0, 1.0);
  return u;
}

std::vector<Point> characteristic_points(const ControlProblem& problem, const Control& a, double t,
                                         const Point& x, double h) {
  const int d = problem.dimension;
  const Coefficients c = problem.evaluate(t, x, a);
  const double sq = std::sqrt(h * problem.noise);
  std::vector<Point> feet;
  for (int i = 0; i < problem.noise; ++i)
    for (double s : {1.0, -1.0}) {
      Point y(d);
      for (int k = 0; k < d; ++k) y[k] = x[k] + c.drift[k] * h + s * c.sig(k, i, d) * sq;
      feet.push_back(y);
    }
  return feet;
}

namespace {

std::string describe(const DimVector<double>& p) {
  std::ostringstream s;
  s.precision(10);
  s << '(';
  for (int j = 0; j < p.size(); ++j) s << (j ? ", " : "") << p[j];
  s << ')';
  return s.str();
}

enum class Source { main, lower, upper };

// Evaluates v(t, .) at unit points for one of the three schemes.
struct Reader {
  const Interpolant& itp;
  Source source;
  std::size_t* clamps;

  double operator()(const Point& u) const {
    if (source == Source::main) {
      bool clamped = false;
      const double v = itp(u, &clamped);
      if (clamped) ++*clamps;
      return v;
    }
    return itp.evaluate_envelope(u, source == Source::lower ? EnvelopeSide::lower : EnvelopeSide::upper);
  }
};

// Monotone form of v + L_{a,h} v: (1/2q) sum of feet values + h c v + h f.
struct ControlValue {
  const ControlProblem& problem;
  double t;
  double h;
  const Point& x;
  double v;
  const Reader& read;
  bool require_nonnegative_discount;
  bool boundary_feet;  // feet outside the box take the boundary data instead of being clamped
  mutable Coefficients coef;

  double operator()(const Control& a) const {
    const int d = problem.dimension;
    const int q = problem.noise;
    coef.drift = Point(d, 0.0);
    coef.discount = 0.0;
    coef.running = 0.0;
    problem.coefficients(t, x, a, coef);
    if (require_nonnegative_discount && coef.discount < 0.0)
      throw Error("envelope runs need a non-negative discount; got c = " + std::to_string(coef.discount) +
                  " at x = " + describe(x) + "; rescale the unknown by exp(-K t) first");
    const double sq = std::sqrt(h * q);
    double sum = 0.0;
    Point y(d), foot(d);
    for (int i = 0; i < q; ++i) {
      for (double s : {1.0, -1.0}) {
        bool outside = false;
        for (int k = 0; k < d; ++k) {
          foot[k] = x[k] + coef.drift[k] * h + s * coef.sig(k, i, d) * sq;
          const double u = (foot[k] - problem.domain.lower[k]) / (problem.domain.upper[k] - problem.domain.lower[k]);
          outside |= u < 0.0 || u > 1.0;
          y[k] = std::clamp(u, 0.0, 1.0);
        }
        sum += outside && boundary_feet ? problem.boundary(t, foot) : read(y);
      }
    }
    return sum / (2 * q) + h * coef.discount * v + h * coef.running;
  }
};

// Control-space sparse grid reused across the points handled by one worker.
struct CommandSearch {
  Box box;
  std::shared_ptr<AdaptiveSparseGrid> grid;
  std::unique_ptr<Interpolant> itp;
  std::vector<Control> nodes;
  std::vector<Point> thin_unit;
  std::vector<Control> thin_controls;

  CommandSearch(const ControlSet& cs, int order) : box(cs.box) {
    const int m = box.dimension();
    grid = std::make_shared<AdaptiveSparseGrid>(make_regular_grid(m, cs.sparse_level, BoundaryMode::exact, order));
    itp = std::make_unique<Interpolant>(grid);
    for (NodeId id = 0; id < static_cast<NodeId>(grid->size()); ++id) nodes.push_back(from_unit(box, grid->coordinates(id)));
    thin_controls = tensor_points(box, std::vector<int>(m, cs.thin));
    for (const auto& a : thin_controls) {
      Point u(m);
      for (int j = 0; j < m; ++j) u[j] = std::clamp((a[j] - box.lower[j]) / (box.upper[j] - box.lower[j]), 0.0, 1.0);
      thin_unit.push_back(u);
    }
  }

  static bool degenerate(const ControlSet& cs) {
    for (int j = 0; j < cs.box.dimension(); ++j)
      if (!(cs.box.upper[j] > cs.box.lower[j])) return true;
    return cs.box.dimension() == 0;
  }

  ControlChoice run(const ControlValue& value) {
    auto& vals = grid->values();
    for (std::size_t k = 0; k < nodes.size(); ++k) vals[k] = value(nodes[k]);
    hierarchize(*grid);
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < thin_unit.size(); ++k) {
      const double v = itp->evaluate(thin_unit[k]);
      if (v < best_v) best_v = v, best = k;
    }
    return {thin_controls[best], value(thin_controls[best])};
  }
};

ControlChoice exhaustive(const ControlValue& value, const std::vector<Control>& controls) {
  ControlChoice best{controls.front(), std::numeric_limits<double>::infinity()};
  bool first = true;
  for (const auto& a : controls) {
    const double v = value(a);
    if (first || v < best.value) best = {a, v}, first = false;
  }
  return best;
}

std::vector<Control> fallback_controls(const ControlSet& cs) {
  std::vector<int> counts(cs.box.dimension());
  for (int j = 0; j < cs.box.dimension(); ++j) counts[j] = cs.box.upper[j] > cs.box.lower[j] ? cs.thin : 1;
  return tensor_points(cs.box, counts);
}

}  // namespace

double apply_L(const ControlProblem& problem, const Control& a, double t, const Point& x, double h,
               const Interpolant& itp, double value_at_x) {
  std::size_t clamps = 0;
  const Reader read{itp, Source::main, &clamps};
  const int d = problem.dimension;
  const int q = problem.noise;
  const Coefficients c = problem.evaluate(t, x, a);
  const double sq = std::sqrt(h * q);
  double sum = 0.0;
  for (int i = 0; i < q; ++i)
    for (double s : {1.0, -1.0}) {
      Point y(d);
      for (int k = 0; k < d; ++k) y[k] = x[k] + c.drift[k] * h + s * c.sig(k, i, d) * sq;
      sum += read(to_unit_clamped(problem.domain, y)) - value_at_x;
    }
  return sum / (2 * q) + h * c.discount * value_at_x + h * c.running;
}

double apply_L(const ControlProblem& problem, const Control& a, double t, const Point& x, double h,
               const Interpolant& itp) {
  return apply_L(problem, a, t, x, h, itp, itp(to_unit_clamped(problem.domain, x)));
}

ControlChoice optimize_control(const ControlProblem& problem, double t, const Point& x, double h,
                               const Interpolant& itp, double value_at_x, const ControlSet& cs) {
  std::size_t clamps = 0;
  const Reader read{itp, Source::main, &clamps};
  const ControlValue value{problem, t, h, x, value_at_x, read, false, false, {}};
  return exhaustive(value, cs.enumerate());
}

ControlChoice optimize_control_sparse(const ControlProblem& problem, double t, const Point& x, double h,
                                      const Interpolant& itp, double value_at_x, const ControlSet& cs, int order) {
  if (cs.mode != ControlSet::Mode::sparse_command) throw Error("optimize_control_sparse needs a sparse_command set");
  cs.validate();
  std::size_t clamps = 0;
  const Reader read{itp, Source::main, &clamps};
  const ControlValue value{problem, t, h, x, value_at_x, read, false, false, {}};
  if (CommandSearch::degenerate(cs)) return exhaustive(value, fallback_controls(cs));
  CommandSearch search(cs, order);
  return search.run(value);
}

// ---------------------------------------------------------------- stepping

namespace {

using Clock = std::chrono::steady_clock;

bool on_boundary(const AdaptiveSparseGrid& g, NodeId id) {
  for (int j = 0; j < g.dimension(); ++j)
    if (g.level(id, j) == 0) return true;
  return false;
}

bool uses_boundary_feet(const ControlProblem& problem, const SolveConfig& config) {
  return config.boundary == BoundaryMode::exact && static_cast<bool>(problem.boundary) && !config.clamp_feet;
}

// Computes v(t+h) at the given nodes of `target`; v(t) at a node is old(id).
class Stepper {
public:
  Stepper(const ControlProblem& problem, const SolveConfig& config, double t, const Interpolant& itp, Source source)
      : problem_(problem), config_(config), t_(t), h_(problem.horizon / config.steps), itp_(itp), source_(source) {
    boundary_feet_ = uses_boundary_feet(problem, config);
    controls_ = problem.controls.mode == ControlSet::Mode::sparse_command &&
                        !CommandSearch::degenerate(problem.controls)
                    ? std::vector<Control>{}
                    : (problem.controls.mode == ControlSet::Mode::sparse_command ? fallback_controls(problem.controls)
                                                                                 : problem.controls.enumerate());
  }

  template <class Old>
  std::size_t run(AdaptiveSparseGrid& target, std::span<const NodeId> ids, const Old& old) const {
    const int workers = config_.workers;
    std::vector<std::size_t> clamps(workers, 0);
    std::vector<double> out(ids.size());
    const bool sparse = controls_.empty();
    const bool exact_bc = target.boundary_mode() == BoundaryMode::exact && static_cast<bool>(problem_.boundary);
    parallel_for(ids.size(), workers, [&](std::size_t begin, std::size_t end, int w) {
      std::unique_ptr<CommandSearch> search;
      if (sparse && begin < end) search = std::make_unique<CommandSearch>(problem_.controls, target.basis_order());
      const Reader read{itp_, source_, &clamps[w]};
      for (std::size_t k = begin; k < end; ++k) {
        const NodeId id = ids[k];
        const Point x = from_unit(problem_.domain, target.coordinates(id));
        if (exact_bc && on_boundary(target, id)) {
          out[k] = problem_.boundary(t_ + h_, x);
          continue;
        }
        const double v = old(id, target);
        const ControlValue value{problem_, t_, h_, x, v, read, source_ != Source::main, boundary_feet_, {}};
        const ControlChoice c = sparse ? search->run(value) : exhaustive(value, controls_);
        if (!std::isfinite(c.value))
          throw Error("non-finite value at x = " + describe(x) + " with control " + describe(c.control) +
                      " at t = " + std::to_string(t_));
        out[k] = c.value;
      }
    });
    for (std::size_t k = 0; k < ids.size(); ++k) target.values()[ids[k]] = out[k];
    std::size_t total = 0;
    for (auto c : clamps) total += c;
    return total;
  }

private:
  const ControlProblem& problem_;
  const SolveConfig& config_;
  double t_;
  double h_;
  const Interpolant& itp_;
  Source source_;
  bool boundary_feet_ = false;
  std::vector<Control> controls_;
};

std::vector<NodeId> all_ids(const AdaptiveSparseGrid& g) {
  std::vector<NodeId> ids(g.size());
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) ids[id] = id;
  return ids;
}

}  // namespace

std::shared_ptr<AdaptiveSparseGrid> initial_grid(const ControlProblem& problem, const SolveConfig& config) {
  problem.validate();
  config.validate();
  const int d = problem.dimension;
  auto grid = std::make_shared<AdaptiveSparseGrid>(
      config.full_grid ? make_full_grid(d, config.level, config.boundary, config.order)
                       : make_regular_grid(d, config.level, config.boundary, config.order,
                                           config.adapt ? config.max_level : config.level));
  auto g = [&](const Point& u) { return problem.payoff(from_unit(problem.domain, u)); };
  for (NodeId id = 0; id < static_cast<NodeId>(grid->size()); ++id) grid->values()[id] = g(grid->coordinates(id));
  hierarchize(*grid);
  if (config.adapt) dimension_adapt_initial(*grid, g, config.policy(problem.domain));
  return grid;
}

StepResult step(const ControlProblem& problem, double t, const std::shared_ptr<const AdaptiveSparseGrid>& previous,
                const SolveConfig& config) {
  const auto start = Clock::now();
  const Interpolant itp(previous, config.truncate);
  const Stepper stepper(problem, config, t, itp, Source::main);

  StepResult r;
  r.stored = std::make_shared<AdaptiveSparseGrid>(*previous);
  auto& grid = *r.stored;
  const auto& old_values = previous->values();
  std::size_t clamps =
      stepper.run(grid, all_ids(grid), [&](NodeId id, const AdaptiveSparseGrid&) { return old_values[id]; });
  hierarchize(grid);

  const double h = problem.horizon / config.steps;
  auto& diag = r.diagnostics;
  if (config.adapt) {
    const AdaptPolicy policy = config.policy(problem.domain);
    const NodeFiller fill = [&](AdaptiveSparseGrid& g, std::span<const NodeId> fresh) {
      clamps += stepper.run(g, fresh, [&](NodeId id, const AdaptiveSparseGrid& gg) {
        std::size_t ignored = 0;
        const Reader read{itp, Source::main, &ignored};
        return read(gg.coordinates(id));
      });
    };
    const AdaptReport rep = refine(grid, policy, fill);
    diag.nodes_added = rep.nodes_added;
    diag.fathers_added = rep.fathers_added;
    r.working = std::make_shared<AdaptiveSparseGrid>(grid);
    diag.nodes_removed = coarsen(*r.working, policy).nodes_removed;
  } else {
    r.working = r.stored;
  }
  diag.t = t + h;
  diag.node_count = grid.size();
  diag.working_count = r.working->size();
  diag.max_surplus = max_leaf_surplus(grid);
  diag.clamp_count = clamps;
  diag.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return r;
}

Solution solve(const ControlProblem& problem, const SolveConfig& config) {
  problem.validate();
  config.validate();
  Solution sol;
  sol.domain = problem.domain;
  sol.horizon = problem.horizon;
  sol.steps = config.steps;
  sol.truncate = config.truncate;
  sol.payoff = problem.payoff;
  sol.stored.resize(config.steps + 1);
  if (config.keep_trajectory) sol.working.resize(config.steps + 1);

  const double h = problem.horizon / config.steps;
  if (problem.stability) {
    const double bound = stability_bound(*problem.stability);
    if (h > bound)
      sol.warnings.push_back("time step " + std::to_string(h) + " exceeds the stability bound " + std::to_string(bound));
  } else {
    sol.warnings.push_back("stability check skipped: no Lipschitz constants declared");
  }

  auto grid0 = initial_grid(problem, config);
  std::shared_ptr<const AdaptiveSparseGrid> working = grid0;
  if (config.adapt) {
    auto coarse = std::make_shared<AdaptiveSparseGrid>(*grid0);
    coarsen(*coarse, config.policy(problem.domain));
    working = coarse;
  }
  sol.stored[0] = grid0;
  if (config.keep_trajectory) sol.working[0] = working;
  sol.peak_nodes = grid0->size();

  for (int k = 0; k < config.steps; ++k) {
    StepResult r = step(problem, k * h, working, config);
    r.diagnostics.step = k + 1;
    r.diagnostics.t = (k + 1) * h;
    sol.peak_nodes = std::max(sol.peak_nodes, r.stored->size());
    if (!config.snapshot_prefix.empty()) save_grid(*r.stored, config.snapshot_prefix + std::to_string(k + 1) + ".bin");
    if (config.on_step) config.on_step(r.diagnostics);
    sol.diagnostics.push_back(r.diagnostics);
    const bool keep = config.keep_trajectory || k == 0 || k + 1 == config.steps;
    if (keep) sol.stored[k + 1] = r.stored;
    if (config.keep_trajectory) sol.working[k + 1] = r.working;
    working = r.working;
  }
  return sol;
}

EnvelopeRun solve_envelopes(const ControlProblem& problem, const SolveConfig& config) {
  SolveConfig main_config = config;
  main_config.keep_trajectory = true;
  EnvelopeRun run;
  run.main = solve(problem, main_config);
  const Solution& main = run.main;
  const double h = problem.horizon / config.steps;

  auto replay = [&](Source source) {
    Solution sol;
    sol.domain = main.domain;
    sol.horizon = main.horizon;
    sol.steps = main.steps;
    sol.truncate = false;
    sol.payoff = main.payoff;
    sol.peak_nodes = main.peak_nodes;
    sol.stored.resize(main.stored.size());
    sol.working.resize(main.working.size());
    sol.stored[0] = main.stored[0];
    // The envelope working grid: main's working node set carrying envelope values.
    auto restrict = [](const AdaptiveSparseGrid& shape, const AdaptiveSparseGrid& values) {
      auto g = std::make_shared<AdaptiveSparseGrid>(shape);
      for (NodeId id = 0; id < static_cast<NodeId>(g->size()); ++id) {
        const NodeId src = values.find(g->key(id));
        if (src == kNoNode) throw Error("envelope replay: working node missing from the stored grid");
        g->values()[id] = values.values()[src];
      }
      hierarchize(*g);
      return g;
    };
    std::shared_ptr<const AdaptiveSparseGrid> working = restrict(*main.working[0], *main.stored[0]);
    sol.working[0] = working;
    for (int k = 0; k < config.steps; ++k) {
      const auto start = Clock::now();
      const Interpolant itp(working, false);
      const Stepper stepper(problem, config, k * h, itp, source);
      auto grid = std::make_shared<AdaptiveSparseGrid>(*main.stored[k + 1]);
      stepper.run(*grid, all_ids(*grid), [&](NodeId id, const AdaptiveSparseGrid& g) {
        const NodeId src = working->find(g.key(id));
        if (src != kNoNode) return working->values()[src];
        return itp.evaluate_envelope(g.coordinates(id),
                                     source == Source::lower ? EnvelopeSide::lower : EnvelopeSide::upper);
      });
      hierarchize(*grid);
      sol.stored[k + 1] = grid;
      working = main.working[k + 1] == main.stored[k + 1] ? std::shared_ptr<const AdaptiveSparseGrid>(grid)
                                                          : restrict(*main.working[k + 1], *grid);
      sol.working[k + 1] = working;
      StepDiagnostics d = main.diagnostics[k];
      d.clamp_count = 0;
      d.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      sol.diagnostics.push_back(d);
    }
    return sol;
  };
  run.lower = replay(Source::lower);
  run.upper = replay(Source::upper);
  for (int k = 0; k < config.steps; ++k) {
    const auto& lo = run.lower.stored[k + 1]->values();
    const auto& up = run.upper.stored[k + 1]->values();
    double gap = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) gap = std::max(gap, up[i] - lo[i]);
    run.main.diagnostics[k].envelope_gap = gap;
    run.lower.diagnostics[k].envelope_gap = gap;
    run.upper.diagnostics[k].envelope_gap = gap;
  }
  return run;
}

// ---------------------------------------------------------------- queries

namespace {

Point checked_unit(const Box& domain, const Point& x) {
  if (x.size() != domain.dimension()) throw Error("query point has the wrong dimension");
  Point u = to_unit(domain, x);
  for (double& v : u) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw Error("query point " + describe(x) + " outside the domain");
    v = std::clamp(v, 0.0, 1.0);
  }
  return u;
}

}  // namespace

double Solution::value(const Point& x) const {
  if (!final_) final_ = std::make_shared<const Interpolant>(stored.back(), truncate);
  return (*final_)(checked_unit(domain, x));
}

double Solution::value_at(double t, const Point& x) const {
  const double step_h = h();
  if (t < 0.0 || t > horizon * (1.0 + 1e-12)) throw Error("query time outside [0, T]");
  if (t > 0.0 && t < step_h * (1.0 - 1e-12)) {
    const double w = t / step_h;
    const Interpolant itp(stored[1], truncate);
    return (1.0 - w) * payoff(x) + w * itp(checked_unit(domain, x));
  }
  const long k = std::lround(t / step_h);
  if (std::abs(t - k * step_h) > 1e-9 * step_h) throw Error("time " + std::to_string(t) + " is not a stored time");
  if (k == steps) return value(x);
  if (!stored[k]) throw Error("time " + std::to_string(t) + " was not kept; enable keep_trajectory");
  const Interpolant itp(stored[k], truncate);
  return itp(checked_unit(domain, x));
}

}  // namespace slsg
