#include "doctest.h"

#include <cmath>
#include <cstring>

#include "slsg/basis.hpp"
#include "slsg/problems.hpp"
#include "slsg/solver.hpp"

using namespace slsg;

namespace {

// dv/dt = 1/2 s^2 v'' + b v' + c v + f on [lo, hi], no control.
ControlProblem constant_1d(double b, double s, double c, double f, double lo = -1.0, double hi = 1.0) {
  ControlProblem p;
  p.dimension = 1;
  p.noise = 1;
  p.domain = Box{Point{lo}, Point{hi}};
  p.coefficients = [=](double, const Point&, const Control&, Coefficients& out) {
    out.drift[0] = b;
    out.sig(0, 0, 1) = s;
    out.discount = c;
    out.running = f;
  };
  p.payoff = [](const Point& x) { return x[0]; };
  return p;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::shared_ptr<AdaptiveSparseGrid> grid_of(const ControlProblem& p, int level, int order,
                                            const std::function<double(const Point&)>& v) {
  auto g = std::make_shared<AdaptiveSparseGrid>(make_regular_grid(p.dimension, level, BoundaryMode::exact, order));
  for (NodeId id = 0; id < static_cast<NodeId>(g->size()); ++id)
    g->values()[id] = v(from_unit(p.domain, g->coordinates(id)));
  hierarchize(*g);
  return g;
}

}  // namespace

TEST_CASE("characteristic points are x + b h +- sigma sqrt(h q)") {
  const ControlProblem p = constant_1d(1.0, 2.0, 0.0, 0.0);
  const auto feet = characteristic_points(p, Control{}, 0.0, Point{0.1}, 0.01);
  REQUIRE(feet.size() == 2);
  // 0.1 + 0.01 +- 2 * 0.1
  CHECK(feet[0][0] == doctest::Approx(0.31).epsilon(1e-14));
  CHECK(feet[1][0] == doctest::Approx(-0.09).epsilon(1e-14));

  ControlProblem q;
  q.dimension = 2;
  q.noise = 2;
  q.domain = Box::unit(2);
  q.coefficients = [](double, const Point&, const Control&, Coefficients& out) {
    out.drift[0] = 0.0;
    out.drift[1] = 0.0;
    out.sig(0, 0, 2) = 1.0;
    out.sig(1, 1, 2) = 3.0;
  };
  q.payoff = [](const Point&) { return 0.0; };
  const auto f2 = characteristic_points(q, Control{}, 0.0, Point{0.5, 0.5}, 0.02);
  REQUIRE(f2.size() == 4);
  // sqrt(h q) = 0.2: column 1 moves x0 by 0.2, column 2 moves x1 by 0.6.
  CHECK(f2[0][0] == doctest::Approx(0.7));
  CHECK(f2[1][0] == doctest::Approx(0.3));
  CHECK(f2[2][1] == doctest::Approx(1.1));
  CHECK(f2[3][1] == doctest::Approx(-0.1));
  CHECK(f2[2][0] == doctest::Approx(0.5));
}

TEST_CASE("apply_L on an affine function is the first-order generator") {
  // v = 2x + 1 is reproduced by the linear interpolant; the second-order term vanishes, so
  // L v = h (b v' + c v + f) at any x whose feet stay inside the box.
  const double b = 0.3, c = -0.5, f = 0.7, h = 0.01;
  const ControlProblem p = constant_1d(b, 0.8, c, f, -2.0, 2.0);
  auto v = [](const Point& x) { return 2.0 * x[0] + 1.0; };
  const Interpolant itp(grid_of(p, 5, 1, v));
  for (double x : {-1.0, 0.0, 0.37, 1.2}) {
    const double expected = h * (b * 2.0 + c * v(Point{x}) + f);
    CHECK(apply_L(p, Control{}, 0.0, Point{x}, h, itp) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("apply_L on a quadratic picks up the diffusion term") {
  // v = x^2 with the quadratic basis: (v(x+d) + v(x-d))/2 - v(x) = d^2 = s^2 h, so L v = h s^2.
  const double s = 0.6, h = 0.01;
  const ControlProblem p = constant_1d(0.0, s, 0.0, 0.0, -2.0, 2.0);
  const Interpolant itp(grid_of(p, 4, 2, [](const Point& x) { return x[0] * x[0]; }));
  for (double x : {-0.5, 0.0, 0.9})
    CHECK(apply_L(p, Control{}, 0.0, Point{x}, h, itp) == doctest::Approx(s * s * h).epsilon(1e-10));
}

TEST_CASE("running cost only: the solution is g + f T at every node") {
  ControlProblem p = constant_1d(0.0, 0.0, 0.0, 1.0);
  p.payoff = [](const Point& x) { return std::sin(3.0 * x[0]); };
  p.boundary = [&](double t, const Point& x) { return std::sin(3.0 * x[0]) + t; };
  p.horizon = 0.8;
  SolveConfig c;
  c.level = 6;
  c.steps = 16;
  const Solution s = solve(p, c);
  const auto& g = s.final_grid();
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const Point x = from_unit(p.domain, g.coordinates(id));
    CHECK(g.values()[id] == doctest::Approx(std::sin(3.0 * x[0]) + 0.8).epsilon(1e-13));
  }
}

TEST_CASE("transport of an affine payoff is exact with linear interpolation") {
  // dv/dt = 0.5 v_x + 0.5 v_xx with g(x) = 3x - 1 gives v(t,x) = 3(x + 0.5 t) - 1.
  ControlProblem p = constant_1d(0.5, 1.0, 0.0, 0.0, -3.0, 3.0);
  p.payoff = [](const Point& x) { return 3.0 * x[0] - 1.0; };
  p.boundary = [](double t, const Point& x) { return 3.0 * (x[0] + 0.5 * t) - 1.0; };
  SolveConfig c;
  c.level = 5;
  c.steps = 25;
  const Solution s = solve(p, c);
  double err = 0.0;
  const auto& g = s.final_grid();
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const Point x = from_unit(p.domain, g.coordinates(id));
    err = std::max(err, std::abs(g.values()[id] - (3.0 * (x[0] + 0.5) - 1.0)));
  }
  CHECK(err <= 1e-12);
}

TEST_CASE("between 0 and h the value blends g and v(h)") {
  TestProblem tp = builtin("test1_2d");
  SolveConfig c = tp.recommended;
  c.level = 5;
  c.steps = 10;
  const Solution s = solve(tp.problem, c);
  const double h = s.h();
  for (const Point x : {Point{0.3, -1.1}, Point{2.0, 2.0}}) {
    const double g = tp.problem.payoff(x);
    const double vh = s.value_at(h, x);
    CHECK(s.value_at(0.25 * h, x) == doctest::Approx(0.75 * g + 0.25 * vh).epsilon(1e-14));
  }
  // (0, 0) is a node, where the interpolant of g is g.
  CHECK(s.value_at(0.0, Point{0.0, 0.0}) == doctest::Approx(tp.problem.payoff(Point{0.0, 0.0})).epsilon(1e-14));
  CHECK_THROWS_AS(s.value_at(3.5 * h, Point{0.0, 0.0}), Error);
  CHECK_THROWS_AS(s.value(Point{10.0, 0.0}), Error);
}

TEST_CASE("the step minimum is at most the value of every single control") {
  TestProblem tp = builtin("heston_portfolio_2d");
  SolveConfig c = tp.recommended;
  c.level = 4;
  c.steps = 10;
  const double h = tp.problem.horizon / c.steps;
  auto g0 = initial_grid(tp.problem, c);
  const StepResult r = step(tp.problem, 0.0, g0, c);
  const Interpolant itp(g0);
  const auto controls = tp.problem.controls.enumerate();
  const auto& g = *r.stored;
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const Point x = from_unit(tp.problem.domain, g.coordinates(id));
    const Point u = g.coordinates(id);
    bool boundary = false;
    for (double v : u) boundary = boundary || v == 0.0 || v == 1.0;
    if (boundary) continue;
    const double v0 = g0->values()[g0->find(g.key(id))];
    double best = INFINITY;
    for (const auto& a : controls) {
      const double va = v0 + apply_L(tp.problem, a, 0.0, x, h, itp, v0);
      CHECK(g.values()[id] <= va + 1e-13);
      best = std::min(best, va);
    }
    CHECK(g.values()[id] == doctest::Approx(best).epsilon(1e-13));
  }
}

TEST_CASE("results do not depend on the worker count") {
  for (const char* name : {"test1_2d", "heston_portfolio_2d"}) {
    CAPTURE(name);
    TestProblem tp = builtin(name);
    SolveConfig c = tp.recommended;
    c.level = 5;
    c.steps = 8;
    const Solution one = solve(tp.problem, c);
    c.workers = 3;
    const Solution three = solve(tp.problem, c);
    const Solution again = solve(tp.problem, c);
    CHECK(bit_identical(one.final_grid().values(), three.final_grid().values()));
    CHECK(bit_identical(three.final_grid().values(), again.final_grid().values()));
  }
}

TEST_CASE("adaptive runs are deterministic across worker counts") {
  TestProblem tp = builtin("heston_portfolio_2d");
  SolveConfig c = tp.recommended;
  c.adapt = true;
  c.level = 4;
  c.max_level = 7;
  c.eps = 1e-3;
  c.steps = 6;
  const Solution one = solve(tp.problem, c);
  c.workers = 4;
  const Solution four = solve(tp.problem, c);
  REQUIRE(one.final_grid().size() == four.final_grid().size());
  CHECK(bit_identical(one.final_grid().values(), four.final_grid().values()));
  CHECK(one.peak_nodes == four.peak_nodes);
}

TEST_CASE("adaptation with zero precision covers the full grid and matches it bit for bit") {
  TestProblem tp = builtin("test1_2d");
  SolveConfig full = tp.recommended;
  full.level = 5;
  full.full_grid = true;
  full.steps = 12;
  SolveConfig adaptive = full;
  adaptive.full_grid = false;
  adaptive.adapt = true;
  adaptive.eps = 0.0;
  adaptive.level = 2;
  adaptive.max_level = 5;
  const Solution a = solve(tp.problem, full);
  const Solution b = solve(tp.problem, adaptive);
  const auto& ga = a.final_grid();
  const auto& gb = b.final_grid();
  REQUIRE(ga.size() == gb.size());
  bool same = true;
  for (NodeId id = 0; id < static_cast<NodeId>(ga.size()); ++id) {
    const NodeId j = gb.find(ga.key(id));
    REQUIRE(j != kNoNode);
    same = same && std::memcmp(&ga.values()[id], &gb.values()[j], sizeof(double)) == 0;
  }
  CHECK(same);
}

TEST_CASE("envelope runs sandwich the scheme at every node and step") {
  TestProblem tp = builtin("test1_2d");
  for (int order : {2, 3}) {
    CAPTURE(order);
    SolveConfig c = tp.recommended;
    c.order = order;
    c.level = 6;
    c.steps = 50;
    c.truncate = true;
    const EnvelopeRun run = solve_envelopes(tp.problem, c);
    for (int k = 1; k <= c.steps; ++k) {
      const auto& v = run.main.stored[k]->values();
      const auto& lo = run.lower.stored[k]->values();
      const auto& up = run.upper.stored[k]->values();
      REQUIRE(v.size() == lo.size());
      std::size_t bad = 0;
      for (std::size_t i = 0; i < v.size(); ++i) bad += !(lo[i] <= v[i] && v[i] <= up[i]);
      CHECK(bad == 0);
    }
  }
}

TEST_CASE("the envelope gap shrinks under refinement of a full grid") {
  // The cell bounds of a full grid have width 2^-N, so the first-step gap halves per level.
  TestProblem tp = builtin("test1_2d");
  double first[3], last[3];
  for (int i = 0; i < 3; ++i) {
    SolveConfig c = tp.recommended;
    c.order = 2;
    c.level = 6 + i;
    c.full_grid = true;
    c.steps = 10;
    c.truncate = true;
    const auto run = solve_envelopes(tp.problem, c);
    first[i] = run.main.diagnostics.front().envelope_gap;
    last[i] = run.main.diagnostics.back().envelope_gap;
  }
  CHECK(first[0] > 0.0);
  CHECK(first[1] < 0.6 * first[0]);
  CHECK(first[2] < 0.6 * first[1]);
  CHECK(last[1] < last[0]);
  CHECK(last[2] < last[1]);
}

TEST_CASE("negative discount is rejected for envelope runs") {
  ControlProblem p = constant_1d(0.0, 0.5, -1.0, 0.0);
  SolveConfig c;
  c.level = 3;
  c.steps = 2;
  c.order = 2;
  c.truncate = true;
  CHECK_THROWS_AS(solve_envelopes(p, c), Error);
}

TEST_CASE("sparse control search on frozen data") {
  // With sigma = b = c = 0 the minimized map is v + h f(a); f carries the control dependence.
  const double h = 0.1;
  ControlProblem p;
  p.dimension = 1;
  p.noise = 1;
  p.domain = Box{Point{0.0}, Point{1.0}};
  p.payoff = [](const Point&) { return 0.0; };
  const Box box{Point{-1.5, -1.5}, Point{1.5, 1.5}};
  const ControlSet sparse = ControlSet::sparse(box, 4, 64);
  const ControlSet exhaustive = ControlSet::box_grid(box, {64, 64});
  const Interpolant itp(grid_of(p, 3, 1, [](const Point&) { return 0.25; }));

  SUBCASE("constant cost") {
    p.coefficients = [](double, const Point&, const Control&, Coefficients& out) { out.running = 2.0; };
    const ControlChoice r = optimize_control_sparse(p, 0.0, Point{0.5}, h, itp, 0.25, sparse);
    CHECK(r.value == doctest::Approx(0.25 + 0.2).epsilon(1e-14));
    CHECK(box.contains(r.control));
    // Exhaustive search breaks the tie toward the first enumerated control.
    const ControlChoice e = optimize_control(p, 0.0, Point{0.5}, h, itp, 0.25, exhaustive);
    CHECK(e.control == Control{-1.5, -1.5});
  }

  SUBCASE("convex quadratic cost finds its closed-form minimizer") {
    // f = (a0 - 0.3)^2 + 2 (a1 + 0.2)^2 + 0.5 a0 a1 + 0.1; grad f = 0 solves
    // [2 0.5; 0.5 4] a = [0.6; -0.8].
    auto f = [](const Control& a) {
      return (a[0] - 0.3) * (a[0] - 0.3) + 2.0 * (a[1] + 0.2) * (a[1] + 0.2) + 0.5 * a[0] * a[1] + 0.1;
    };
    p.coefficients = [f](double, const Point&, const Control& a, Coefficients& out) { out.running = f(a); };
    const double det = 2.0 * 4.0 - 0.25;
    const Control star{(0.6 * 4.0 - 0.5 * -0.8) / det, (2.0 * -0.8 - 0.5 * 0.6) / det};
    const ControlChoice r = optimize_control_sparse(p, 0.0, Point{0.5}, h, itp, 0.25, sparse);
    const ControlChoice e = optimize_control(p, 0.0, Point{0.5}, h, itp, 0.25, exhaustive);
    const double spacing = 3.0 / 63.0;
    CHECK(std::abs(r.control[0] - star[0]) <= spacing);
    CHECK(std::abs(r.control[1] - star[1]) <= spacing);
    CHECK(r.value >= 0.25 + h * f(star) - 1e-14);
    CHECK(r.value == doctest::Approx(e.value).epsilon(1e-12));
    CHECK(r.control == e.control);
  }
}

TEST_CASE("argument checks") {
  ControlProblem p = constant_1d(0.0, 1.0, 0.0, 0.0);
  SolveConfig c;
  c.steps = 0;
  CHECK_THROWS_AS(solve(p, c), Error);
  c.steps = 4;
  c.level = 0;
  CHECK_THROWS_AS(solve(p, c), Error);
  c.level = 3;
  c.order = 4;
  CHECK_THROWS_AS(solve(p, c), Error);
  ControlProblem bad = p;
  bad.domain = Box{Point{1.0}, Point{0.0}};
  c.order = 1;
  CHECK_THROWS_AS(solve(bad, c), Error);
}

TEST_CASE("stability bound is 1 / max(16 (Ls^2 + Lb^2 + 1), 2 sup|c|)") {
  CHECK(stability_bound({1.0, 1.0, 0.0}) == doctest::Approx(1.0 / 48.0));
  CHECK(stability_bound({0.0, 0.0, 100.0}) == doctest::Approx(1.0 / 200.0));
}

TEST_CASE("with zero coefficients the envelopes equal the scheme at every node") {
  // The cell bounds collapse at nodes of full grids and of 1D grids. On a sparse grid in two or
  // more dimensions the cells of anisotropic levels reach far from the node, so they do not.
  for (int d : {1, 2}) {
    CAPTURE(d);
    ControlProblem p;
    p.dimension = d;
    p.noise = 1;
    p.domain = Box::unit(d);
    p.coefficients = [](double, const Point&, const Control&, Coefficients&) {};
    p.payoff = [](const Point& x) { return std::sin(4.0 * x[0]) * std::cos(3.0 * x[x.size() - 1]); };
    p.boundary = [p](double, const Point& x) { return p.payoff(x); };
    SolveConfig c;
    c.order = 3;
    c.level = 5;
    c.full_grid = d == 2;
    c.steps = 5;
    c.truncate = true;
    const EnvelopeRun run = solve_envelopes(p, c);
    CHECK(bit_identical(run.lower.final_grid().values(), run.main.final_grid().values()));
    CHECK(bit_identical(run.upper.final_grid().values(), run.main.final_grid().values()));
  }
}

TEST_CASE("adding a control never increases a stepped value") {
  TestProblem tp = builtin("heston_portfolio_2d");
  SolveConfig c = tp.recommended;
  c.level = 5;
  c.steps = 4;
  ControlProblem coarse = tp.problem;
  coarse.controls = ControlSet::box_grid(tp.problem.controls.box, {5});
  ControlProblem fine = tp.problem;
  fine.controls = ControlSet::box_grid(tp.problem.controls.box, {9});  // a superset of the 5 points
  auto g0 = initial_grid(tp.problem, c);
  const auto a = step(coarse, 0.0, g0, c);
  const auto b = step(fine, 0.0, g0, c);
  std::size_t worse = 0;
  for (std::size_t i = 0; i < a.stored->values().size(); ++i) worse += b.stored->values()[i] > a.stored->values()[i];
  CHECK(worse == 0);
}
