#include "slsg/problems.hpp"

#include <cmath>
#include <random>

namespace slsg {

namespace {

double sq(double v) { return v * v; }
double root(double v) { return std::sqrt(std::max(v, 0.0)); }

// ---------------------------------------------------------------- test case 1

double test1_exact(double t, const Point& x) {
  const double s2 = std::sin(x[1] / 2);
  return (1 + t) * s2 * (x[0] < 0 ? std::sin(x[0] / 2) : std::sin(x[0] / 4));
}

double test1_running(double t, const Point& x) {
  const double s1 = std::sin(x[0]), s2 = std::sin(x[1]);
  const double h2 = std::sin(x[1] / 2), c2 = std::cos(x[1] / 2);
  if (x[0] < 0) {
    const double h1 = std::sin(x[0] / 2), c1 = std::cos(x[0] / 2);
    return h2 * h1 * (1 + (1 + t) / 4 * (s1 * s1 + s2 * s2)) - s1 * s2 * c2 * (1 + t) / 2 * c1;
  }
  const double h1 = std::sin(x[0] / 4), c1 = std::cos(x[0] / 4);
  return h2 * h1 * (1 + (1 + t) / 16 * (s1 * s1 + 4 * s2 * s2)) - s1 * s2 * c2 * (1 + t) / 4 * c1;
}

TestProblem make_test1() {
  TestProblem tp;
  tp.name = "test1_2d";
  tp.description = "uncontrolled 2D problem with a kinked exact solution";
  auto& p = tp.problem;
  p.dimension = 2;
  p.noise = 1;
  p.domain = Box{Point{-2 * M_PI, -2 * M_PI}, Point{2 * M_PI, 2 * M_PI}};
  p.horizon = 1.0;
  p.coefficients = [](double t, const Point& x, const Control&, Coefficients& c) {
    c.sig(0, 0, 2) = std::sqrt(2.0) * std::sin(x[0]);
    c.sig(1, 0, 2) = std::sqrt(2.0) * std::sin(x[1]);
    c.running = test1_running(t, x);
  };
  p.payoff = [](const Point& x) { return test1_exact(0.0, x); };
  p.boundary = test1_exact;
  p.controls = ControlSet::none();
  p.stability = StabilityConstants{std::sqrt(2.0), 0.0, 0.0};
  tp.exact = test1_exact;
  tp.report_point = Point{0.0, 0.0};
  tp.recommended.order = 1;
  tp.recommended.boundary = BoundaryMode::exact;
  tp.recommended.level = 9;
  tp.recommended.steps = 400;
  tp.levels = {4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  return tp;
}

// ---------------------------------------------------------------- test case 2

double test2_exact(double t, const Point& x) { return (1.5 - t) * std::sin(x[0]) * std::sin(x[1]); }

TestProblem make_test2() {
  TestProblem tp;
  tp.name = "test2_2d_control";
  tp.description = "2D control problem on the unit circle with a smooth exact solution";
  auto& p = tp.problem;
  p.dimension = 2;
  p.noise = 1;
  p.domain = Box{Point{-M_PI, -M_PI}, Point{M_PI, M_PI}};
  p.horizon = 1.0;
  p.coefficients = [](double t, const Point& x, const Control& a, Coefficients& c) {
    const double s = std::sin(x[0] + x[1]), co = std::cos(x[0] + x[1]);
    const double s1 = std::sin(x[0]), s2 = std::sin(x[1]), c1 = std::cos(x[0]), c2 = std::cos(x[1]);
    c.sig(0, 0, 2) = std::sqrt(2.0) * s;
    c.sig(1, 0, 2) = std::sqrt(2.0) * co;
    c.drift[0] = a[0];
    c.drift[1] = a[1];
    c.running = (0.5 - t) * s1 * s2 + (1.5 - t) * (std::sqrt(sq(c1 * s2) + sq(s1 * c2)) - 2 * s * co * c1 * c2);
  };
  p.payoff = [](const Point& x) { return test2_exact(0.0, x); };
  p.boundary = test2_exact;
  p.controls = ControlSet::circle(400);
  p.stability = StabilityConstants{2 * std::sqrt(2.0), 0.0, 0.0};
  tp.exact = test2_exact;
  tp.report_point = Point{M_PI / 2, M_PI / 2};
  tp.recommended.order = 1;
  tp.recommended.boundary = BoundaryMode::exact;
  tp.recommended.level = 7;
  tp.recommended.steps = 800;
  tp.levels = {4, 5, 6, 7, 8, 9, 10, 11};
  return tp;
}

// ---------------------------------------------------------------- portfolio problems

// Wealth x with amount theta in the risky assets; the solver minimizes E[exp(-eta X_T)], the
// negated value function.
Box theta_box(int m) { return Box{Point(m, -1.5), Point(m, 1.5)}; }

TestProblem make_heston_2d() {
  TestProblem tp;
  tp.name = "heston_portfolio_2d";
  tp.description = "exponential utility portfolio with a Heston asset, state (x, y)";
  const HestonPortfolioParams hp;
  tp.heston = hp;
  auto& p = tp.problem;
  p.dimension = 2;
  p.noise = 2;
  p.domain = Box{Point{-4.0, 0.02}, Point{6.0, 3.0}};
  p.horizon = hp.horizon;
  p.coefficients = [hp](double, const Point& x, const Control& a, Coefficients& c) {
    const double th = a[0], sy = root(x[1]);
    c.drift[0] = th * hp.mu;
    c.drift[1] = hp.k * (hp.m - x[1]);
    c.sig(0, 0, 2) = th * sy;
    c.sig(1, 0, 2) = hp.rho * hp.c * sy;
    c.sig(1, 1, 2) = std::sqrt(1 - hp.rho * hp.rho) * hp.c * sy;
  };
  p.payoff = [hp](const Point& x) { return std::exp(-hp.eta * x[0]); };
  // Value of holding only the bond (zero rate).
  p.boundary = [hp](double, const Point& x) { return std::exp(-hp.eta * x[0]); };
  p.controls = ControlSet::box_grid(theta_box(1), {21});
  tp.report_point = Point{hp.x0, hp.y0};
  tp.value_sign = -1.0;
  tp.reference_value = -0.3534;
  tp.recommended.order = 2;
  tp.recommended.boundary = BoundaryMode::exact;
  tp.recommended.level = 10;
  tp.recommended.steps = 200;
  tp.recommended.eps = 6.25e-5;
  tp.recommended.max_level = 12;
  tp.recommended.refine_box = Box{Point{-2.5, 0.05}, Point{4.5, 1.54}};
  tp.levels = {6, 7, 8, 9, 10, 11, 12};
  tp.precisions = {1e-3, 2.5e-4, 6.25e-5, 1.5625e-5};
  tp.adapt_initial_level = 5;
  tp.adapt_max_level = 12;
  return tp;
}

struct RateParams {
  double kappa = 0.1;
  double b = 0.07;
  double zeta = 0.3;
};

TestProblem make_ou_heston_3d() {
  TestProblem tp;
  tp.name = "ou_heston_3d";
  tp.description = "Heston asset with an Ornstein-Uhlenbeck short rate, state (x, r, y)";
  const HestonPortfolioParams hp;
  const RateParams rp;
  auto& p = tp.problem;
  p.dimension = 3;
  p.noise = 3;
  p.domain = Box{Point{-4.0, -0.2, 0.02}, Point{10.0, 0.5, 2.0}};
  p.coefficients = [hp, rp](double, const Point& x, const Control& a, Coefficients& c) {
    const double th = a[0], r = x[1], sy = root(x[2]);
    c.drift[0] = th * (hp.mu - r) + r * x[0];
    c.drift[1] = rp.kappa * (rp.b - r);
    c.drift[2] = hp.k * (hp.m - x[2]);
    c.sig(1, 0, 3) = rp.zeta;
    c.sig(0, 1, 3) = th * sy;
    c.sig(2, 2, 3) = hp.c * sy;
  };
  p.payoff = [hp](const Point& x) { return std::exp(-hp.eta * x[0]); };
  p.controls = ControlSet::box_grid(theta_box(1), {50});
  tp.report_point = Point{1.0, rp.b, hp.m};
  tp.value_sign = -1.0;
  tp.recommended.order = 2;
  tp.recommended.boundary = BoundaryMode::modified;
  tp.recommended.level = 7;
  tp.recommended.steps = 200;
  tp.recommended.max_level = 11;
  // Domain shrunk by a tenth of its width on each side.
  tp.recommended.refine_box = Box{Point{-2.6, -0.13, 0.218}, Point{8.6, 0.43, 1.802}};
  tp.levels = {5, 6, 7, 8, 9, 10, 11};
  tp.precisions = {1e-3, 2.5e-4, 6.25e-5, 1e-5};
  tp.adapt_initial_level = 5;
  tp.adapt_max_level = 11;
  return tp;
}

struct CevParams {
  double mu = 0.10;
  double sigma = 0.3;
  double beta = 0.5;
  double k = 0.1;
  double m = 1.0;
  double c = 0.1;
};

TestProblem make_cev_sv_4d() {
  TestProblem tp;
  tp.name = "cev_sv_4d";
  tp.description = "CEV-SV asset with an Ornstein-Uhlenbeck short rate, state (x, r, s, y)";
  const CevParams cp;
  const RateParams rp;
  auto& p = tp.problem;
  p.dimension = 4;
  p.noise = 3;
  p.domain = Box{Point{-5.0, -0.2, 0.02, 0.02}, Point{10.0, 0.5, 5.0, 5.0}};
  p.coefficients = [cp, rp](double, const Point& x, const Control& a, Coefficients& c) {
    const double th = a[0], r = x[1], s = x[2], sy = root(x[3]);
    const double vol = cp.sigma * sy * std::pow(s, cp.beta - 1);  // relative volatility of S
    c.drift[0] = th * (cp.mu - r) + r * x[0];
    c.drift[1] = rp.kappa * (rp.b - r);
    c.drift[2] = cp.mu * s;
    c.drift[3] = cp.k * (cp.m - x[3]);
    c.sig(1, 0, 4) = rp.zeta;
    c.sig(0, 1, 4) = th * vol;
    c.sig(2, 1, 4) = vol * s;
    c.sig(3, 2, 4) = cp.c * sy;
  };
  p.payoff = [](const Point& x) { return std::exp(-x[0]); };
  p.controls = ControlSet::box_grid(theta_box(1), {50});
  tp.report_point = Point{1.0, rp.b, 1.0, cp.m};
  tp.value_sign = -1.0;
  tp.recommended.order = 2;
  tp.recommended.boundary = BoundaryMode::modified;
  tp.recommended.level = 8;
  tp.recommended.steps = 200;
  tp.recommended.max_level = 12;
  tp.recommended.refine_box = Box{Point{-3.5, -0.13, 0.5, 0.5}, Point{8.5, 0.43, 4.5, 4.5}};
  tp.levels = {5, 6, 7, 8, 9, 10, 11, 12};
  tp.precisions = {1e-3, 2.5e-4, 6.25e-5, 1.5625e-5};
  tp.adapt_initial_level = 6;
  tp.adapt_max_level = 12;
  return tp;
}

TestProblem make_mixed_5d() {
  TestProblem tp;
  tp.name = "mixed_5d";
  tp.description = "CEV-SV and Heston assets with an Ornstein-Uhlenbeck rate, state (x, r, s1, y1, y2)";
  const CevParams cp;
  const HestonPortfolioParams hp;
  const RateParams rp;
  auto& p = tp.problem;
  p.dimension = 5;
  p.noise = 5;
  p.domain = Box{Point{-5.0, -0.2, 0.02, 0.15, 0.04}, Point{10.0, 0.5, 5.0, 7.0, 2.1}};
  p.coefficients = [cp, hp, rp](double, const Point& x, const Control& a, Coefficients& c) {
    const double r = x[1], s1 = x[2], sy1 = root(x[3]), sy2 = root(x[4]);
    const double vol1 = cp.sigma * sy1 * std::pow(s1, cp.beta - 1);
    c.drift[0] = a[0] * (cp.mu - r) + a[1] * (hp.mu - r) + r * x[0];
    c.drift[1] = rp.kappa * (rp.b - r);
    c.drift[2] = cp.mu * s1;
    c.drift[3] = cp.k * (cp.m - x[3]);
    c.drift[4] = hp.k * (hp.m - x[4]);
    c.sig(1, 0, 5) = rp.zeta;
    c.sig(0, 1, 5) = a[0] * vol1;
    c.sig(2, 1, 5) = vol1 * s1;
    c.sig(3, 2, 5) = cp.c * sy1;
    c.sig(0, 3, 5) = a[1] * sy2;
    c.sig(4, 4, 5) = hp.c * sy2;
  };
  p.payoff = [](const Point& x) { return std::exp(-x[0]); };
  p.controls = ControlSet::sparse(theta_box(2), 4, 64);
  tp.report_point = Point{1.0, rp.b, 1.0, cp.m, hp.m};
  tp.value_sign = -1.0;
  tp.recommended.order = 3;
  tp.recommended.boundary = BoundaryMode::modified;
  tp.recommended.level = 9;
  tp.recommended.steps = 200;
  tp.recommended.max_level = 10;
  tp.levels = {6, 7, 8, 9, 10};
  tp.precisions = {1e-3, 2.5e-4, 6.25e-5, 1.5625e-5};
  tp.adapt_initial_level = 7;
  tp.adapt_max_level = 10;
  return tp;
}

TestProblem make_call_short_3d() {
  TestProblem tp;
  tp.name = "call_short_3d";
  tp.description = "investor short an at-the-money call on a CEV-SV asset, state (x, s, y)";
  const CevParams cp;
  auto& p = tp.problem;
  p.dimension = 3;
  p.noise = 2;
  p.domain = Box{Point{-5.0, 0.02, 0.02}, Point{10.0, 5.0, 5.0}};
  p.coefficients = [cp](double, const Point& x, const Control& a, Coefficients& c) {
    const double th = a[0], s = x[1], sy = root(x[2]);
    const double vol = cp.sigma * sy * std::pow(s, cp.beta - 1);
    c.drift[0] = th * cp.mu;
    c.drift[1] = cp.mu * s;
    c.drift[2] = cp.k * (cp.m - x[2]);
    c.sig(0, 0, 3) = th * vol;
    c.sig(1, 0, 3) = vol * s;
    c.sig(2, 1, 3) = cp.c * sy;
  };
  p.payoff = [](const Point& x) { return std::exp(-(x[0] - std::max(x[1] - 1.0, 0.0))); };
  p.controls = ControlSet::box_grid(theta_box(1), {51});
  tp.report_point = Point{1.0, 1.0, cp.m};
  tp.value_sign = -1.0;
  tp.recommended.order = 2;
  tp.recommended.boundary = BoundaryMode::modified;
  tp.recommended.level = 10;
  tp.recommended.steps = 200;
  tp.recommended.max_level = 13;
  tp.levels = {7, 8, 9, 10, 11, 12, 13};
  tp.precisions = {1e-3, 2.5e-4, 6.25e-5, 1.5625e-5, 3.9e-6};
  tp.adapt_initial_level = 9;
  tp.adapt_max_level = 13;
  return tp;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"test1_2d", "test2_2d_control", "heston_portfolio_2d", "ou_heston_3d", "cev_sv_4d", "mixed_5d",
          "call_short_3d"};
}

TestProblem builtin(const std::string& name) {
  if (name == "test1_2d") return make_test1();
  if (name == "test2_2d_control") return make_test2();
  if (name == "heston_portfolio_2d") return make_heston_2d();
  if (name == "ou_heston_3d") return make_ou_heston_3d();
  if (name == "cev_sv_4d") return make_cev_sv_4d();
  if (name == "mixed_5d") return make_mixed_5d();
  if (name == "call_short_3d") return make_call_short_3d();
  std::string known;
  for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error("unknown problem '" + name + "' (known: " + known + ")");
}

// ---------------------------------------------------------------- oracles

ReferenceEstimate heston_portfolio_monte_carlo(const HestonPortfolioParams& p, std::size_t paths, int steps,
                                               std::uint64_t seed) {
  if (paths < 2 || steps < 1) throw Error("monte carlo needs at least 2 paths and 1 step");
  const double power = 1 - p.rho * p.rho;
  const double alpha = p.k * p.m - p.mu * p.c * p.rho;  // dY = (alpha - k Y) dt + c sqrt(Y) dW
  const double h = p.horizon / steps;
  const double sh = std::sqrt(h);
  const double lift = alpha / 2 - p.c * p.c / 8;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t n = 0; n < paths; ++n) {
    double y = p.y0;
    double integral = 0.0;
    double prev = 1.0 / y;
    for (int s = 0; s < steps; ++s) {
      const double dw = sh * normal(rng);
      if (lift > 0) {
        // Implicit scheme on sqrt(Y); stays positive when 4 alpha > c^2.
        const double b = 0.5 * p.c * dw + std::sqrt(y);
        const double z = (b + std::sqrt(b * b + 4 * (1 + 0.5 * p.k * h) * lift * h)) / (2 * (1 + 0.5 * p.k * h));
        y = z * z;
      } else {
        const double yp = std::max(y, 0.0);
        y = y + (alpha - p.k * yp) * h + p.c * std::sqrt(yp) * dw;
      }
      const double cur = 1.0 / std::max(y, 1e-300);
      integral += 0.5 * h * (prev + cur);
      prev = cur;
    }
    const double z = std::exp(-0.5 * power * p.mu * p.mu * integral);
    sum += z;
    sum2 += z * z;
  }
  const double n = static_cast<double>(paths);
  const double mean = sum / n;
  const double var = std::max(sum2 / n - mean * mean, 0.0) * n / (n - 1);
  const double scale = std::exp(-p.eta * p.x0);
  const double value = scale * std::pow(mean, 1 / power);
  const double se = scale * std::pow(mean, 1 / power - 1) / power * std::sqrt(var / n);
  return {value, se};
}

namespace {

// w(tau, y) = E[exp(-1/2 p mu^2 int_0^tau 1/Y)] solves w_tau = (alpha - k y) w_y + 1/2 c^2 y w_yy
// - (p mu^2 / 2y) w with w(0, .) = 1 and w = 0 at y = 0. Backward Euler with Richardson
// extrapolation in time; upwinded drift where the cell Peclet number exceeds one.
double heston_pde_value(const HestonPortfolioParams& p, int n, int steps) {
  const double power = 1 - p.rho * p.rho;
  const double alpha = p.k * p.m - p.mu * p.c * p.rho;
  const double ymax = std::max(10 * p.y0, 3.0);
  const double dy = ymax / n;
  auto solve_with = [&](int nt) {
    const double dt = p.horizon / nt;
    std::vector<double> w(n + 1, 1.0), lo(n + 1), di(n + 1), up(n + 1), rhs(n + 1);
    w[0] = 0.0;
    for (int s = 0; s < nt; ++s) {
      for (int i = 1; i <= n; ++i) {
        const double y = i * dy;
        const double diff = 0.5 * p.c * p.c * y / (dy * dy);
        const double drift = alpha - p.k * y;
        double a = diff, b = diff;  // coefficients of w[i-1], w[i+1]
        if (std::abs(drift) * dy > p.c * p.c * y) {
          if (drift > 0) b += drift / dy;
          else a -= drift / dy;
        } else {
          b += drift / (2 * dy);
          a -= drift / (2 * dy);
        }
        const double pot = 0.5 * power * p.mu * p.mu / y;
        if (i == n) {
          // Linear extrapolation w[n+1] = 2 w[n] - w[n-1].
          lo[i] = -dt * (a - b);
          di[i] = 1 + dt * (a + b + pot - 2 * b);
          up[i] = 0.0;
        } else {
          lo[i] = -dt * a;
          di[i] = 1 + dt * (a + b + pot);
          up[i] = -dt * b;
        }
        rhs[i] = w[i];
      }
      // Thomas algorithm on rows 1..n with w[0] = 0.
      for (int i = 2; i <= n; ++i) {
        const double f = lo[i] / di[i - 1];
        di[i] -= f * up[i - 1];
        rhs[i] -= f * rhs[i - 1];
      }
      w[n] = rhs[n] / di[n];
      for (int i = n - 1; i >= 1; --i) w[i] = (rhs[i] - up[i] * w[i + 1]) / di[i];
    }
    const double pos = p.y0 / dy;
    const int i = std::min(static_cast<int>(pos), n - 1);
    const double f = pos - i;
    return (1 - f) * w[i] + f * w[i + 1];
  };
  const double coarse = solve_with(steps), fine = solve_with(2 * steps);
  const double w = 2 * fine - coarse;
  return std::exp(-p.eta * p.x0) * std::pow(w, 1 / power);
}

}  // namespace

ReferenceEstimate heston_portfolio_pde(const HestonPortfolioParams& p, int space_points, int time_steps) {
  if (space_points < 20 || time_steps < 2) throw Error("quadrature oracle needs at least 20 points and 2 steps");
  const double fine = heston_pde_value(p, space_points, time_steps);
  const double coarse = heston_pde_value(p, space_points / 2, time_steps);
  return {fine, std::abs(fine - coarse)};
}

ReferenceEstimate reference_value(const TestProblem& tp, const ReferenceOracle& oracle) {
  switch (oracle.method) {
    case ReferenceOracle::Method::closed_form:
      if (!tp.exact) throw Error("problem " + tp.name + " has no closed-form solution");
      if (oracle.x.size() != tp.problem.dimension) throw Error("closed-form query point has the wrong dimension");
      return {tp.exact(oracle.t, oracle.x), 0.0};
    case ReferenceOracle::Method::monte_carlo:
      if (!tp.heston) throw Error("no Monte Carlo oracle for problem " + tp.name);
      return heston_portfolio_monte_carlo(*tp.heston, oracle.paths, oracle.time_steps, oracle.seed);
    case ReferenceOracle::Method::one_dim_quadrature:
      if (!tp.heston) throw Error("no quadrature oracle for problem " + tp.name);
      return heston_portfolio_pde(*tp.heston, oracle.space_points, oracle.time_steps);
  }
  throw Error("unknown oracle");
}

double max_error(const Solution& solution, const std::function<double(double, const Point&)>& exact, int per_axis) {
  if (!exact) throw Error("no exact solution to compare with");
  if (per_axis < 2) throw Error("error sampling needs at least two points per axis");
  const Box& dom = solution.domain;
  const int d = dom.dimension();
  std::vector<int> k(d, 0);
  double worst = 0.0;
  for (;;) {
    Point x(d);
    for (int j = 0; j < d; ++j)
      x[j] = k[j] == per_axis - 1 ? dom.upper[j] : dom.lower[j] + (dom.upper[j] - dom.lower[j]) * k[j] / (per_axis - 1);
    worst = std::max(worst, std::abs(solution.value(x) - exact(solution.horizon, x)));
    int j = d - 1;
    while (j >= 0 && ++k[j] == per_axis) k[j--] = 0;
    if (j < 0) break;
  }
  return worst;
}

double max_nodal_error(const Solution& solution, const std::function<double(double, const Point&)>& exact) {
  if (!exact) throw Error("no exact solution to compare with");
  const AdaptiveSparseGrid& g = solution.final_grid();
  double worst = 0.0;
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const Point x = from_unit(solution.domain, g.coordinates(id));
    worst = std::max(worst, std::abs(g.values()[id] - exact(solution.horizon, x)));
  }
  return worst;
}

}  // namespace slsg
