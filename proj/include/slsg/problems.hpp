#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slsg/solver.hpp"

namespace slsg {

/// Parameters of the Heston portfolio problem with exponential utility.
struct HestonPortfolioParams {
  double eta = 1.0;   // risk aversion
  double mu = 0.15;   // asset drift
  double c = 0.2;     // volatility of variance
  double k = 0.1;     // mean reversion
  double m = 0.3;     // long-run variance
  double rho = 0.0;   // asset/variance correlation
  double x0 = 1.0;    // initial wealth
  double y0 = 0.3;    // initial variance
  double horizon = 1.0;
};

/// A problem with everything needed to run and judge it.
struct TestProblem {
  std::string name;
  std::string description;
  ControlProblem problem;
  std::function<double(double t, const Point& x)> exact;  // empty when unknown
  std::optional<double> reference_value;                  // reported (signed) value at report_point
  Point report_point;
  double value_sign = 1.0;  // reported value = value_sign * solver value
  SolveConfig recommended;  // published settings (fixed-level run)
  std::vector<int> levels;  // published level sweep
  std::vector<double> precisions;  // published adaptation sweep
  int adapt_initial_level = 0;     // 0 when the paper has no adaptive run
  int adapt_max_level = 0;
  std::optional<HestonPortfolioParams> heston;  // set for the 2D portfolio problem
};

std::vector<std::string> builtin_names();

/// Builds a named problem: test1_2d, test2_2d_control, heston_portfolio_2d, ou_heston_3d,
/// cev_sv_4d, mixed_5d, call_short_3d.
TestProblem builtin(const std::string& name);

/// Builds a problem from configuration keys. Required: dimension, domain_lower, domain_upper,
/// payoff. Optional: noise (1), horizon (1), drift, sigma (row-major d x q), discount, running,
/// boundary, exact, controls (none | box | circle | sparse) with control_lower, control_upper,
/// control_counts, control_angles, control_level, control_thin, stability, report_point,
/// value_sign. Lists are separated by ';'.
TestProblem custom_problem(const std::map<std::string, std::string>& keys);

struct ReferenceOracle {
  enum class Method { closed_form, one_dim_quadrature, monte_carlo };
  Method method = Method::closed_form;
  double t = 0.0;  // closed_form query
  Point x;         // closed_form query (physical)
  std::size_t paths = 1000000;
  int time_steps = 100;
  std::uint64_t seed = 20120501;
  int space_points = 1500;  // one_dim_quadrature
};

struct ReferenceEstimate {
  double value = 0.0;
  double error = 0.0;  // standard error (monte_carlo) or grid-halving difference (quadrature)
};

/// Reference scalar of a problem. For the portfolio problem the returned value is the magnitude
/// e^{-eta x} ||exp(-1/2 int mu^2 / Y ds)||, i.e. minus the value function.
ReferenceEstimate reference_value(const TestProblem& problem, const ReferenceOracle& oracle);

/// Monte Carlo estimate of e^{-eta x0} ||exp(-1/2 int_0^T mu^2/Y ds)||_{L^{1-rho^2}} with Y the
/// drift-shifted variance process; implicit square-root scheme and trapezoidal time integral.
ReferenceEstimate heston_portfolio_monte_carlo(const HestonPortfolioParams& p, std::size_t paths, int steps,
                                               std::uint64_t seed);

/// Same quantity from the 1D backward equation in y, solved by finite differences on two grids.
ReferenceEstimate heston_portfolio_pde(const HestonPortfolioParams& p, int space_points, int time_steps);

/// Maximum of |v(T, x) - u(T, x)| over a uniform grid with `per_axis` points per axis.
double max_error(const Solution& solution, const std::function<double(double, const Point&)>& exact, int per_axis = 201);

/// Maximum of |v(T, x) - u(T, x)| over the nodes of the final grid.
double max_nodal_error(const Solution& solution, const std::function<double(double, const Point&)>& exact);

}  // namespace slsg
