#include <cmath>
#include <memory>

#include "slsg/expr.hpp"
#include "slsg/problems.hpp"

namespace slsg {

namespace {

using Keys = std::map<std::string, std::string>;

const std::string* find(const Keys& keys, const std::string& name) {
  const auto it = keys.find(name);
  return it == keys.end() ? nullptr : &it->second;
}

std::string require(const Keys& keys, const std::string& name) {
  const std::string* v = find(keys, name);
  if (!v) throw Error("custom problem: missing key '" + name + "'");
  return *v;
}

// Constant expressions such as "-2*pi".
std::vector<double> numbers(const std::string& text) {
  std::vector<double> out;
  for (const Expression& e : parse_expression_list(text)) out.push_back(e(ExprVars{}));
  return out;
}

Point point_of(const std::string& text, int d, const std::string& what) {
  const auto v = numbers(text);
  if (static_cast<int>(v.size()) != d)
    throw Error("custom problem: " + what + " needs " + std::to_string(d) + " entries, got " + std::to_string(v.size()));
  Point p(d);
  for (int j = 0; j < d; ++j) p[j] = v[j];
  return p;
}

std::vector<Expression> expressions(const Keys& keys, const std::string& name, std::size_t count) {
  const std::string* text = find(keys, name);
  if (!text) return std::vector<Expression>(count, Expression::parse("0"));
  auto out = parse_expression_list(*text);
  if (out.size() != count)
    throw Error("custom problem: '" + name + "' needs " + std::to_string(count) + " expressions separated by ';', got " +
                std::to_string(out.size()));
  return out;
}

void check_indices(const Expression& e, int d, int m, bool allow_control) {
  if (e.max_state_index() >= d) throw Error("custom problem: \"" + e.text() + "\" uses a state index beyond the dimension");
  if (e.max_control_index() >= (allow_control ? m : 0))
    throw Error("custom problem: \"" + e.text() + "\" uses a control index beyond the control dimension");
}

ControlSet control_set(const Keys& keys) {
  const std::string* mode = find(keys, "controls");
  if (!mode || *mode == "none") return ControlSet::none();
  if (*mode == "circle") return ControlSet::circle(static_cast<int>(numbers(require(keys, "control_angles")).at(0)));
  const auto lo = numbers(require(keys, "control_lower"));
  const auto hi = numbers(require(keys, "control_upper"));
  if (lo.size() != hi.size() || lo.empty()) throw Error("custom problem: control_lower and control_upper differ in length");
  Box box{Point(static_cast<int>(lo.size())), Point(static_cast<int>(lo.size()))};
  for (std::size_t j = 0; j < lo.size(); ++j) box.lower[j] = lo[j], box.upper[j] = hi[j];
  if (*mode == "box") {
    std::vector<int> counts;
    for (double c : numbers(require(keys, "control_counts"))) counts.push_back(static_cast<int>(c));
    return ControlSet::box_grid(box, counts);
  }
  if (*mode == "sparse") {
    const std::string* level = find(keys, "control_level");
    const std::string* thin = find(keys, "control_thin");
    return ControlSet::sparse(box, level ? static_cast<int>(numbers(*level).at(0)) : 4,
                              thin ? static_cast<int>(numbers(*thin).at(0)) : 64);
  }
  throw Error("custom problem: unknown controls mode '" + *mode + "' (none, box, circle, sparse)");
}

}  // namespace

TestProblem custom_problem(const std::map<std::string, std::string>& keys) {
  TestProblem tp;
  tp.name = "custom";
  tp.description = "problem defined in the configuration file";
  ControlProblem& p = tp.problem;
  p.dimension = static_cast<int>(numbers(require(keys, "dimension")).at(0));
  if (p.dimension < 1 || p.dimension > kMaxDim) throw Error("custom problem: dimension outside [1, 10]");
  const int d = p.dimension;
  p.noise = find(keys, "noise") ? static_cast<int>(numbers(*find(keys, "noise")).at(0)) : 1;
  if (p.noise < 1 || p.noise > kMaxNoise) throw Error("custom problem: noise outside [1, 10]");
  const int q = p.noise;
  p.domain = Box{point_of(require(keys, "domain_lower"), d, "domain_lower"),
                 point_of(require(keys, "domain_upper"), d, "domain_upper")};
  if (find(keys, "horizon")) p.horizon = numbers(*find(keys, "horizon")).at(0);
  p.controls = control_set(keys);
  const int m = p.controls.dimension();

  struct Coef {
    std::vector<Expression> drift, sigma;
    Expression discount, running;
  };
  auto coef = std::make_shared<Coef>();
  coef->drift = expressions(keys, "drift", d);
  coef->sigma = expressions(keys, "sigma", static_cast<std::size_t>(d) * q);
  coef->discount = expressions(keys, "discount", 1)[0];
  coef->running = expressions(keys, "running", 1)[0];
  for (const auto& e : coef->drift) check_indices(e, d, m, true);
  for (const auto& e : coef->sigma) check_indices(e, d, m, true);
  check_indices(coef->discount, d, m, true);
  check_indices(coef->running, d, m, true);
  p.coefficients = [coef, d, q](double t, const Point& x, const Control& a, Coefficients& c) {
    const ExprVars v{t, x.data(), x.size(), a.data(), a.size()};
    for (int j = 0; j < d; ++j) c.drift[j] = coef->drift[j](v);
    for (int r = 0; r < d; ++r)
      for (int i = 0; i < q; ++i) c.sig(r, i, d) = coef->sigma[static_cast<std::size_t>(r) * q + i](v);
    c.discount = coef->discount(v);
    c.running = coef->running(v);
  };

  auto payoff = std::make_shared<Expression>(Expression::parse(require(keys, "payoff")));
  check_indices(*payoff, d, m, false);
  p.payoff = [payoff](const Point& x) { return (*payoff)(ExprVars{0.0, x.data(), x.size(), nullptr, 0}); };
  auto state_time = [&](const std::string& name) -> std::function<double(double, const Point&)> {
    const std::string* text = find(keys, name);
    if (!text) return {};
    auto e = std::make_shared<Expression>(Expression::parse(*text));
    check_indices(*e, d, m, false);
    return [e](double t, const Point& x) { return (*e)(ExprVars{t, x.data(), x.size(), nullptr, 0}); };
  };
  p.boundary = state_time("boundary");
  tp.exact = state_time("exact");
  if (!p.boundary && tp.exact) p.boundary = tp.exact;

  if (find(keys, "stability")) {
    const auto k = numbers(*find(keys, "stability"));
    if (k.size() != 3) throw Error("custom problem: stability needs 'L_sigma; L_b; sup|c|'");
    p.stability = StabilityConstants{k[0], k[1], k[2]};
  }
  if (find(keys, "report_point")) {
    tp.report_point = point_of(*find(keys, "report_point"), d, "report_point");
  } else {
    tp.report_point = Point(d);
    for (int j = 0; j < d; ++j) tp.report_point[j] = 0.5 * (p.domain.lower[j] + p.domain.upper[j]);
  }
  if (find(keys, "value_sign")) tp.value_sign = numbers(*find(keys, "value_sign")).at(0);
  p.validate();
  return tp;
}

}  // namespace slsg
