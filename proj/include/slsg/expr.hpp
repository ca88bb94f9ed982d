#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slsg/types.hpp"

namespace slsg {

/// Variables visible to an expression.
struct ExprVars {
  double t = 0.0;
  const double* x = nullptr;  // state, length nx
  int nx = 0;
  const double* a = nullptr;  // control, length na
  int na = 0;
};

/// Scalar arithmetic expression over t, x0..x9 and a0..a9.
///
/// Grammar (lowest precedence first):
///   expr    := compare
///   compare := sum [ ("<" | "<=" | ">" | ">=" | "==" | "!=") sum ]
///   sum     := product { ("+" | "-") product }
///   product := unary { ("*" | "/") unary }
///   unary   := ("-" | "+") unary | power
///   power   := primary [ "^" unary ]
///   primary := number | name | name "(" expr { "," expr } ")" | "(" expr ")"
/// Names: t, x0..x9, a0..a9, pi, e. Functions: sin cos tan exp log sqrt abs (one argument),
/// pow min max (two), if(c, p, q) (p when c != 0, else q). Comparisons yield 1 or 0.
class Expression {
public:
  Expression() = default;
  static Expression parse(const std::string& text);

  double operator()(const ExprVars& vars) const;
  const std::string& text() const { return text_; }
  /// Highest state / control index referenced, or -1.
  int max_state_index() const { return max_x_; }
  int max_control_index() const { return max_a_; }
  bool empty() const { return code_.empty(); }

private:
  enum class Op : std::uint8_t {
    constant, var_t, var_x, var_a, neg, add, sub, mul, div, pow, lt, le, gt, ge, eq, ne,
    sin, cos, tan, exp, log, sqrt, abs, min, max, select
  };
  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
  };
  friend class ExprParser;

  std::string text_;
  std::vector<Instr> code_;  // postfix
  int depth_ = 0;            // stack depth needed
  int max_x_ = -1;
  int max_a_ = -1;
};

/// Splits "e1; e2; ..." into expressions (semicolons separate, commas stay inside calls).
std::vector<Expression> parse_expression_list(const std::string& text);

}  // namespace slsg
