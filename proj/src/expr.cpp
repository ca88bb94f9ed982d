#include "slsg/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace slsg {

class ExprParser {
public:
  explicit ExprParser(const std::string& text) : s_(text) {}

  Expression run() {
    Expression e;
    e.text_ = s_;
    out_ = &e;
    compare();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    if (e.code_.empty()) fail("empty expression");
    e.depth_ = max_depth_;
    return e;
  }

private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("expression \"" + s_ + "\" at " + std::to_string(pos_) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(const char* tok) {
    skip();
    const std::size_t n = std::char_traits<char>::length(tok);
    if (s_.compare(pos_, n, tok) != 0) return false;
    pos_ += n;
    return true;
  }

  void emit(Op op, int pops, int pushes, int index = 0, double value = 0.0) {
    out_->code_.push_back({op, index, value});
    depth_ += pushes - pops;
    max_depth_ = std::max(max_depth_, depth_);
  }

  void compare() {
    sum();
    static const std::pair<const char*, Op> ops[] = {{"<=", Op::le}, {">=", Op::ge}, {"==", Op::eq},
                                                     {"!=", Op::ne}, {"<", Op::lt},  {">", Op::gt}};
    for (const auto& [tok, op] : ops) {
      if (eat(tok)) {
        sum();
        emit(op, 2, 1);
        return;
      }
    }
  }
  void sum() {
    product();
    for (;;) {
      if (eat("+")) {
        product();
        emit(Op::add, 2, 1);
      } else if (eat("-")) {
        product();
        emit(Op::sub, 2, 1);
      } else {
        return;
      }
    }
  }
  void product() {
    unary();
    for (;;) {
      if (eat("*")) {
        unary();
        emit(Op::mul, 2, 1);
      } else if (eat("/")) {
        unary();
        emit(Op::div, 2, 1);
      } else {
        return;
      }
    }
  }
  void unary() {
    if (eat("-")) {
      unary();
      emit(Op::neg, 1, 1);
    } else if (eat("+")) {
      unary();
    } else {
      power();
    }
  }
  void power() {
    primary();
    if (eat("^")) {
      unary();
      emit(Op::pow, 2, 1);
    }
  }
  void primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Op::constant, 0, 1, 0, v);
      return;
    }
    if (eat("(")) {
      compare();
      if (!eat(")")) fail("missing ')'");
      return;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
    const std::string name = s_.substr(pos_, end - pos_);
    pos_ = end;
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      call(name);
      return;
    }
    variable(name);
  }
  void variable(const std::string& name) {
    if (name == "t") return emit(Op::var_t, 0, 1);
    if (name == "pi") return emit(Op::constant, 0, 1, 0, std::numbers::pi);
    if (name == "e") return emit(Op::constant, 0, 1, 0, std::numbers::e);
    if ((name[0] == 'x' || name[0] == 'a') && name.size() == 2 && std::isdigit(static_cast<unsigned char>(name[1]))) {
      const int k = name[1] - '0';
      if (name[0] == 'x') {
        out_->max_x_ = std::max(out_->max_x_, k);
        return emit(Op::var_x, 0, 1, k);
      }
      out_->max_a_ = std::max(out_->max_a_, k);
      return emit(Op::var_a, 0, 1, k);
    }
    fail("unknown name '" + name + "'");
  }
  void call(const std::string& name) {
    int args = 0;
    skip();
    if (!eat(")")) {
      do {
        compare();
        ++args;
      } while (eat(","));
      if (!eat(")")) fail("missing ')' after arguments of " + name);
    }
    static const std::pair<const char*, Op> unary_fns[] = {{"sin", Op::sin}, {"cos", Op::cos},   {"tan", Op::tan},
                                                           {"exp", Op::exp}, {"log", Op::log},   {"sqrt", Op::sqrt},
                                                           {"abs", Op::abs}};
    for (const auto& [fn, op] : unary_fns) {
      if (name == fn) {
        if (args != 1) fail(name + " takes one argument");
        return emit(op, 1, 1);
      }
    }
    static const std::pair<const char*, Op> binary_fns[] = {{"pow", Op::pow}, {"min", Op::min}, {"max", Op::max}};
    for (const auto& [fn, op] : binary_fns) {
      if (name == fn) {
        if (args != 2) fail(name + " takes two arguments");
        return emit(op, 2, 1);
      }
    }
    if (name == "if") {
      if (args != 3) fail("if takes three arguments");
      return emit(Op::select, 3, 1);
    }
    fail("unknown function '" + name + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;
  int depth_ = 0;
  int max_depth_ = 0;
};

Expression Expression::parse(const std::string& text) { return ExprParser(text).run(); }

double Expression::operator()(const ExprVars& v) const {
  if (code_.empty()) throw Error("evaluating an empty expression");
  if (max_x_ >= v.nx) throw Error("expression \"" + text_ + "\" uses x" + std::to_string(max_x_) + " beyond the state");
  if (max_a_ >= v.na) throw Error("expression \"" + text_ + "\" uses a" + std::to_string(max_a_) + " beyond the control");
  double stack[64];
  if (depth_ > 64) throw Error("expression too deep");
  int sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::constant: stack[sp++] = in.value; break;
      case Op::var_t: stack[sp++] = v.t; break;
      case Op::var_x: stack[sp++] = v.x[in.index]; break;
      case Op::var_a: stack[sp++] = v.a[in.index]; break;
      case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case Op::cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
      case Op::tan: stack[sp - 1] = std::tan(stack[sp - 1]); break;
      case Op::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::log: stack[sp - 1] = std::log(stack[sp - 1]); break;
      case Op::sqrt: stack[sp - 1] = std::sqrt(stack[sp - 1]); break;
      case Op::abs: stack[sp - 1] = std::abs(stack[sp - 1]); break;
      case Op::select:
        sp -= 2;
        stack[sp - 1] = stack[sp - 1] != 0.0 ? stack[sp] : stack[sp + 1];
        break;
      default: {
        const double r = stack[--sp];
        double& l = stack[sp - 1];
        switch (in.op) {
          case Op::add: l += r; break;
          case Op::sub: l -= r; break;
          case Op::mul: l *= r; break;
          case Op::div: l /= r; break;
          case Op::pow: l = std::pow(l, r); break;
          case Op::min: l = std::min(l, r); break;
          case Op::max: l = std::max(l, r); break;
          case Op::lt: l = l < r; break;
          case Op::le: l = l <= r; break;
          case Op::gt: l = l > r; break;
          case Op::ge: l = l >= r; break;
          case Op::eq: l = l == r; break;
          case Op::ne: l = l != r; break;
          default: throw Error("corrupt expression");
        }
      }
    }
  }
  return stack[0];
}

std::vector<Expression> parse_expression_list(const std::string& text) {
  std::vector<Expression> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t semi = text.find(';', start);
    out.push_back(Expression::parse(text.substr(start, semi == std::string::npos ? std::string::npos : semi - start)));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

}  // namespace slsg
