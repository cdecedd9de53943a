#include "folcoil/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

namespace folcoil {

ExprError::ExprError(const std::string& what, std::size_t offset) : DomainError(what), offset_(offset) {}

namespace {

using Node = ExprAst::Node;
using NodePtr = std::shared_ptr<const Node>;

constexpr std::array kFunctions{"sin", "cos", "exp", "log", "sech", "tanh"};
constexpr std::array kVariables{"x", "y", "z", "y1", "y2", "y3", "q1", "q2", "q3", "t"};

bool is_function(const std::string& s) {
  for (const char* f : kFunctions)
    if (s == f) return true;
  return false;
}

bool is_variable(const std::string& s) {
  for (const char* v : kVariables)
    if (s == v) return true;
  return false;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = ExprAst::Kind::Number;
  n->value = v;
  return n;
}

NodePtr make_unary(ExprAst::Kind k, std::string name, NodePtr arg) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->name = std::move(name);
  n->lhs = std::move(arg);
  return n;
}

NodePtr make_binary(char op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = ExprAst::Kind::Binary;
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExprError("syntax error at offset " + std::to_string(pos_) + ": " + what, pos_);
  }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr a = term();
    for (;;) {
      if (accept('+'))
        a = make_binary('+', a, term());
      else if (accept('-'))
        a = make_binary('-', a, term());
      else
        return a;
    }
  }

  NodePtr term() {
    NodePtr a = unary();
    for (;;) {
      if (accept('*'))
        a = make_binary('*', a, unary());
      else if (accept('/'))
        a = make_binary('/', a, unary());
      else
        return a;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_unary(ExprAst::Kind::Negate, "", unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_binary('^', base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (is_digit(c) || c == '.') return number();
    if (is_alpha(c)) return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < s_.size() && is_digit(s_[p])) ++p;
    if (p < s_.size() && s_[p] == '.') {
      ++p;
      while (p < s_.size() && is_digit(s_[p])) ++p;
    }
    if (p < s_.size() && (s_[p] == 'e' || s_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && is_digit(s_[q])) {
        while (q < s_.size() && is_digit(s_[q])) ++q;
        p = q;
      }
    }
    double v = 0;
    const auto r = std::from_chars(s_.data() + start, s_.data() + p, v);
    if (r.ec != std::errc() || r.ptr != s_.data() + p) fail("malformed number");
    pos_ = p;
    return make_number(v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (is_alpha(s_[pos_]) || is_digit(s_[pos_]))) ++pos_;
    const std::string id(s_.substr(start, pos_ - start));
    if (is_function(id)) {
      if (!accept('(')) fail("expected '(' after " + id);
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make_unary(ExprAst::Kind::Function, id, arg);
    }
    if (id == "pi") return make_number(std::numbers::pi);
    if (!is_variable(id)) throw ExprError("unknown identifier '" + id + "' at offset " + std::to_string(start), start);
    return make_unary(ExprAst::Kind::Variable, id, nullptr);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

int precedence(const Node& n) {
  switch (n.kind) {
    case ExprAst::Kind::Number:
      return n.value < 0 ? 3 : 5;
    case ExprAst::Kind::Variable:
    case ExprAst::Kind::Function:
      return 5;
    case ExprAst::Kind::Negate:
      return 3;
    case ExprAst::Kind::Binary:
      return n.op == '^' ? 4 : (n.op == '*' || n.op == '/') ? 2 : 1;
  }
  return 0;
}

std::string format_number(double v) {
  if (v == std::numbers::pi) return "pi";
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), std::abs(v));
  std::string s(buf.data(), r.ptr);
  return v < 0 ? "-" + s : s;
}

std::string print(const Node& n);

std::string wrap(const Node& n, bool parens) { return parens ? "(" + print(n) + ")" : print(n); }

std::string print(const Node& n) {
  switch (n.kind) {
    case ExprAst::Kind::Number:
      return format_number(n.value);
    case ExprAst::Kind::Variable:
      return n.name;
    case ExprAst::Kind::Function:
      return n.name + "(" + print(*n.lhs) + ")";
    case ExprAst::Kind::Negate:
      return "-" + wrap(*n.lhs, precedence(*n.lhs) < 3);
    case ExprAst::Kind::Binary: {
      const int p = precedence(n);
      const Node& a = *n.lhs;
      const Node& b = *n.rhs;
      if (n.op == '^') return wrap(a, precedence(a) <= 4) + "^" + wrap(b, precedence(b) < 3);
      const std::string op = p == 1 ? std::string(" ") + n.op + " " : std::string(1, n.op);
      return wrap(a, precedence(a) < p) + op + wrap(b, precedence(b) <= p);
    }
  }
  return {};
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.kind == ExprAst::Kind::Variable) out.insert(n.name);
  if (n.lhs) collect(*n.lhs, out);
  if (n.rhs) collect(*n.rhs, out);
}

double apply_function(const std::string& f, double v) {
  if (f == "sin") return std::sin(v);
  if (f == "cos") return std::cos(v);
  if (f == "exp") return std::exp(v);
  if (f == "log") {
    if (!(v > 0)) throw DomainError("log of a non-positive value");
    return std::log(v);
  }
  if (f == "sech") return 1.0 / std::cosh(v);
  if (f == "tanh") return std::tanh(v);
  throw DomainError("unknown function '" + f + "'");
}

double apply_binary(char op, double a, double b) {
  switch (op) {
    case '+':
      return a + b;
    case '-':
      return a - b;
    case '*':
      return a * b;
    case '/':
      if (b == 0) throw DomainError("division by zero");
      return a / b;
    case '^':
      return std::pow(a, b);
  }
  throw DomainError("unknown operator");
}

double eval_node(const Node& n, const std::vector<std::string>& names, const std::vector<double>& vars) {
  switch (n.kind) {
    case ExprAst::Kind::Number:
      return n.value;
    case ExprAst::Kind::Variable:
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == n.name) return vars.at(i);
      throw DomainError("unbound variable '" + n.name + "'");
    case ExprAst::Kind::Negate:
      return -eval_node(*n.lhs, names, vars);
    case ExprAst::Kind::Function:
      return apply_function(n.name, eval_node(*n.lhs, names, vars));
    case ExprAst::Kind::Binary:
      return apply_binary(n.op, eval_node(*n.lhs, names, vars), eval_node(*n.rhs, names, vars));
  }
  return 0;
}

// Postfix program for fast evaluation over many points.
struct Instr {
  enum Op { Push, Load, Neg, Sin, Cos, Exp, Log, Sech, Tanh, Add, Sub, Mul, Div, Pow } op;
  double value = 0;
  int slot = 0;
};

void compile(const Node& n, const std::vector<std::string>& names, std::vector<Instr>& prog) {
  switch (n.kind) {
    case ExprAst::Kind::Number:
      prog.push_back({Instr::Push, n.value, 0});
      return;
    case ExprAst::Kind::Variable:
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == n.name) {
          prog.push_back({Instr::Load, 0, static_cast<int>(i)});
          return;
        }
      throw DomainError("unbound variable '" + n.name + "'");
    case ExprAst::Kind::Negate:
      compile(*n.lhs, names, prog);
      prog.push_back({Instr::Neg});
      return;
    case ExprAst::Kind::Function: {
      compile(*n.lhs, names, prog);
      static const std::array<std::pair<const char*, Instr::Op>, 6> table{
          {{"sin", Instr::Sin}, {"cos", Instr::Cos}, {"exp", Instr::Exp}, {"log", Instr::Log},
           {"sech", Instr::Sech}, {"tanh", Instr::Tanh}}};
      for (const auto& [name, op] : table)
        if (n.name == name) {
          prog.push_back({op});
          return;
        }
      throw DomainError("unknown function '" + n.name + "'");
    }
    case ExprAst::Kind::Binary:
      compile(*n.lhs, names, prog);
      compile(*n.rhs, names, prog);
      switch (n.op) {
        case '+': prog.push_back({Instr::Add}); return;
        case '-': prog.push_back({Instr::Sub}); return;
        case '*': prog.push_back({Instr::Mul}); return;
        case '/': prog.push_back({Instr::Div}); return;
        default: prog.push_back({Instr::Pow}); return;
      }
  }
}

double run(const std::vector<Instr>& prog, const double* vars, std::vector<double>& stack) {
  stack.clear();
  for (const Instr& in : prog) {
    switch (in.op) {
      case Instr::Push: stack.push_back(in.value); break;
      case Instr::Load: stack.push_back(vars[in.slot]); break;
      case Instr::Neg: stack.back() = -stack.back(); break;
      case Instr::Sin: stack.back() = std::sin(stack.back()); break;
      case Instr::Cos: stack.back() = std::cos(stack.back()); break;
      case Instr::Exp: stack.back() = std::exp(stack.back()); break;
      case Instr::Log: stack.back() = apply_function("log", stack.back()); break;
      case Instr::Sech: stack.back() = 1.0 / std::cosh(stack.back()); break;
      case Instr::Tanh: stack.back() = std::tanh(stack.back()); break;
      default: {
        const double b = stack.back();
        stack.pop_back();
        double& a = stack.back();
        switch (in.op) {
          case Instr::Add: a += b; break;
          case Instr::Sub: a -= b; break;
          case Instr::Mul: a *= b; break;
          case Instr::Div: a = apply_binary('/', a, b); break;
          default: a = std::pow(a, b); break;
        }
      }
    }
  }
  return stack.back();
}

}  // namespace

std::string ExprAst::to_string() const { return root_ ? print(*root_) : std::string(); }

std::set<std::string> ExprAst::variables() const {
  std::set<std::string> out;
  if (root_) collect(*root_, out);
  return out;
}

double ExprAst::evaluate(const std::vector<std::string>& names, const std::vector<double>& vars) const {
  const double v = eval_node(*root_, names, vars);
  if (!std::isfinite(v)) throw DomainError("expression '" + to_string() + "' is not finite");
  return v;
}

ExprAst parse_expr(std::string_view text) { return ExprAst(Parser(text).parse()); }

void check_expr(const ExprAst& e, const PeriodicGrid& grid, bool allow_time) {
  for (const auto& v : e.variables()) {
    if (v == "t") {
      if (!allow_time) throw DomainError("'t' is not allowed in '" + e.to_string() + "'");
      continue;
    }
    if (!grid.has_axis(v)) throw DomainError("expression '" + e.to_string() + "' uses '" + v + "', which is not a grid axis");
  }
}

ScalarField evaluate_on_grid(const ExprAst& e, const PeriodicGrid& grid, std::optional<double> time) {
  check_expr(e, grid, time.has_value());
  std::vector<std::string> names = grid.axes();
  names.push_back("t");
  std::vector<Instr> prog;
  compile(e.root(), names, prog);
  std::vector<double> vars(names.size(), time.value_or(0.0));
  std::vector<double> stack;
  ScalarField::Array out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto idx = grid.unravel(i);
    for (int a = 0; a < grid.dim(); ++a) vars[a] = grid.coordinate(a, idx[a]);
    const double v = run(prog, vars.data(), stack);
    if (!std::isfinite(v)) throw DomainError("expression '" + e.to_string() + "' is not finite on the grid");
    out[i] = v;
  }
  return ScalarField(grid, std::move(out));
}

std::vector<ExprAst> parse_expr_list(std::string_view text) {
  std::vector<ExprAst> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    const std::string_view piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    try {
      out.push_back(parse_expr(piece));
    } catch (const ExprError& e) {
      const std::size_t off = start + e.offset();
      std::string msg = e.what();
      const auto at = msg.find("offset ");
      if (at != std::string::npos) {
        const auto end = msg.find_first_not_of("0123456789", at + 7);
        msg = msg.substr(0, at + 7) + std::to_string(off) + (end == std::string::npos ? "" : msg.substr(end));
      }
      throw ExprError(msg, off);
    }
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

}  // namespace folcoil
