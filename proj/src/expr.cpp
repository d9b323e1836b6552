#include "mpcc/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace mpcc {

struct Node {
  Op op = Op::kConst;
  double value = 0.0;
  int index = -1;
  int exponent = 0;
  Expr a{nullptr};
  Expr b{nullptr};
};

namespace {

const Expr& empty_expr() {
  static const Expr e;
  return e;
}

double checked(double v, const char* what) {
  if (std::isnan(v)) {
    throw DomainError(std::string("result is not a number in ") + what);
  }
  return v;
}

double ipow(double base, int k) {
  if (k < 0) {
    if (base == 0.0) throw DomainError("zero raised to a negative power");
    return 1.0 / ipow(base, -k);
  }
  double result = 1.0;
  double b = base;
  while (k > 0) {
    if (k & 1) result *= b;
    b *= b;
    k >>= 1;
  }
  return result;
}

bool is_unary(Op op) {
  return op == Op::kNeg || op == Op::kSin || op == Op::kCos ||
         op == Op::kExp || op == Op::kLog || op == Op::kSqrt;
}

}  // namespace

Expr make_node(Op op, double value, int index, int exponent, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = value;
  n->index = index;
  n->exponent = exponent;
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

Expr::Expr() {
  static const std::shared_ptr<const Node> zero = std::make_shared<Node>();
  node_ = zero;
}

Expr Expr::constant(double value) {
  return make_node(Op::kConst, value, -1, 0, {}, {});
}

Expr Expr::variable(int index) {
  return make_node(Op::kVar, 0.0, index, 0, {}, {});
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
int Expr::index() const { return node_->index; }
int Expr::exponent() const { return node_->exponent; }
const Expr& Expr::lhs() const {
  return node_->op == Op::kConst || node_->op == Op::kVar ? empty_expr()
                                                           : node_->a;
}
const Expr& Expr::rhs() const {
  return node_->op == Op::kConst || node_->op == Op::kVar ? empty_expr()
                                                           : node_->b;
}

int Expr::max_variable() const {
  switch (op()) {
    case Op::kConst:
      return -1;
    case Op::kVar:
      return index();
    default: {
      int m = lhs().max_variable();
      if (!is_unary(op()) && op() != Op::kPow) {
        m = std::max(m, rhs().max_variable());
      }
      return m;
    }
  }
}

bool Expr::same_as(const Expr& other) const {
  if (node_ == other.node_) return true;
  if (op() != other.op()) return false;
  switch (op()) {
    case Op::kConst:
      return value() == other.value();
    case Op::kVar:
      return index() == other.index();
    case Op::kPow:
      return exponent() == other.exponent() && lhs().same_as(other.lhs());
    default:
      if (is_unary(op())) return lhs().same_as(other.lhs());
      return lhs().same_as(other.lhs()) && rhs().same_as(other.rhs());
  }
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.value() + b.value());
  }
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.op() == Op::kNeg) return a - b.lhs();
  return make_node(Op::kAdd, 0.0, -1, 0, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.value() - b.value());
  }
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  if (b.op() == Op::kNeg) return a + b.lhs();
  return make_node(Op::kSub, 0.0, -1, 0, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.value() * b.value());
  }
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  // Keep constants on the left so folding sees them.
  if (b.is_constant()) return make_node(Op::kMul, 0.0, -1, 0, b, a);
  return make_node(Op::kMul, 0.0, -1, 0, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.value() != 0.0) {
    return Expr::constant(a.value() / b.value());
  }
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return make_node(Op::kDiv, 0.0, -1, 0, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.value());
  if (a.op() == Op::kNeg) return a.lhs();
  return make_node(Op::kNeg, 0.0, -1, 0, a, {});
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (base.is_constant() && !(base.value() == 0.0 && exponent < 0)) {
    return Expr::constant(ipow(base.value(), exponent));
  }
  if (base.op() == Op::kPow) {
    return pow(base.lhs(), base.exponent() * exponent);
  }
  return make_node(Op::kPow, 0.0, -1, exponent, base, {});
}

Expr apply(Op func, const Expr& arg) {
  if (func == Op::kNeg) return -arg;
  return make_node(func, 0.0, -1, 0, arg, {});
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate(const Expr& e, const double* w, std::size_t n) {
  switch (e.op()) {
    case Op::kConst:
      return e.value();
    case Op::kVar:
      if (e.index() < 0 || static_cast<std::size_t>(e.index()) >= n) {
        throw std::out_of_range("variable index outside the point");
      }
      return w[e.index()];
    case Op::kNeg:
      return -evaluate(e.lhs(), w, n);
    case Op::kSin:
      return checked(std::sin(evaluate(e.lhs(), w, n)), "sin");
    case Op::kCos:
      return checked(std::cos(evaluate(e.lhs(), w, n)), "cos");
    case Op::kExp:
      return checked(std::exp(evaluate(e.lhs(), w, n)), "exp");
    case Op::kLog: {
      double x = evaluate(e.lhs(), w, n);
      if (!(x > 0.0)) throw DomainError("log of a non-positive value");
      return std::log(x);
    }
    case Op::kSqrt: {
      double x = evaluate(e.lhs(), w, n);
      if (x < 0.0 || std::isnan(x)) {
        throw DomainError("sqrt of a negative value");
      }
      return std::sqrt(x);
    }
    case Op::kAdd:
      return checked(evaluate(e.lhs(), w, n) + evaluate(e.rhs(), w, n), "+");
    case Op::kSub:
      return checked(evaluate(e.lhs(), w, n) - evaluate(e.rhs(), w, n), "-");
    case Op::kMul:
      return checked(evaluate(e.lhs(), w, n) * evaluate(e.rhs(), w, n), "*");
    case Op::kDiv: {
      double num = evaluate(e.lhs(), w, n);
      double den = evaluate(e.rhs(), w, n);
      if (den == 0.0) throw DomainError("division by zero");
      return checked(num / den, "/");
    }
    case Op::kPow:
      return checked(ipow(evaluate(e.lhs(), w, n), e.exponent()), "^");
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Differentiation

Expr differentiate(const Expr& e, int var_index) {
  const Expr& u = e.lhs();
  const Expr& v = e.rhs();
  switch (e.op()) {
    case Op::kConst:
      return Expr::constant(0.0);
    case Op::kVar:
      return Expr::constant(e.index() == var_index ? 1.0 : 0.0);
    case Op::kNeg:
      return -differentiate(u, var_index);
    case Op::kSin:
      return apply(Op::kCos, u) * differentiate(u, var_index);
    case Op::kCos:
      return -(apply(Op::kSin, u) * differentiate(u, var_index));
    case Op::kExp:
      return e * differentiate(u, var_index);
    case Op::kLog:
      return differentiate(u, var_index) / u;
    case Op::kSqrt:
      return differentiate(u, var_index) / (Expr::constant(2.0) * e);
    case Op::kAdd:
      return differentiate(u, var_index) + differentiate(v, var_index);
    case Op::kSub:
      return differentiate(u, var_index) - differentiate(v, var_index);
    case Op::kMul:
      return differentiate(u, var_index) * v + u * differentiate(v, var_index);
    case Op::kDiv: {
      Expr du = differentiate(u, var_index);
      Expr dv = differentiate(v, var_index);
      if (dv.is_constant(0.0)) return du / v;
      return (du * v - u * dv) / pow(v, 2);
    }
    case Op::kPow: {
      Expr du = differentiate(u, var_index);
      if (du.is_constant(0.0)) return Expr::constant(0.0);
      int k = e.exponent();
      return Expr::constant(k) * pow(u, k - 1) * du;
    }
  }
  return Expr::constant(0.0);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::kAdd:
    case Op::kSub:
      return 1;
    case Op::kMul:
    case Op::kDiv:
      return 2;
    case Op::kNeg:
      return 3;
    case Op::kPow:
      return 4;
    default:
      return 5;
  }
}

void print(std::ostream& os, const Expr& e,
           const std::vector<std::string>& vars) {
  auto child = [&](const Expr& c, int min_prec) {
    if (precedence(c) < min_prec) {
      os << '(';
      print(os, c, vars);
      os << ')';
    } else {
      print(os, c, vars);
    }
  };
  switch (e.op()) {
    case Op::kConst: {
      std::ostringstream s;
      s.precision(17);
      s << e.value();
      if (e.value() < 0) {
        os << '(' << s.str() << ')';
      } else {
        os << s.str();
      }
      return;
    }
    case Op::kVar:
      if (static_cast<std::size_t>(e.index()) < vars.size()) {
        os << vars[e.index()];
      } else {
        os << "x" << e.index();
      }
      return;
    case Op::kNeg:
      os << '-';
      child(e.lhs(), 4);
      return;
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
    case Op::kLog:
    case Op::kSqrt: {
      static const char* names[] = {"sin", "cos", "exp", "log", "sqrt"};
      os << names[static_cast<int>(e.op()) - static_cast<int>(Op::kSin)]
         << '(';
      print(os, e.lhs(), vars);
      os << ')';
      return;
    }
    case Op::kAdd:
      child(e.lhs(), 1);
      os << " + ";
      child(e.rhs(), 2);
      return;
    case Op::kSub:
      child(e.lhs(), 1);
      os << " - ";
      child(e.rhs(), 2);
      return;
    case Op::kMul:
      child(e.lhs(), 2);
      os << '*';
      child(e.rhs(), 3);
      return;
    case Op::kDiv:
      child(e.lhs(), 2);
      os << '/';
      child(e.rhs(), 3);
      return;
    case Op::kPow:
      child(e.lhs(), 5);
      if (e.exponent() < 0) {
        // Negative exponents only arise from differentiation.
        os << "^(" << e.exponent() << ')';
      } else {
        os << '^' << e.exponent();
      }
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e, const std::vector<std::string>& vars) {
  std::ostringstream os;
  print(os, e, vars);
  return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  Expr parse() {
    Expr e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("syntax error at offset " + std::to_string(pos_) + ": " +
                         msg,
                     pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) {
        e = e + term();
      } else if (accept('-')) {
        e = e - term();
      } else {
        return e;
      }
    }
  }

  Expr term() {
    Expr e = factor();
    for (;;) {
      if (accept('*')) {
        e = e * factor();
      } else if (accept('/')) {
        e = e / factor();
      } else {
        return e;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return -factor();
    Expr base = atom();
    if (!accept('^')) return base;
    std::vector<int> exponents{integer()};
    while (accept('^')) exponents.push_back(integer());
    // Right-associative: a^b^c is a^(b^c).
    long long k = exponents.back();
    for (auto it = exponents.rbegin() + 1; it != exponents.rend(); ++it) {
      k = static_cast<long long>(ipow(*it, static_cast<int>(k)));
      if (k > 1000000) fail("exponent too large");
    }
    return pow(base, static_cast<int>(k));
  }

  int integer() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) {
      fail("expected an integer exponent");
    }
    if (pos_ < text_.size() &&
        (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      pos_ = start;
      throw ParseError("non-integer exponent at offset " +
                           std::to_string(start),
                       start);
    }
    if (pos_ - start > 6) fail("exponent too large");
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  Expr atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(text_.substr(start, pos_ - start));
      static const std::pair<const char*, Op> funcs[] = {
          {"sin", Op::kSin}, {"cos", Op::kCos},   {"exp", Op::kExp},
          {"log", Op::kLog}, {"sqrt", Op::kSqrt},
      };
      for (const auto& [fname, op] : funcs) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after " + name);
          Expr arg = expr();
          if (!accept(')')) fail("expected ')'");
          return apply(op, arg);
        }
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) return Expr::variable(static_cast<int>(i));
      }
      throw ParseError("unknown identifier '" + name + "' at offset " +
                           std::to_string(start),
                       start);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      return pos_ - s;
    };
    std::size_t count = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        ++pos_;
      }
      if (digits() == 0) {
        pos_ = mark;
        fail("malformed exponent in number");
      }
    }
    std::string token(text_.substr(start, pos_ - start));
    return Expr::constant(std::strtod(token.c_str(), nullptr));
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const std::vector<std::string>& vars) {
  return Parser(text, vars).parse();
}

}  // namespace mpcc
