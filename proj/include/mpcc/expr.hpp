#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpcc {

/// Raised by the expression and model parsers.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset, int line = 0,
             int column = 0)
      : std::runtime_error(what), offset(offset), line(line), column(column) {}

  /// Byte offset into the parsed text.
  std::size_t offset;
  /// 1-based line and column, filled in by the model parser only.
  int line;
  int column;
};

/// Raised when an expression is evaluated outside the domain of one of its
/// operations.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op {
  kConst,
  kVar,
  kNeg,
  kSin,
  kCos,
  kExp,
  kLog,
  kSqrt,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
};

struct Node;

/// Immutable expression tree over indexed variables. Copies share nodes, so
/// an Expr is cheap to pass around and safe to read from many threads.
class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr constant(double value);
  static Expr variable(int index);

  Op op() const;
  /// Value of a constant node.
  double value() const;
  /// Variable index of a variable node.
  int index() const;
  /// Exponent of a pow node.
  int exponent() const;
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool is_constant() const { return op() == Op::kConst; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  /// Largest variable index referenced, or -1 for a closed expression.
  int max_variable() const;

  /// Structural equality.
  bool same_as(const Expr& other) const;

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  explicit Expr(std::nullptr_t) {}
  friend Expr make_node(Op, double, int, int, Expr, Expr);
  friend struct Node;

  std::shared_ptr<const Node> node_;
};

// Builders. Each folds constants and drops neutral elements.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, int exponent);
Expr apply(Op func, const Expr& arg);

/// Parses `text` against the expression grammar. Identifiers resolve to
/// their position in `vars`.
Expr parse_expr(std::string_view text, const std::vector<std::string>& vars);

/// Evaluates `e` at `w`. Throws DomainError instead of producing NaN.
double evaluate(const Expr& e, const double* w, std::size_t n);

template <typename Vector>
double evaluate(const Expr& e, const Vector& w) {
  return evaluate(e, w.data(), static_cast<std::size_t>(w.size()));
}

/// Exact partial derivative with respect to variable `var_index`.
Expr differentiate(const Expr& e, int var_index);

/// Infix rendering. Variables print by name when `vars` covers them.
std::string to_string(const Expr& e, const std::vector<std::string>& vars = {});

}  // namespace mpcc
