#pragma once

// A small scalar expression language used by scenario files.
//
//   expr    := term   (('+' | '-') term)*
//   term    := unary  (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables are `t` and `x1`..`xn` for state expressions, or `s` for scalar
// envelopes (class-K functions). `pi` is a predefined constant. Functions:
// sin cos exp log sqrt atan abs (one argument), min max (two arguments).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stieltjes {

class Expr {
 public:
  enum class Op : std::uint8_t {
    Number,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    Abs,
    Min,
    Max,
  };

  struct Node {
    Op op = Op::Number;
    double value = 0.0;       // Number
    std::uint32_t var = 0;    // Var: 0 is t (or s), i >= 1 is x_i
    std::int32_t lhs = -1;    // first operand / argument
    std::int32_t rhs = -1;    // second operand / argument
    std::uint32_t offset = 0; // byte offset in the source
  };

  /// Parses a state expression over t, x1..x{dimension}. Throws ParseError.
  static Expr parse(std::string_view src, std::size_t dimension);
  /// Parses a scalar expression over the single variable s.
  static Expr parseScalar(std::string_view src);

  /// Evaluates at (t, x). log/sqrt of a negative argument throws
  /// EvaluationError naming the subexpression; other IEEE results pass through.
  double eval(double t, std::span<const double> x) const;
  /// Scalar form: evaluates with s bound to `s`.
  double operator()(double s) const { return eval(s, {}); }

  /// Canonical fully-parenthesized text; parses back to an equal tree.
  std::string print() const;

  std::size_t dimension() const noexcept { return dimension_; }
  bool isScalar() const noexcept { return scalar_; }
  const std::string& source() const noexcept { return source_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  /// Structural equality (ignores source text and offsets).
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  friend class Parser;
  double evalNode(std::int32_t i, double t, std::span<const double> x) const;
  void printNode(std::int32_t i, std::string& out) const;

  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  std::size_t dimension_ = 0;
  bool scalar_ = false;
  std::string source_;
};

inline Expr parse(std::string_view src, std::size_t dimension) { return Expr::parse(src, dimension); }
inline double evalExpr(const Expr& e, double t, std::span<const double> x) { return e.eval(t, x); }

/// Expression pair following the on/off-D_g pattern: `jump` is used at jump
/// times and defaults to `continuous`.
struct TwoBranchExpr {
  Expr continuous;
  std::optional<Expr> jump;

  const Expr& atJump() const noexcept { return jump ? *jump : continuous; }
};

}  // namespace stieltjes
