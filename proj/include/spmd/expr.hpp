#pragma once

// Arithmetic expression language evaluated by the workers.
//
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | power
//   power   := primary ('^' factor)?
//   primary := number | 'x' | ident '(' expr ')' | '(' expr ')'
//
// '^' is right-associative and binds tighter than unary minus, so "-x^2"
// is -(x^2) and "2^-1" is 2^(-1). A leading "y =" is accepted and ignored.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spmd::expr {

enum class TokenKind {
  number,
  variable,
  identifier,
  plus,
  minus,
  star,
  slash,
  caret,
  lparen,
  rparen,
};

struct Token {
  TokenKind kind;
  std::string_view text;
  std::size_t position;
};

// Splits source into tokens. Throws ParseError on an unrecognized character
// or a malformed number.
std::vector<Token> tokenize(std::string_view source);

enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };

enum class Function : std::uint8_t {
  sin,
  cos,
  tan,
  asin,
  acos,
  atan,
  exp,
  log,
  log10,
  sqrt,
  abs,
};

inline constexpr std::array<std::string_view, 11> kFunctionNames = {
    "sin", "cos", "tan", "asin", "acos", "atan",
    "exp", "log", "log10", "sqrt", "abs"};

std::string_view function_name(Function f);
// False when name is not one of the supported functions.
bool lookup_function(std::string_view name, Function& out);

enum class NodeKind : std::uint8_t { constant, variable, negate, binary, call };

struct Node {
  NodeKind kind = NodeKind::constant;
  BinaryOp op = BinaryOp::add;
  Function function = Function::sin;
  double value = 0.0;
  // Indices into Expression::nodes(); -1 when unused.
  std::int32_t left = -1;
  std::int32_t right = -1;
};

// Immutable expression tree stored in post-order: every child precedes its
// parent and the root is the last node.
class Expression {
 public:
  // Constants must be finite and non-negative; negative literals are
  // written as negate(constant).
  static Expression constant(double value);
  static Expression variable();
  static Expression negate(Expression child);
  static Expression binary(BinaryOp op, Expression left, Expression right);
  static Expression call(Function function, Expression argument);

  std::span<const Node> nodes() const noexcept { return nodes_; }
  const Node& root() const { return nodes_.back(); }
  std::size_t root_index() const noexcept { return nodes_.size() - 1; }

  // Structural equality; constants compare bitwise.
  friend bool operator==(const Expression& a, const Expression& b);

 private:
  Expression() = default;
  void append(const Expression& other);

  std::vector<Node> nodes_;
};

Expression parse(std::string_view source);

// Fully parenthesized canonical text; parse(to_text(e)) == e.
std::string to_text(const Expression& expression);

// Pure IEEE-754 evaluation. Domain problems surface as NaN or infinity.
double eval_scalar(const Expression& expression, double x);

struct GridEvaluation {
  std::vector<double> values;
  std::size_t nan_count = 0;
  double cpu_seconds = 0.0;
};

// Serial reference kernel. cpu_seconds is the calling thread's CPU time
// spent in the evaluation loop.
GridEvaluation eval_grid(const Expression& expression,
                         std::span<const double> points);

// OpenMP kernel over the same points; bitwise-identical values to
// eval_grid. cpu_seconds is process CPU time, so it sums over all threads.
GridEvaluation eval_grid_parallel(const Expression& expression,
                                  std::span<const double> points);

}  // namespace spmd::expr
