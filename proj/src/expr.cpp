#include "spmd/expr.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "spmd/cpu_clock.hpp"
#include "spmd/errors.hpp"

namespace spmd::expr {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

// Offset of the first character after an optional "y =" prefix.
std::size_t skip_assignment_prefix(std::string_view source) {
  std::size_t i = 0;
  while (i < source.size() && is_space(source[i])) ++i;
  if (i >= source.size() || source[i] != 'y') return 0;
  ++i;
  while (i < source.size() && is_space(source[i])) ++i;
  if (i >= source.size() || source[i] != '=') return 0;
  return i + 1;
}

std::size_t scan_number(std::string_view source, std::size_t begin) {
  std::size_t i = begin;
  std::size_t digits = 0;
  while (i < source.size() && is_digit(source[i])) ++i, ++digits;
  if (i < source.size() && source[i] == '.') {
    ++i;
    while (i < source.size() && is_digit(source[i])) ++i, ++digits;
  }
  if (digits == 0) throw ParseError("malformed number", begin);
  if (i < source.size() && (source[i] == 'e' || source[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < source.size() && (source[j] == '+' || source[j] == '-')) ++j;
    if (j >= source.size() || !is_digit(source[j]))
      throw ParseError("malformed exponent", i);
    while (j < source.size() && is_digit(source[j])) ++j;
    i = j;
  }
  return i;
}

double number_value(const Token& token) {
  double value = 0.0;
  const char* first = token.text.data();
  const char* last = first + token.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError("number out of range", token.position);
  return value;
}

std::vector<Token> tokenize_from(std::string_view source, std::size_t i) {
  std::vector<Token> tokens;
  while (i < source.size()) {
    const char c = source[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    TokenKind kind;
    if (is_digit(c) || c == '.') {
      i = scan_number(source, i);
      kind = TokenKind::number;
    } else if (is_ident_start(c)) {
      while (i < source.size() && is_ident_char(source[i])) ++i;
      kind = source.substr(start, i - start) == "x" ? TokenKind::variable
                                                    : TokenKind::identifier;
    } else {
      switch (c) {
        case '+': kind = TokenKind::plus; break;
        case '-': kind = TokenKind::minus; break;
        case '*': kind = TokenKind::star; break;
        case '/': kind = TokenKind::slash; break;
        case '^': kind = TokenKind::caret; break;
        case '(': kind = TokenKind::lparen; break;
        case ')': kind = TokenKind::rparen; break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", i);
      }
      ++i;
    }
    tokens.push_back({kind, source.substr(start, i - start), start});
  }
  return tokens;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::size_t end_position)
      : tokens_(std::move(tokens)), end_position_(end_position) {}

  Expression parse_all() {
    Expression e = parse_expr();
    if (!at_end()) throw ParseError("unexpected token '" +
                                        std::string(peek().text) + "'",
                                    peek().position);
    return e;
  }

 private:
  bool at_end() const { return next_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[next_]; }
  bool accept(TokenKind kind) {
    if (!at_end() && peek().kind == kind) {
      ++next_;
      return true;
    }
    return false;
  }
  std::size_t position() const {
    return at_end() ? end_position_ : peek().position;
  }
  [[noreturn]] void fail_unexpected() const {
    if (at_end()) throw ParseError("unexpected end of input", end_position_);
    throw ParseError("unexpected token '" + std::string(peek().text) + "'",
                     peek().position);
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept(TokenKind::plus))
        lhs = Expression::binary(BinaryOp::add, std::move(lhs), parse_term());
      else if (accept(TokenKind::minus))
        lhs = Expression::binary(BinaryOp::sub, std::move(lhs), parse_term());
      else
        return lhs;
    }
  }

  Expression parse_term() {
    Expression lhs = parse_factor();
    for (;;) {
      if (accept(TokenKind::star))
        lhs = Expression::binary(BinaryOp::mul, std::move(lhs), parse_factor());
      else if (accept(TokenKind::slash))
        lhs = Expression::binary(BinaryOp::div, std::move(lhs), parse_factor());
      else
        return lhs;
    }
  }

  Expression parse_factor() {
    if (accept(TokenKind::minus)) return Expression::negate(parse_factor());
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_primary();
    if (accept(TokenKind::caret))
      return Expression::binary(BinaryOp::pow, std::move(base), parse_factor());
    return base;
  }

  Expression parse_primary() {
    if (at_end()) fail_unexpected();
    const Token token = peek();
    switch (token.kind) {
      case TokenKind::number:
        ++next_;
        return Expression::constant(number_value(token));
      case TokenKind::variable:
        ++next_;
        return Expression::variable();
      case TokenKind::identifier: {
        ++next_;
        Function f;
        const bool known = lookup_function(token.text, f);
        if (!accept(TokenKind::lparen)) {
          if (known)
            throw ParseError("expected '(' after '" + std::string(token.text) +
                                 "'",
                             position());
          throw UnknownVariable(std::string(token.text), token.position);
        }
        if (!known) throw UnknownFunction(std::string(token.text), token.position);
        Expression argument = parse_expr();
        if (!accept(TokenKind::rparen)) {
          if (at_end()) throw ParseError("expected ')'", end_position_);
          fail_unexpected();
        }
        return Expression::call(f, std::move(argument));
      }
      case TokenKind::lparen: {
        ++next_;
        Expression inner = parse_expr();
        if (!accept(TokenKind::rparen)) {
          if (at_end()) throw ParseError("expected ')'", end_position_);
          fail_unexpected();
        }
        return inner;
      }
      default:
        fail_unexpected();
    }
  }

  std::vector<Token> tokens_;
  std::size_t end_position_;
  std::size_t next_ = 0;
};

char op_char(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return '+';
    case BinaryOp::sub: return '-';
    case BinaryOp::mul: return '*';
    case BinaryOp::div: return '/';
    case BinaryOp::pow: return '^';
  }
  return '?';
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void write_text(std::span<const Node> nodes, std::size_t index,
                std::string& out) {
  const Node& n = nodes[index];
  switch (n.kind) {
    case NodeKind::constant:
      append_double(out, n.value);
      break;
    case NodeKind::variable:
      out += 'x';
      break;
    case NodeKind::negate:
      out += "(-";
      write_text(nodes, static_cast<std::size_t>(n.left), out);
      out += ')';
      break;
    case NodeKind::binary:
      out += '(';
      write_text(nodes, static_cast<std::size_t>(n.left), out);
      out += op_char(n.op);
      write_text(nodes, static_cast<std::size_t>(n.right), out);
      out += ')';
      break;
    case NodeKind::call:
      out += function_name(n.function);
      out += '(';
      write_text(nodes, static_cast<std::size_t>(n.left), out);
      out += ')';
      break;
  }
}

double apply(Function f, double a) {
  switch (f) {
    case Function::sin: return std::sin(a);
    case Function::cos: return std::cos(a);
    case Function::tan: return std::tan(a);
    case Function::asin: return std::asin(a);
    case Function::acos: return std::acos(a);
    case Function::atan: return std::atan(a);
    case Function::exp: return std::exp(a);
    case Function::log: return std::log(a);
    case Function::log10: return std::log10(a);
    case Function::sqrt: return std::sqrt(a);
    case Function::abs: return std::fabs(a);
  }
  return std::nan("");
}

double apply(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::div: return a / b;
    case BinaryOp::pow: return std::pow(a, b);
  }
  return std::nan("");
}

// Post-order layout lets one forward sweep evaluate every node.
double evaluate(std::span<const Node> nodes, double x, double* scratch) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.kind) {
      case NodeKind::constant: scratch[i] = n.value; break;
      case NodeKind::variable: scratch[i] = x; break;
      case NodeKind::negate: scratch[i] = -scratch[n.left]; break;
      case NodeKind::binary:
        scratch[i] = apply(n.op, scratch[n.left], scratch[n.right]);
        break;
      case NodeKind::call: scratch[i] = apply(n.function, scratch[n.left]); break;
    }
  }
  return scratch[nodes.size() - 1];
}

bool equal_at(std::span<const Node> a, std::size_t ia, std::span<const Node> b,
              std::size_t ib) {
  const Node& x = a[ia];
  const Node& y = b[ib];
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case NodeKind::constant:
      return std::bit_cast<std::uint64_t>(x.value) ==
             std::bit_cast<std::uint64_t>(y.value);
    case NodeKind::variable:
      return true;
    case NodeKind::negate:
      return equal_at(a, x.left, b, y.left);
    case NodeKind::binary:
      return x.op == y.op && equal_at(a, x.left, b, y.left) &&
             equal_at(a, x.right, b, y.right);
    case NodeKind::call:
      return x.function == y.function && equal_at(a, x.left, b, y.left);
  }
  return false;
}

}  // namespace

std::string_view function_name(Function f) {
  return kFunctionNames[static_cast<std::size_t>(f)];
}

bool lookup_function(std::string_view name, Function& out) {
  for (std::size_t i = 0; i < kFunctionNames.size(); ++i) {
    if (kFunctionNames[i] == name) {
      out = static_cast<Function>(i);
      return true;
    }
  }
  return false;
}

std::vector<Token> tokenize(std::string_view source) {
  return tokenize_from(source, 0);
}

Expression Expression::constant(double value) {
  if (!std::isfinite(value) || std::signbit(value))
    throw std::invalid_argument("expression constants must be finite and >= 0");
  Expression e;
  Node n;
  n.kind = NodeKind::constant;
  n.value = value;
  e.nodes_.push_back(n);
  return e;
}

Expression Expression::variable() {
  Expression e;
  Node n;
  n.kind = NodeKind::variable;
  e.nodes_.push_back(n);
  return e;
}

void Expression::append(const Expression& other) {
  const auto offset = static_cast<std::int32_t>(nodes_.size());
  for (Node n : other.nodes_) {
    if (n.left >= 0) n.left += offset;
    if (n.right >= 0) n.right += offset;
    nodes_.push_back(n);
  }
}

Expression Expression::negate(Expression child) {
  Node n;
  n.kind = NodeKind::negate;
  n.left = static_cast<std::int32_t>(child.root_index());
  child.nodes_.push_back(n);
  return child;
}

Expression Expression::binary(BinaryOp op, Expression left, Expression right) {
  Node n;
  n.kind = NodeKind::binary;
  n.op = op;
  n.left = static_cast<std::int32_t>(left.root_index());
  left.append(right);
  n.right = static_cast<std::int32_t>(left.nodes_.size() - 1);
  left.nodes_.push_back(n);
  return left;
}

Expression Expression::call(Function function, Expression argument) {
  Node n;
  n.kind = NodeKind::call;
  n.function = function;
  n.left = static_cast<std::int32_t>(argument.root_index());
  argument.nodes_.push_back(n);
  return argument;
}

bool operator==(const Expression& a, const Expression& b) {
  return equal_at(a.nodes_, a.root_index(), b.nodes_, b.root_index());
}

Expression parse(std::string_view source) {
  const std::size_t begin = skip_assignment_prefix(source);
  std::vector<Token> tokens = tokenize_from(source, begin);
  if (tokens.empty()) throw ParseError("empty expression", source.size());
  Parser parser(std::move(tokens), source.size());
  return parser.parse_all();
}

std::string to_text(const Expression& expression) {
  std::string out;
  write_text(expression.nodes(), expression.root_index(), out);
  return out;
}

double eval_scalar(const Expression& expression, double x) {
  const auto nodes = expression.nodes();
  if (nodes.size() <= 64) {
    double scratch[64];
    return evaluate(nodes, x, scratch);
  }
  std::vector<double> scratch(nodes.size());
  return evaluate(nodes, x, scratch.data());
}

GridEvaluation eval_grid(const Expression& expression,
                         std::span<const double> points) {
  GridEvaluation result;
  result.values.resize(points.size());
  std::vector<double> scratch(expression.nodes().size());
  const auto nodes = expression.nodes();

  const double t1 = thread_cpu_seconds();
  std::size_t nans = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = evaluate(nodes, points[i], scratch.data());
    result.values[i] = v;
    nans += std::isnan(v) ? 1 : 0;
  }
  const double t2 = thread_cpu_seconds() - t1;

  result.nan_count = nans;
  result.cpu_seconds = t2 > 0.0 ? t2 : 0.0;
  return result;
}

GridEvaluation eval_grid_parallel(const Expression& expression,
                                  std::span<const double> points) {
  GridEvaluation result;
  result.values.resize(points.size());
  const auto nodes = expression.nodes();
  const auto count = static_cast<std::ptrdiff_t>(points.size());
  double* values = result.values.data();
  const double* xs = points.data();

  const double t1 = process_cpu_seconds();
  std::size_t nans = 0;
#pragma omp parallel reduction(+ : nans)
  {
    std::vector<double> scratch(nodes.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const double v = evaluate(nodes, xs[i], scratch.data());
      values[i] = v;
      nans += std::isnan(v) ? 1 : 0;
    }
  }
  const double t2 = process_cpu_seconds() - t1;

  result.nan_count = nans;
  result.cpu_seconds = t2 > 0.0 ? t2 : 0.0;
  return result;
}

}  // namespace spmd::expr
