#include "stieltjes/expr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "stieltjes/errors.hpp"

namespace stieltjes {

namespace {

struct FunctionInfo {
  std::string_view name;
  Expr::Op op;
  int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Expr::Op::Sin, 1},   {"cos", Expr::Op::Cos, 1},   {"exp", Expr::Op::Exp, 1},
    {"log", Expr::Op::Log, 1},   {"sqrt", Expr::Op::Sqrt, 1}, {"atan", Expr::Op::Atan, 1},
    {"abs", Expr::Op::Abs, 1},   {"min", Expr::Op::Min, 2},   {"max", Expr::Op::Max, 2},
};

const FunctionInfo* findFunction(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view functionName(Expr::Op op) {
  for (const auto& f : kFunctions) {
    if (f.op == op) return f.name;
  }
  return "?";
}

char binarySymbol(Expr::Op op) {
  switch (op) {
    case Expr::Op::Add: return '+';
    case Expr::Op::Sub: return '-';
    case Expr::Op::Mul: return '*';
    case Expr::Op::Div: return '/';
    case Expr::Op::Pow: return '^';
    default: return '?';
  }
}

bool isIdentStart(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool isIdentChar(char c) { return isIdentStart(c) || (c >= '0' && c <= '9'); }
bool isDigit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

class Parser {
 public:
  Parser(std::string_view src, std::size_t dimension, bool scalar) : src_(src) {
    expr_.dimension_ = dimension;
    expr_.scalar_ = scalar;
    expr_.source_ = std::string(src);
  }

  Expr run() {
    skipSpace();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    expr_.root_ = parseSum();
    skipSpace();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return std::move(expr_);
  }

 private:
  using Op = Expr::Op;

  std::int32_t add(Expr::Node n) {
    expr_.nodes_.push_back(n);
    return static_cast<std::int32_t>(expr_.nodes_.size() - 1);
  }

  void skipSpace() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skipSpace();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::int32_t parseSum() {
    auto lhs = parseProduct();
    for (;;) {
      skipSpace();
      const auto at = pos_;
      if (accept('+')) {
        lhs = add({Op::Add, 0.0, 0, lhs, parseProduct(), static_cast<std::uint32_t>(at)});
      } else if (accept('-')) {
        lhs = add({Op::Sub, 0.0, 0, lhs, parseProduct(), static_cast<std::uint32_t>(at)});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parseProduct() {
    auto lhs = parseUnary();
    for (;;) {
      skipSpace();
      const auto at = pos_;
      if (accept('*')) {
        lhs = add({Op::Mul, 0.0, 0, lhs, parseUnary(), static_cast<std::uint32_t>(at)});
      } else if (accept('/')) {
        lhs = add({Op::Div, 0.0, 0, lhs, parseUnary(), static_cast<std::uint32_t>(at)});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parseUnary() {
    skipSpace();
    const auto at = pos_;
    if (accept('-')) return add({Op::Neg, 0.0, 0, parseUnary(), -1, static_cast<std::uint32_t>(at)});
    return parsePower();
  }

  std::int32_t parsePower() {
    auto base = parsePrimary();
    skipSpace();
    const auto at = pos_;
    if (accept('^')) return add({Op::Pow, 0.0, 0, base, parseUnary(), static_cast<std::uint32_t>(at)});
    return base;
  }

  std::int32_t parsePrimary() {
    skipSpace();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    const auto at = pos_;
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parseSum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (isDigit(c) || c == '.') return parseNumber();
    if (isIdentStart(c)) {
      while (pos_ < src_.size() && isIdentChar(src_[pos_])) ++pos_;
      const auto name = src_.substr(at, pos_ - at);
      skipSpace();
      if (pos_ < src_.size() && src_[pos_] == '(') return parseCall(name, at);
      return parseVariable(name, at);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  std::int32_t parseNumber() {
    const auto at = pos_;
    auto end = pos_;
    while (end < src_.size() && isDigit(src_[end])) ++end;
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      while (end < src_.size() && isDigit(src_[end])) ++end;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      auto e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e < src_.size() && isDigit(src_[e])) {
        end = e;
        while (end < src_.size() && isDigit(src_[end])) ++end;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + at, src_.data() + end, v);
    if (ec != std::errc() || ptr != src_.data() + end) throw ParseError("malformed number", at);
    pos_ = end;
    return add({Op::Number, v, 0, -1, -1, static_cast<std::uint32_t>(at)});
  }

  std::int32_t parseVariable(std::string_view name, std::size_t at) {
    const auto off = static_cast<std::uint32_t>(at);
    if (name == "pi") return add({Op::Number, std::numbers::pi, 0, -1, -1, off});
    if (expr_.scalar_) {
      if (name == "s") return add({Op::Var, 0.0, 0, -1, -1, off});
      throw ParseError("unknown identifier '" + std::string(name) + "' (scalar expressions use 's')", at);
    }
    if (name == "t") return add({Op::Var, 0.0, 0, -1, -1, off});
    if (name.size() >= 2 && name[0] == 'x' && name[1] != '0') {
      std::uint32_t idx = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (ec == std::errc() && ptr == name.data() + name.size()) {
        if (idx == 0 || idx > expr_.dimension_) {
          throw ParseError("variable '" + std::string(name) + "' exceeds dimension " +
                               std::to_string(expr_.dimension_),
                           at);
        }
        return add({Op::Var, 0.0, idx, -1, -1, off});
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", at);
  }

  std::int32_t parseCall(std::string_view name, std::size_t at) {
    const auto* fn = findFunction(name);
    if (!fn) throw ParseError("unknown function '" + std::string(name) + "'", at);
    accept('(');
    std::vector<std::int32_t> args;
    if (!accept(')')) {
      do {
        args.push_back(parseSum());
      } while (accept(','));
      if (!accept(')')) throw ParseError("expected ')' or ','", pos_);
    }
    if (static_cast<int>(args.size()) != fn->arity) {
      throw ParseError(std::string(name) + " expects " + std::to_string(fn->arity) + " argument(s), got " +
                           std::to_string(args.size()),
                       at);
    }
    return add({fn->op, 0.0, 0, args[0], fn->arity == 2 ? args[1] : -1, static_cast<std::uint32_t>(at)});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Expr expr_;
};

Expr Expr::parse(std::string_view src, std::size_t dimension) { return Parser(src, dimension, false).run(); }

Expr Expr::parseScalar(std::string_view src) { return Parser(src, 0, true).run(); }

double Expr::eval(double t, std::span<const double> x) const { return evalNode(root_, t, x); }

double Expr::evalNode(std::int32_t i, double t, std::span<const double> x) const {
  const Node& n = nodes_[static_cast<std::size_t>(i)];
  switch (n.op) {
    case Op::Number: return n.value;
    case Op::Var: return n.var == 0 ? t : x[n.var - 1];
    case Op::Add: return evalNode(n.lhs, t, x) + evalNode(n.rhs, t, x);
    case Op::Sub: return evalNode(n.lhs, t, x) - evalNode(n.rhs, t, x);
    case Op::Mul: return evalNode(n.lhs, t, x) * evalNode(n.rhs, t, x);
    case Op::Div: return evalNode(n.lhs, t, x) / evalNode(n.rhs, t, x);
    case Op::Pow: {
      const double b = evalNode(n.lhs, t, x);
      return std::pow(b, evalNode(n.rhs, t, x));
    }
    case Op::Neg: return -evalNode(n.lhs, t, x);
    case Op::Sin: return std::sin(evalNode(n.lhs, t, x));
    case Op::Cos: return std::cos(evalNode(n.lhs, t, x));
    case Op::Exp: return std::exp(evalNode(n.lhs, t, x));
    case Op::Atan: return std::atan(evalNode(n.lhs, t, x));
    case Op::Abs: return std::abs(evalNode(n.lhs, t, x));
    case Op::Log:
    case Op::Sqrt: {
      const double a = evalNode(n.lhs, t, x);
      if (a < 0.0) {
        std::string sub;
        printNode(i, sub);
        char buf[64];
        std::snprintf(buf, sizeof buf, " (argument %.17g)", a);
        throw EvaluationError("domain error in " + sub + buf, t);
      }
      return n.op == Op::Log ? std::log(a) : std::sqrt(a);
    }
    case Op::Min: {
      const double a = evalNode(n.lhs, t, x);
      return std::min(a, evalNode(n.rhs, t, x));
    }
    case Op::Max: {
      const double a = evalNode(n.lhs, t, x);
      return std::max(a, evalNode(n.rhs, t, x));
    }
  }
  return 0.0;
}

std::string Expr::print() const {
  std::string out;
  printNode(root_, out);
  return out;
}

void Expr::printNode(std::int32_t i, std::string& out) const {
  const Node& n = nodes_[static_cast<std::size_t>(i)];
  switch (n.op) {
    case Op::Number: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case Op::Var:
      if (n.var == 0) {
        out += scalar_ ? "s" : "t";
      } else {
        out += "x" + std::to_string(n.var);
      }
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow:
      out += '(';
      printNode(n.lhs, out);
      out += ' ';
      out += binarySymbol(n.op);
      out += ' ';
      printNode(n.rhs, out);
      out += ')';
      return;
    case Op::Neg:
      out += "(-";
      printNode(n.lhs, out);
      out += ')';
      return;
    default:
      out += functionName(n.op);
      out += '(';
      printNode(n.lhs, out);
      if (n.rhs >= 0) {
        out += ", ";
        printNode(n.rhs, out);
      }
      out += ')';
      return;
  }
}

namespace {

bool equalNodes(const Expr& a, std::int32_t i, const Expr& b, std::int32_t j) {
  if ((i < 0) != (j < 0)) return false;
  if (i < 0) return true;
  const auto& x = a.nodes()[static_cast<std::size_t>(i)];
  const auto& y = b.nodes()[static_cast<std::size_t>(j)];
  if (x.op != y.op) return false;
  if (x.op == Expr::Op::Number) return std::bit_cast<std::uint64_t>(x.value) == std::bit_cast<std::uint64_t>(y.value);
  if (x.op == Expr::Op::Var) return x.var == y.var;
  return equalNodes(a, x.lhs, b, y.lhs) && equalNodes(a, x.rhs, b, y.rhs);
}

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
  if (a.scalar_ != b.scalar_ || a.dimension_ != b.dimension_) return false;
  return equalNodes(a, a.root_, b, b.root_);
}

}  // namespace stieltjes
