#pragma once

// Reference evaluator and random expression generator shared by tests.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Reference evaluator: shunting-yard to RPN, then a stack machine.
// Precedence: + - (1) < * / (2) < unary - (3) < ^ (4, right associative).
class ShuntingYard {
 public:
  static double eval(const std::string& src, double t, const std::vector<double>& x) {
    return run(toRpn(tokenize(src)), t, x);
  }

 private:
  struct Tok {
    enum Kind { Num, Var, Op, Func, LParen, RParen, Comma } kind;
    std::string text;
    double value = 0.0;
    int args = 0;
  };

  static std::vector<Tok> tokenize(const std::string& s) {
    std::vector<Tok> out;
    std::size_t i = 0;
    while (i < s.size()) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        char* end = nullptr;
        const double v = std::strtod(s.c_str() + i, &end);
        out.push_back({Tok::Num, "", v});
        i = static_cast<std::size_t>(end - s.c_str());
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t j = i;
        while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
        const std::string id = s.substr(i, j - i);
        std::size_t k = j;
        while (k < s.size() && s[k] == ' ') ++k;
        if (k < s.size() && s[k] == '(') {
          out.push_back({Tok::Func, id});
        } else if (id == "pi") {
          out.push_back({Tok::Num, "", std::numbers::pi});
        } else {
          out.push_back({Tok::Var, id});
        }
        i = j;
      } else if (c == '(') {
        out.push_back({Tok::LParen, "("});
        ++i;
      } else if (c == ')') {
        out.push_back({Tok::RParen, ")"});
        ++i;
      } else if (c == ',') {
        out.push_back({Tok::Comma, ","});
        ++i;
      } else {
        const bool prefix = out.empty() || out.back().kind == Tok::Op || out.back().kind == Tok::LParen ||
                            out.back().kind == Tok::Comma;
        out.push_back({Tok::Op, (c == '-' && prefix) ? "neg" : std::string(1, c)});
        ++i;
      }
    }
    return out;
  }

  static int prec(const std::string& op) {
    if (op == "+" || op == "-") return 1;
    if (op == "*" || op == "/") return 2;
    if (op == "neg") return 3;
    return 4;  // ^
  }

  static std::vector<Tok> toRpn(const std::vector<Tok>& toks) {
    std::vector<Tok> out;
    std::vector<Tok> ops;
    std::vector<int> argCount;
    for (const auto& tk : toks) {
      switch (tk.kind) {
        case Tok::Num:
        case Tok::Var:
          out.push_back(tk);
          break;
        case Tok::Func:
          ops.push_back(tk);
          break;
        case Tok::Op:
          if (tk.text != "neg") {
            const bool right = tk.text == "^";
            while (!ops.empty() && ops.back().kind == Tok::Op &&
                   (prec(ops.back().text) > prec(tk.text) || (!right && prec(ops.back().text) == prec(tk.text)))) {
              out.push_back(ops.back());
              ops.pop_back();
            }
          }
          ops.push_back(tk);
          break;
        case Tok::LParen:
          ops.push_back(tk);
          argCount.push_back(1);
          break;
        case Tok::Comma:
          while (ops.back().kind != Tok::LParen) {
            out.push_back(ops.back());
            ops.pop_back();
          }
          ++argCount.back();
          break;
        case Tok::RParen: {
          while (ops.back().kind != Tok::LParen) {
            out.push_back(ops.back());
            ops.pop_back();
          }
          ops.pop_back();
          const int n = argCount.back();
          argCount.pop_back();
          if (!ops.empty() && ops.back().kind == Tok::Func) {
            Tok f = ops.back();
            f.args = n;
            out.push_back(f);
            ops.pop_back();
          }
          break;
        }
      }
    }
    while (!ops.empty()) {
      out.push_back(ops.back());
      ops.pop_back();
    }
    return out;
  }

  static double run(const std::vector<Tok>& rpn, double t, const std::vector<double>& x) {
    std::vector<double> st;
    auto pop = [&] {
      const double v = st.back();
      st.pop_back();
      return v;
    };
    for (const auto& tk : rpn) {
      if (tk.kind == Tok::Num) {
        st.push_back(tk.value);
      } else if (tk.kind == Tok::Var) {
        st.push_back(tk.text == "t" ? t : x[std::stoul(tk.text.substr(1)) - 1]);
      } else if (tk.kind == Tok::Op) {
        if (tk.text == "neg") {
          st.push_back(-pop());
          continue;
        }
        const double b = pop();
        const double a = pop();
        switch (tk.text[0]) {
          case '+': st.push_back(a + b); break;
          case '-': st.push_back(a - b); break;
          case '*': st.push_back(a * b); break;
          case '/': st.push_back(a / b); break;
          default: st.push_back(std::pow(a, b)); break;
        }
      } else {
        if (tk.args == 2) {
          const double b = pop();
          const double a = pop();
          // first argument wins ties and unordered comparisons
          st.push_back(tk.text == "min" ? (b < a ? b : a) : (a < b ? b : a));
          continue;
        }
        const double a = pop();
        if (tk.text == "sin") st.push_back(std::sin(a));
        else if (tk.text == "cos") st.push_back(std::cos(a));
        else if (tk.text == "exp") st.push_back(std::exp(a));
        else if (tk.text == "atan") st.push_back(std::atan(a));
        else if (tk.text == "abs") st.push_back(std::fabs(a));
        else if (tk.text == "sqrt") st.push_back(std::sqrt(a));
        else st.push_back(std::log(a));
      }
    }
    return st.back();
  }
};

class RandomExpr {
 public:
  explicit RandomExpr(unsigned seed) : rng_(seed) {}

  std::string make(int depth) {
    const int pick = std::uniform_int_distribution<int>(0, depth <= 0 ? 1 : 9)(rng_);
    switch (pick) {
      case 0: return number();
      case 1: return variable();
      case 2:
      case 3:
      case 4: return make(depth - 1) + " " + binop() + " " + make(depth - 1);
      case 5: return "-" + make(depth - 1);
      case 6: return "(" + make(depth - 1) + ")";
      case 7: return unaryFunc() + "(" + make(depth - 1) + ")";
      case 8: return (coin() ? "min(" : "max(") + make(depth - 1) + ", " + make(depth - 1) + ")";
      default: return (coin() ? "sqrt(abs(" : "log(abs(") + make(depth - 1) + ") + 0.5)";
    }
  }

 private:
  bool coin() { return std::uniform_int_distribution<int>(0, 1)(rng_) == 1; }
  std::string number() {
    const int whole = std::uniform_int_distribution<int>(0, 20)(rng_);
    const int frac = std::uniform_int_distribution<int>(0, 999)(rng_);
    return std::to_string(whole) + "." + std::to_string(frac);
  }
  std::string variable() {
    const char* vars[] = {"t", "x1", "x2", "pi"};
    return vars[std::uniform_int_distribution<int>(0, 3)(rng_)];
  }
  std::string binop() {
    const char* ops[] = {"+", "-", "*", "/", "^"};
    return ops[std::uniform_int_distribution<int>(0, 4)(rng_)];
  }
  std::string unaryFunc() {
    const char* fs[] = {"sin", "cos", "exp", "atan", "abs"};
    return fs[std::uniform_int_distribution<int>(0, 4)(rng_)];
  }
  std::mt19937 rng_;
};

inline bool sameBits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace oracle
