#include "torlink/expression.hpp"

#include "torlink/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace torlink {

namespace {

using Op = Expression::Op;
using Instr = Expression::Instr;

struct Function {
  std::string_view name;
  Op op;
  int arity;
};

constexpr Function kFunctions[] = {
    {"sin", Op::Sin, 1},     {"cos", Op::Cos, 1},   {"tan", Op::Tan, 1},   {"exp", Op::Exp, 1},
    {"log", Op::Log, 1},     {"sqrt", Op::Sqrt, 1}, {"abs", Op::Abs, 1},   {"tanh", Op::Tanh, 1},
    {"atan2", Op::Atan2, 2}, {"pow", Op::Pow, 2},   {"min", Op::Min, 2},   {"max", Op::Max, 2},
};

class Parser {
 public:
  Parser(std::string_view text, const Expression::Constants& constants, int line, int column_offset)
      : text_(text), constants_(constants), line_(line), column_offset_(column_offset) {}

  std::vector<Instr> run() {
    skip_space();
    if (pos_ == text_.size()) fail("empty expression");
    expr();
    skip_space();
    if (pos_ != text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_, column_offset_ + static_cast<int>(pos_) + 1, msg);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of expression");
      fail(std::string("expected '") + c + "'");
    }
  }

  void expr() {
    term();
    for (;;) {
      if (accept('+')) {
        term();
        out_.push_back({Op::Add});
      } else if (accept('-')) {
        term();
        out_.push_back({Op::Sub});
      } else {
        return;
      }
    }
  }

  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        out_.push_back({Op::Mul});
      } else if (accept('/')) {
        unary();
        out_.push_back({Op::Div});
      } else {
        return;
      }
    }
  }

  void unary() {
    if (accept('-')) {
      unary();
      out_.push_back({Op::Neg});
    } else if (accept('+')) {
      unary();
    } else {
      power();
    }
  }

  void power() {
    primary();
    if (accept('^')) {
      unary();
      out_.push_back({Op::Pow});
    }
  }

  void primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      expr();
      expect(')');
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      identifier();
      return;
    }
    fail(std::string("unexpected '") + c + "'");
  }

  void number() {
    double v = 0.0;
    const char* begin = text_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(begin, text_.data() + text_.size(), v);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    out_.push_back({Op::Const, v});
  }

  void identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      const auto* fn = std::find_if(std::begin(kFunctions), std::end(kFunctions),
                                    [&](const Function& f) { return f.name == name; });
      if (fn == std::end(kFunctions)) {
        pos_ = start;
        fail("unknown function '" + std::string(name) + "'");
      }
      ++pos_;
      for (int i = 0; i < fn->arity; ++i) {
        if (i > 0) expect(',');
        expr();
      }
      expect(')');
      out_.push_back({fn->op});
      return;
    }
    if (name == "x") {
      out_.push_back({Op::VarX});
    } else if (name == "y") {
      out_.push_back({Op::VarY});
    } else if (name == "theta") {
      out_.push_back({Op::VarTheta});
    } else if (name == "pi") {
      out_.push_back({Op::Const, std::numbers::pi});
    } else if (name == "e") {
      out_.push_back({Op::Const, std::numbers::e});
    } else if (auto it = constants_.find(name); it != constants_.end()) {
      out_.push_back({Op::Const, it->second});
    } else {
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
  }

  std::string_view text_;
  const Expression::Constants& constants_;
  int line_;
  int column_offset_;
  std::size_t pos_ = 0;
  std::vector<Instr> out_;
};

struct Dual {
  double v = 0.0;
  Vec3 g = Vec3::Zero();
};

Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.g + b.g}; }
Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.g - b.g}; }
Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, b.v * a.g + a.v * b.g}; }
Dual operator/(const Dual& a, const Dual& b) { return {a.v / b.v, (b.v * a.g - a.v * b.g) / (b.v * b.v)}; }
Dual operator-(const Dual& a) { return {-a.v, -a.g}; }
Dual chain(const Dual& a, double v, double dv) { return {v, dv * a.g}; }

Dual pow(const Dual& a, const Dual& b) {
  const double v = std::pow(a.v, b.v);
  if (b.g.isZero(0.0)) {
    const double dv = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
    return chain(a, v, dv);
  }
  return {v, v * (b.g * std::log(a.v) + b.v * a.g / a.v)};
}
Dual sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
Dual cos(const Dual& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
Dual tan(const Dual& a) {
  const double t = std::tan(a.v);
  return chain(a, t, 1.0 + t * t);
}
Dual exp(const Dual& a) {
  const double v = std::exp(a.v);
  return chain(a, v, v);
}
Dual log(const Dual& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
Dual sqrt(const Dual& a) {
  const double v = std::sqrt(a.v);
  return chain(a, v, 0.5 / v);
}
Dual abs(const Dual& a) { return chain(a, std::abs(a.v), a.v < 0.0 ? -1.0 : 1.0); }
Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return chain(a, t, 1.0 - t * t);
}
Dual atan2(const Dual& y, const Dual& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (x.v * y.g - y.v * x.g) / r2};
}
Dual min(const Dual& a, const Dual& b) { return a.v <= b.v ? a : b; }
Dual max(const Dual& a, const Dual& b) { return a.v >= b.v ? a : b; }

template <class T>
T make_const(double v) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return Dual{v, Vec3::Zero()};
  }
}

template <class T>
T run(const std::vector<Instr>& program, const T& x, const T& y, const T& theta) {
  using std::abs, std::atan2, std::cos, std::exp, std::log, std::pow, std::sin, std::sqrt, std::tan, std::tanh;
  using std::max, std::min;
  T stack[64]{};
  std::vector<T> big;
  T* s = stack;
  if (program.size() > 64) {
    big.resize(program.size());
    s = big.data();
  }
  std::size_t n = 0;
  for (const Instr& in : program) {
    switch (in.op) {
      case Op::Const: s[n++] = make_const<T>(in.value); break;
      case Op::VarX: s[n++] = x; break;
      case Op::VarY: s[n++] = y; break;
      case Op::VarTheta: s[n++] = theta; break;
      case Op::Add: --n; s[n - 1] = s[n - 1] + s[n]; break;
      case Op::Sub: --n; s[n - 1] = s[n - 1] - s[n]; break;
      case Op::Mul: --n; s[n - 1] = s[n - 1] * s[n]; break;
      case Op::Div: --n; s[n - 1] = s[n - 1] / s[n]; break;
      case Op::Pow: --n; s[n - 1] = pow(s[n - 1], s[n]); break;
      case Op::Atan2: --n; s[n - 1] = atan2(s[n - 1], s[n]); break;
      case Op::Min: --n; s[n - 1] = min(s[n - 1], s[n]); break;
      case Op::Max: --n; s[n - 1] = max(s[n - 1], s[n]); break;
      case Op::Neg: s[n - 1] = -s[n - 1]; break;
      case Op::Sin: s[n - 1] = sin(s[n - 1]); break;
      case Op::Cos: s[n - 1] = cos(s[n - 1]); break;
      case Op::Tan: s[n - 1] = tan(s[n - 1]); break;
      case Op::Exp: s[n - 1] = exp(s[n - 1]); break;
      case Op::Log: s[n - 1] = log(s[n - 1]); break;
      case Op::Sqrt: s[n - 1] = sqrt(s[n - 1]); break;
      case Op::Abs: s[n - 1] = abs(s[n - 1]); break;
      case Op::Tanh: s[n - 1] = tanh(s[n - 1]); break;
    }
  }
  return s[0];
}

}  // namespace

Expression Expression::parse(std::string_view text, const Constants& constants, int line, int column_offset) {
  Expression e;
  e.text_ = std::string(text);
  e.program_ = Parser(text, constants, line, column_offset).run();
  return e;
}

double Expression::operator()(double x, double y, double theta) const { return run<double>(program_, x, y, theta); }

double Expression::evaluate(const Vec3& at, Vec3* gradient) const {
  if (!gradient) return (*this)(at.x(), at.y(), at.z());
  const Dual r = run<Dual>(program_, Dual{at.x(), Vec3::UnitX()}, Dual{at.y(), Vec3::UnitY()},
                           Dual{at.z(), Vec3::UnitZ()});
  *gradient = r.g;
  return r.v;
}

FieldSpec expression_field(const Expression& ex, const Expression& ey, const Expression& etheta, double fd_step) {
  auto value = [ex, ey, etheta](const ChartPoint& p) {
    return Vec3(ex(p.x(), p.y(), p.theta()), ey(p.x(), p.y(), p.theta()), etheta(p.x(), p.y(), p.theta()));
  };
  auto jacobian = [ex, ey, etheta](const ChartPoint& p) {
    Mat3 j;
    Vec3 g;
    const Vec3 at = p.vector();
    ex.evaluate(at, &g);
    j.row(0) = g.transpose();
    ey.evaluate(at, &g);
    j.row(1) = g.transpose();
    etheta.evaluate(at, &g);
    j.row(2) = g.transpose();
    if (!j.allFinite()) throw Error(ErrorCode::NonFinite, "field Jacobian produced a non-finite value");
    return j;
  };
  return FieldSpec(std::move(value), std::move(jacobian), fd_step);
}

double periodicity_defect(const Expression& e, double disc_radius, int probes) {
  double worst = 0.0;
  for (int i = 0; i < probes; ++i) {
    for (int j = 0; j < probes; ++j) {
      const double x = disc_radius * (-1.0 + 2.0 * i / (probes - 1));
      const double y = disc_radius * (-1.0 + 2.0 * j / (probes - 1));
      if (x * x + y * y > disc_radius * disc_radius) continue;
      const double a = e(x, y, 0.0);
      const double b = e(x, y, 1.0);
      if (std::isfinite(a) && std::isfinite(b)) worst = std::max(worst, std::abs(a - b));
    }
  }
  return worst;
}

}  // namespace torlink
