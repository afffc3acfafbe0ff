#pragma once

#include "torlink/field.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace torlink {

/// Scalar expression in x, y, theta compiled to a postfix program.
///
/// Grammar: sums and products with the usual precedence, `^` right
/// associative and binding tighter than unary minus, calls to
/// sin cos tan exp log sqrt abs tanh atan2 pow min max, constants pi and e and
/// any named constant passed at parse time.
class Expression {
 public:
  using Constants = std::map<std::string, double, std::less<>>;

  /// Throws ParseError; `line` and `column_offset` place errors inside a larger file.
  static Expression parse(std::string_view text, const Constants& constants = {}, int line = 1,
                          int column_offset = 0);

  double operator()(double x, double y, double theta) const;

  /// Value and exact gradient (d/dx, d/dy, d/dtheta).
  double evaluate(const Vec3& at, Vec3* gradient) const;

  const std::string& text() const { return text_; }

  enum class Op : unsigned char {
    Const, VarX, VarY, VarTheta, Add, Sub, Mul, Div, Pow, Neg,
    Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh, Atan2, Min, Max
  };
  struct Instr {
    Op op;
    double value = 0.0;
  };

 private:
  std::string text_;
  std::vector<Instr> program_;
};

/// Field whose three components are expressions; theta is reduced before
/// evaluation.  Jacobians are exact (forward-mode dual numbers).
FieldSpec expression_field(const Expression& ex, const Expression& ey, const Expression& etheta,
                           double fd_step = FieldSpec::kDefaultFdStep);

/// Largest |f(x, y, 0) - f(x, y, 1)| over a probe grid of the disc, comparing
/// unreduced evaluations; zero for theta-periodic expressions.
double periodicity_defect(const Expression& e, double disc_radius, int probes = 9);

}  // namespace torlink
