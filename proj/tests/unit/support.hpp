#pragma once

#include "torlink/config.hpp"
#include "torlink/error.hpp"
#include "torlink/expression.hpp"
#include "torlink/field.hpp"
#include "torlink/runner.hpp"

#include <doctest.h>

#include <array>
#include <memory>
#include <random>
#include <string>

namespace tl = torlink;

// Evaluates `expr` and checks that it throws a torlink::Error with the given code.
#define CHECK_THROWS_CODE(expr, ec)                                 \
  do {                                                              \
    bool thrown_ = false;                                           \
    try {                                                           \
      (void)(expr);                                                 \
    } catch (const tl::Error& e_) {                                 \
      thrown_ = true;                                               \
      CHECK_MESSAGE(e_.code() == (ec), "got " << e_.what());        \
    }                                                               \
    CHECK_MESSAGE(thrown_, "expected " << tl::to_string(ec));       \
  } while (0)

namespace testing {

inline tl::FieldHandle field(const std::string& fx, const std::string& fy, const std::string& ftheta,
                             const tl::Expression::Constants& k = {}) {
  return std::make_shared<const tl::FieldSpec>(tl::expression_field(
      tl::Expression::parse(fx, k), tl::Expression::parse(fy, k), tl::Expression::parse(ftheta, k)));
}

inline tl::FieldPair make_pair(tl::FieldHandle x, tl::FieldHandle y, double tilt = 0.0, bool col = false) {
  tl::FieldPair p;
  p.X = std::move(x);
  p.Y = std::move(y);
  p.domain.fibration = tl::Fibration::tilted(tilt);
  if (col) p.declared_col = tl::ColAnnulus{};
  return p;
}

inline tl::FieldPair builtin_pair(const std::string& name) {
  return tl::parse_config_text(tl::find_builtin(name)->text).pair();
}

// Rotation pair: Y = (-a y, a x, 1), X = radial + rho^2 Y.
inline tl::FieldPair rotation_pair(double a, double tilt) {
  const tl::Expression::Constants k{{"a", a}};
  return make_pair(field("x - a*(x^2 + y^2)*y", "y + a*(x^2 + y^2)*x", "x^2 + y^2", k), field("-a*y", "a*x", "1", k),
                   tilt);
}

inline double uniform(std::mt19937_64& g, double a, double b) {
  return a + (b - a) * static_cast<double>(g() >> 11) * 0x1.0p-53;
}

}  // namespace testing
