#pragma once

#include "torlink/expression.hpp"
#include "torlink/field.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace torlink {

/// Expr is a scalar expression in x, y, theta; Field is three such
/// expressions separated by ';'.
enum class ParamType { Int, Real, Bool, Reals, Points, Text, Expr, Field };

/// One experiment parameter; an empty default marks the parameter optional.
struct ParamSpec {
  std::string_view key;
  ParamType type;
  std::string_view default_value;
};

struct OpSpec {
  std::string_view name;
  std::string_view summary;
  bool asserted_by_default;
  std::vector<ParamSpec> params;
};

/// Every experiment operation a config may reference.
const std::vector<OpSpec>& experiment_catalog();
const OpSpec* find_op(std::string_view name);

struct ExperimentSpec {
  std::string label;
  std::string op;
  bool asserted = true;
  int line = 0;
  /// Catalog order, defaults filled; optional parameters that were not given are absent.
  std::vector<std::pair<std::string, std::string>> params;

  bool has(std::string_view key) const;
  const std::string& text(std::string_view key) const;
  int integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<Vec2> points(std::string_view key) const;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  double disc_radius = 1.0;
  double tilt = 0.0;
  std::vector<std::pair<std::string, double>> params;
  std::array<std::string, 3> x_text;
  std::array<std::string, 3> y_text;
  FieldHandle X;
  FieldHandle Y;
  bool declared_col = false;
  Tolerances tol;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string report_file;
  std::string csv_prefix;
  std::vector<ExperimentSpec> experiments;

  Expression::Constants constants() const;
  FieldPair pair() const;
  nlohmann::ordered_json echo() const;
};

/// Reads and validates a config file.  Syntax errors raise ParseError(line,
/// column); semantic problems are collected and raised together as ValidationError.
ScenarioConfig parse_config(const std::filesystem::path& path);
ScenarioConfig parse_config_text(std::string_view text);

/// Parses three components separated by ';' (used for field overrides).
std::array<Expression, 3> parse_field_triple(std::string_view text, const Expression::Constants& constants);

bool parse_bool(std::string_view text, bool* out);
bool parse_real(std::string_view text, double* out);

}  // namespace torlink
