#include "torlink/config.hpp"

#include "torlink/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace torlink {

namespace {

using json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t k = s.find(sep, start);
    out.push_back(trim(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start)));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_label(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

bool parse_int(std::string_view text, long long* out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), *out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

bool parse_u64(std::string_view text, std::uint64_t* out) {
  text = trim(text);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), *out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

bool parse_reals(std::string_view text, std::vector<double>* out) {
  out->clear();
  for (std::string_view item : split(text, ',')) {
    double v = 0.0;
    if (!parse_real(item, &v)) return false;
    out->push_back(v);
  }
  return true;
}

bool parse_points(std::string_view text, std::vector<Vec2>* out) {
  out->clear();
  for (std::string_view item : split(text, ';')) {
    std::istringstream in{std::string(item)};
    std::string a, b, extra;
    if (!(in >> a >> b) || (in >> extra)) return false;
    double x = 0.0, y = 0.0;
    if (!parse_real(a, &x) || !parse_real(b, &y)) return false;
    out->emplace_back(x, y);
  }
  return true;
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  int value_column = 0;
};

struct Section {
  std::string name;
  std::string label;
  int line = 0;
  std::vector<Entry> entries;
};

std::string where(int line) { return "line " + std::to_string(line) + ": "; }

json typed_value(ParamType type, const std::string& text) {
  switch (type) {
    case ParamType::Int: {
      long long v = 0;
      parse_int(text, &v);
      return v;
    }
    case ParamType::Real: {
      double v = 0.0;
      parse_real(text, &v);
      return v;
    }
    case ParamType::Bool: {
      bool v = false;
      parse_bool(text, &v);
      return v;
    }
    case ParamType::Reals: {
      std::vector<double> v;
      parse_reals(text, &v);
      return v;
    }
    case ParamType::Points: {
      std::vector<Vec2> v;
      parse_points(text, &v);
      json arr = json::array();
      for (const Vec2& p : v) arr.push_back({p.x(), p.y()});
      return arr;
    }
    case ParamType::Text:
    case ParamType::Expr:
    case ParamType::Field:
      return text;
  }
  return nullptr;
}

const ParamSpec* find_param(const OpSpec& op, std::string_view key) {
  for (const ParamSpec& p : op.params) {
    if (p.key == key) return &p;
  }
  return nullptr;
}

}  // namespace

bool parse_bool(std::string_view text, bool* out) {
  text = trim(text);
  if (text == "true" || text == "yes" || text == "on" || text == "1") {
    *out = true;
    return true;
  }
  if (text == "false" || text == "no" || text == "off" || text == "0") {
    *out = false;
    return true;
  }
  return false;
}

bool parse_real(std::string_view text, double* out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), *out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(*out);
}

const std::vector<OpSpec>& experiment_catalog() {
  using T = ParamType;
  static const std::vector<OpSpec> catalog = {
      {"commutator", "max |[X, Y]| over a grid", true, {{"grid", T::Int, "20"}, {"threshold", T::Real, "1e-6"}}},
      {"tangent_flow",
       "DY_t(x) X(x) against X(Y_t(x)) at random (x, t)",
       true,
       {{"samples", T::Int, "50"},
        {"t_max", T::Real, "1.0"},
        {"radius", T::Real, "0.8"},
        {"threshold", T::Real, "1e-6"}}},
      {"holonomy_invariance",
       "dP_t N(x) against N(P_t(x)), relative residual",
       true,
       {{"samples", T::Int, "50"},
        {"times", T::Reals, "0.25, 0.5, 1.0"},
        {"radius", T::Real, "0.8"},
        {"threshold", T::Real, "1e-6"}}},
      {"holonomy_derivative",
       "dP and dtau against central differences",
       true,
       {{"samples", T::Int, "20"},
        {"step", T::Real, "1e-5"},
        {"radius", T::Real, "0.6"},
        {"threshold", T::Real, "1e-5"}}},
      {"return_identity",
       "-dtau N(x) against mu(P(x)) - mu(x)",
       true,
       {{"samples", T::Int, "100"},
        {"min_side", T::Real, "0"},
        {"relative", T::Bool, "false"},
        {"threshold", T::Real, "1e-10"},
        {"expect", T::Text, "hold"},
        {"radius", T::Real, "0.8"},
        {"max_attempts", T::Int, "4000"},
        {"tilt", T::Real, ""},
        {"x_field", T::Field, ""},
        {"y_field", T::Field, ""}}},
      {"collinearity",
       "numerical Col and the prepared condition",
       true,
       {{"grid", T::Int, "16"},
        {"refine_tol", T::Real, "1e-8"},
        {"nu_bound", T::Real, "1e-6"},
        {"probe", T::Int, "8"}}},
      {"linking_numbers",
       "windings of N along loops on both sides of Col",
       true,
       {{"offsets", T::Reals, "0.2, 0.4"},
        {"x0", T::Real, "0"},
        {"samples", T::Int, "128"},
        {"expect_plus", T::Int, ""},
        {"expect_minus", T::Int, ""}}},
      {"index_region",
       "essential-torus index of X - sY",
       true,
       {{"radius", T::Real, "0.5"}, {"grid", T::Int, "96"}, {"homotopy", T::Reals, "0"}, {"expect", T::Int, ""}}},
      {"verify_link_index",
       "|index| against |ell_plus - ell_minus|",
       true,
       {{"radius", T::Real, "0.5"}, {"grid", T::Int, "96"}, {"y_offset", T::Real, "0.25"}, {"x0", T::Real, "0"}}},
      {"fixed_point_spectrum",
       "eigenvalues and class of dP at fixed points",
       true,
       {{"points", T::Points, "0 0"},
        {"expect", T::Text, ""},
        {"multiplier", T::Expr, ""},
        {"threshold", T::Real, "1e-5"},
        {"fixed_tol", T::Real, "1e-8"}}},
      {"iterate_return",
       "orbits of P from random seeds and their limits",
       true,
       {{"seeds", T::Int, "20"},
        {"n_max", T::Int, "500"},
        {"tol", T::Real, "1e-10"},
        {"radius", T::Real, "0.6"},
        {"nu_bound", T::Real, "1e-6"},
        {"fixed_bound", T::Real, "1e-8"},
        {"on_col", T::Bool, "true"},
        {"csv", T::Bool, "true"}}},
      {"cone_ratio",
       "|mu(P(x)) - mu(x)| / |P(x) - x| along a ray",
       false,
       {{"start", T::Points, "0.3 0.2"}, {"count", T::Int, "8"}, {"factor", T::Real, "0.5"}, {"bound", T::Real, ""}}},
      {"segment_sweep",
       "angular variation of N along [x, P^2(x)]",
       true,
       {{"points", T::Points, "0.3 0"},
        {"samples", T::Int, "256"},
        {"expect", T::Real, ""},
        {"bound", T::Real, ""},
        {"threshold", T::Real, "1e-6"}}},
      {"model_map_table",
       "torus degrees and meridian windings of the model maps",
       true,
       {{"range", T::Int, "2"}, {"grid", T::Int, "64"}, {"csv", T::Bool, "true"}}},
      {"degree_engine", "identity and antipodal sphere degrees", true, {{"level", T::Int, "3"}, {"residual", T::Real, "0.01"}}},
      {"hyperbolic_indices",
       "indices of hyperbolic linear zeros",
       true,
       {{"level", T::Int, "3"}, {"radius", T::Real, "0.1"}, {"residual", T::Real, "0.01"}}},
      {"no_antipode",
       "dP_t v is never opposite to v near Col",
       true,
       {{"samples", T::Int, "50"},
        {"radius", T::Real, "0.6"},
        {"band", T::Real, "0.1"},
        {"angle_tol", T::Real, "1e-3"}}},
  };
  return catalog;
}

const OpSpec* find_op(std::string_view name) {
  for (const OpSpec& op : experiment_catalog()) {
    if (op.name == name) return &op;
  }
  return nullptr;
}

bool ExperimentSpec::has(std::string_view key) const {
  return std::any_of(params.begin(), params.end(), [&](const auto& kv) { return kv.first == key; });
}

const std::string& ExperimentSpec::text(std::string_view key) const {
  for (const auto& kv : params) {
    if (kv.first == key) return kv.second;
  }
  throw Error(ErrorCode::ValidationError, "experiment '" + label + "' has no parameter '" + std::string(key) + "'");
}

int ExperimentSpec::integer(std::string_view key) const {
  long long v = 0;
  if (!parse_int(text(key), &v)) throw Error(ErrorCode::ValidationError, "not an integer: " + std::string(key));
  return static_cast<int>(v);
}

double ExperimentSpec::real(std::string_view key) const {
  double v = 0.0;
  if (!parse_real(text(key), &v)) throw Error(ErrorCode::ValidationError, "not a number: " + std::string(key));
  return v;
}

bool ExperimentSpec::boolean(std::string_view key) const {
  bool v = false;
  if (!parse_bool(text(key), &v)) throw Error(ErrorCode::ValidationError, "not a boolean: " + std::string(key));
  return v;
}

std::vector<double> ExperimentSpec::reals(std::string_view key) const {
  std::vector<double> v;
  if (!parse_reals(text(key), &v)) throw Error(ErrorCode::ValidationError, "not a number list: " + std::string(key));
  return v;
}

std::vector<Vec2> ExperimentSpec::points(std::string_view key) const {
  std::vector<Vec2> v;
  if (!parse_points(text(key), &v)) throw Error(ErrorCode::ValidationError, "not a point list: " + std::string(key));
  return v;
}

Expression::Constants ScenarioConfig::constants() const {
  Expression::Constants c;
  for (const auto& [k, v] : params) c.emplace(k, v);
  return c;
}

FieldPair ScenarioConfig::pair() const {
  FieldPair p;
  p.X = X;
  p.Y = Y;
  p.domain.disc_radius = disc_radius;
  p.domain.fibration = Fibration::tilted(tilt);
  if (declared_col) p.declared_col = ColAnnulus{};
  p.tol = tol;
  return p;
}

json ScenarioConfig::echo() const {
  json j;
  j["name"] = name;
  j["description"] = description;
  j["domain"] = {{"radius", disc_radius}, {"tilt", tilt}};
  json pj = json::object();
  for (const auto& [k, v] : params) pj[k] = v;
  j["params"] = pj;
  j["fields"] = {{"X", x_text}, {"Y", y_text}};
  j["col"] = {{"annulus", declared_col ? "y0" : "none"}};
  j["tolerances"] = {{"flow", tol.flow},
                     {"crossing", tol.crossing},
                     {"fd_step", tol.fd_step},
                     {"collinearity", tol.collinearity},
                     {"frame_det", tol.frame_det},
                     {"zero_denominator", tol.zero_denominator}};
  j["run"] = {{"seed", seed}, {"jobs", jobs}};
  j["output"] = {{"report", report_file}, {"csv_prefix", csv_prefix}};
  json ex = json::array();
  for (const ExperimentSpec& e : experiments) {
    json ej;
    ej["label"] = e.label;
    ej["op"] = e.op;
    ej["assert"] = e.asserted;
    json params_json = json::object();
    const OpSpec* op = find_op(e.op);
    for (const auto& [k, v] : e.params) {
      const ParamSpec* ps = op ? find_param(*op, k) : nullptr;
      params_json[k] = ps ? typed_value(ps->type, v) : json(v);
    }
    ej["params"] = params_json;
    ex.push_back(ej);
  }
  j["experiments"] = ex;
  return j;
}

std::array<Expression, 3> parse_field_triple(std::string_view text, const Expression::Constants& constants) {
  const std::vector<std::string_view> parts = split(text, ';');
  if (parts.size() != 3) {
    throw Error(ErrorCode::ValidationError, "field needs three components separated by ';'");
  }
  return {Expression::parse(parts[0], constants), Expression::parse(parts[1], constants),
          Expression::parse(parts[2], constants)};
}

ScenarioConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

ScenarioConfig parse_config_text(std::string_view text) {
  // Pass 1: syntax.
  std::vector<Section> sections(1);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (const std::size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const int indent = static_cast<int>(raw.find_first_not_of(" \t"));
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, indent + 1, "unterminated section header");
      std::istringstream in{std::string(line.substr(1, line.size() - 2))};
      Section s;
      s.line = line_no;
      std::string extra;
      if (!(in >> s.name)) throw ParseError(line_no, indent + 2, "empty section header");
      in >> s.label;
      if (in >> extra) throw ParseError(line_no, indent + 1, "section header has too many words");
      sections.push_back(std::move(s));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, indent + 1, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(line_no, indent + 1, "missing key before '='");
    for (std::size_t i = 0; i < key.size(); ++i) {
      const char c = key[i];
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) {
        throw ParseError(line_no, indent + static_cast<int>(i) + 1, "invalid character in key");
      }
    }
    const std::string_view value = trim(line.substr(eq + 1));
    const int value_col = static_cast<int>(value.empty() ? raw.size() : value.data() - raw.data());
    sections.back().entries.push_back({std::string(key), std::string(value), line_no, value_col});
  }

  // Pass 2: semantics; every problem is collected.
  std::vector<std::string> violations;
  ScenarioConfig cfg;
  std::map<std::string, const Entry*> fields;
  std::optional<int> name_line;
  const std::vector<std::string> field_keys = {"X.x", "X.y", "X.theta", "Y.x", "Y.y", "Y.theta"};

  auto number = [&](const Entry& e, double* out) {
    if (!parse_real(e.value, out)) violations.push_back(where(e.line) + "'" + e.key + "' is not a finite number");
  };

  std::map<std::string, int> seen_sections;
  std::map<std::string, int> seen_labels;
  std::vector<const Section*> experiment_sections;
  for (const Section& s : sections) {
    std::map<std::string, int> seen_keys;
    for (const Entry& e : s.entries) {
      if (!seen_keys.emplace(e.key, e.line).second) {
        violations.push_back(where(e.line) + "duplicate key '" + e.key + "'");
      }
    }
    if (s.name == "experiment") {
      if (!is_label(s.label)) {
        violations.push_back(where(s.line) + "experiment section needs a label of letters, digits, '_' or '-'");
      } else if (!seen_labels.emplace(s.label, s.line).second) {
        violations.push_back(where(s.line) + "duplicate experiment label '" + s.label + "'");
      }
      experiment_sections.push_back(&s);
      continue;
    }
    if (!s.name.empty()) {
      if (!s.label.empty()) violations.push_back(where(s.line) + "section [" + s.name + "] takes no label");
      if (!seen_sections.emplace(s.name, s.line).second) {
        violations.push_back(where(s.line) + "duplicate section [" + s.name + "]");
      }
    }
    for (const Entry& e : s.entries) {
      const std::string& k = e.key;
      if (s.name.empty()) {
        if (k == "name") {
          cfg.name = e.value;
          name_line = e.line;
          if (!is_label(e.value)) violations.push_back(where(e.line) + "name must use letters, digits, '_' or '-'");
        } else if (k == "description") {
          cfg.description = e.value;
        } else {
          violations.push_back(where(e.line) + "unknown top-level key '" + k + "'");
        }
      } else if (s.name == "domain") {
        if (k == "radius") {
          number(e, &cfg.disc_radius);
          if (!(cfg.disc_radius > 0.0)) violations.push_back(where(e.line) + "radius must be positive");
        } else if (k == "tilt") {
          number(e, &cfg.tilt);
        } else {
          violations.push_back(where(e.line) + "unknown key '" + k + "' in [domain]");
        }
      } else if (s.name == "params") {
        if (!is_identifier(k) || k == "x" || k == "y" || k == "theta" || k == "pi" || k == "e") {
          violations.push_back(where(e.line) + "invalid parameter name '" + k + "'");
          continue;
        }
        const Expression ex = Expression::parse(e.value, cfg.constants(), e.line, e.value_column);
        const double v = ex(0.0, 0.0, 0.0);
        if (!std::isfinite(v)) violations.push_back(where(e.line) + "parameter '" + k + "' is not finite");
        cfg.params.emplace_back(k, v);
      } else if (s.name == "fields") {
        if (std::find(field_keys.begin(), field_keys.end(), k) == field_keys.end()) {
          violations.push_back(where(e.line) + "unknown field component '" + k + "'");
        } else {
          fields[k] = &e;
        }
      } else if (s.name == "col") {
        if (k == "annulus") {
          if (e.value == "y0") {
            cfg.declared_col = true;
          } else if (e.value != "none") {
            violations.push_back(where(e.line) + "annulus must be 'y0' or 'none'");
          }
        } else {
          violations.push_back(where(e.line) + "unknown key '" + k + "' in [col]");
        }
      } else if (s.name == "tolerances") {
        double* slot = k == "flow"               ? &cfg.tol.flow
                       : k == "crossing"         ? &cfg.tol.crossing
                       : k == "fd_step"          ? &cfg.tol.fd_step
                       : k == "collinearity"     ? &cfg.tol.collinearity
                       : k == "frame_det"        ? &cfg.tol.frame_det
                       : k == "zero_denominator" ? &cfg.tol.zero_denominator
                                                 : nullptr;
        if (!slot) {
          violations.push_back(where(e.line) + "unknown tolerance '" + k + "'");
        } else {
          number(e, slot);
          if (!(*slot > 0.0)) violations.push_back(where(e.line) + "tolerance '" + k + "' must be positive");
        }
      } else if (s.name == "run") {
        if (k == "seed") {
          if (!parse_u64(e.value, &cfg.seed)) violations.push_back(where(e.line) + "seed must be a non-negative integer");
        } else if (k == "jobs") {
          long long j = 0;
          if (!parse_int(e.value, &j) || j < 1 || j > 1024) {
            violations.push_back(where(e.line) + "jobs must be an integer in [1, 1024]");
          }
          cfg.jobs = static_cast<int>(j);
        } else {
          violations.push_back(where(e.line) + "unknown key '" + k + "' in [run]");
        }
      } else if (s.name == "output") {
        if (k == "report") {
          cfg.report_file = e.value;
        } else if (k == "csv_prefix") {
          cfg.csv_prefix = e.value;
        } else {
          violations.push_back(where(e.line) + "unknown key '" + k + "' in [output]");
        }
      } else {
        violations.push_back(where(s.line) + "unknown section [" + s.name + "]");
        break;
      }
    }
  }

  if (!name_line) violations.push_back("missing top-level 'name'");
  if (cfg.report_file.empty()) cfg.report_file = cfg.name + ".json";
  if (cfg.csv_prefix.empty()) cfg.csv_prefix = cfg.name;

  // Fields.
  const Expression::Constants constants = cfg.constants();
  std::array<std::optional<Expression>, 6> compiled;
  for (std::size_t i = 0; i < field_keys.size(); ++i) {
    const auto it = fields.find(field_keys[i]);
    if (it == fields.end()) {
      violations.push_back("missing field component '" + field_keys[i] + "' in [fields]");
      continue;
    }
    const Entry& e = *it->second;
    compiled[i] = Expression::parse(e.value, constants, e.line, e.value_column);
    (i < 3 ? cfg.x_text[i] : cfg.y_text[i - 3]) = e.value;
    const double defect = periodicity_defect(*compiled[i], cfg.disc_radius);
    if (!(defect <= 1e-9)) {
      violations.push_back(where(e.line) + "'" + e.key + "' is not 1-periodic in theta");
    }
  }
  if (std::all_of(compiled.begin(), compiled.end(), [](const auto& c) { return c.has_value(); })) {
    cfg.X = std::make_shared<const FieldSpec>(expression_field(*compiled[0], *compiled[1], *compiled[2], cfg.tol.fd_step));
    cfg.Y = std::make_shared<const FieldSpec>(expression_field(*compiled[3], *compiled[4], *compiled[5], cfg.tol.fd_step));
    const int n = 9;
    bool finite = true, y_vanishes = false, col_bad = false;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double x = cfg.disc_radius * (-1.0 + 2.0 * i / (n - 1));
        const double y = cfg.disc_radius * (-1.0 + 2.0 * j / (n - 1));
        if (x * x + y * y > cfg.disc_radius * cfg.disc_radius) continue;
        for (int k = 0; k < 4; ++k) {
          const ChartPoint p(x, y, 0.25 * k);
          try {
            const Vec3 xv = cfg.X->value(p);
            const Vec3 yv = cfg.Y->value(p);
            if (!(yv.norm() > cfg.tol.zero_denominator)) y_vanishes = true;
            if (cfg.declared_col) {
              const ChartPoint c(x, 0.0, 0.25 * k);
              if (!(cfg.X->value(c).cross(cfg.Y->value(c)).norm() <= cfg.tol.collinearity)) col_bad = true;
            }
            (void)xv;
          } catch (const Error&) {
            finite = false;
          }
        }
      }
    }
    if (!finite) violations.push_back("field expressions are not finite on the probe grid");
    if (y_vanishes) violations.push_back("Y vanishes on the probe grid");
    if (col_bad) violations.push_back("declared Col {y = 0} is not collinear on the probe grid");
  }

  // Experiments.
  for (const Section* s : experiment_sections) {
    ExperimentSpec ex;
    ex.label = s->label;
    ex.line = s->line;
    std::optional<std::string> op_name;
    std::optional<bool> asserted;
    for (const Entry& e : s->entries) {
      if (e.key == "op") {
        op_name = e.value;
      } else if (e.key == "assert") {
        bool b = false;
        if (!parse_bool(e.value, &b)) violations.push_back(where(e.line) + "assert must be true or false");
        asserted = b;
      }
    }
    ex.op = op_name.value_or(ex.label);
    const OpSpec* op = find_op(ex.op);
    if (!op) {
      violations.push_back(where(s->line) + "unknown experiment '" + ex.op + "'");
      continue;
    }
    ex.asserted = asserted.value_or(op->asserted_by_default);
    for (const Entry& e : s->entries) {
      if (e.key == "op" || e.key == "assert") continue;
      const ParamSpec* ps = find_param(*op, e.key);
      if (!ps) {
        violations.push_back(where(e.line) + "unknown parameter '" + e.key + "' for experiment '" + ex.op + "'");
        continue;
      }
      bool ok = true;
      switch (ps->type) {
        case ParamType::Int: {
          long long v = 0;
          ok = parse_int(e.value, &v);
          break;
        }
        case ParamType::Real: {
          double v = 0.0;
          ok = parse_real(e.value, &v);
          break;
        }
        case ParamType::Bool: {
          bool v = false;
          ok = parse_bool(e.value, &v);
          break;
        }
        case ParamType::Reals: {
          std::vector<double> v;
          ok = parse_reals(e.value, &v);
          break;
        }
        case ParamType::Points: {
          std::vector<Vec2> v;
          ok = parse_points(e.value, &v);
          break;
        }
        case ParamType::Text:
          break;
        case ParamType::Expr:
          Expression::parse(e.value, constants, e.line, e.value_column);
          break;
        case ParamType::Field:
          try {
            parse_field_triple(e.value, constants);
          } catch (const ParseError&) {
            throw;
          } catch (const Error& err) {
            violations.push_back(where(e.line) + err.what());
          }
          break;
      }
      if (!ok) violations.push_back(where(e.line) + "invalid value for '" + e.key + "'");
    }
    for (const ParamSpec& ps : op->params) {
      const auto it = std::find_if(s->entries.begin(), s->entries.end(), [&](const Entry& e) { return e.key == ps.key; });
      if (it != s->entries.end()) {
        ex.params.emplace_back(std::string(ps.key), it->value);
      } else if (!ps.default_value.empty()) {
        ex.params.emplace_back(std::string(ps.key), std::string(ps.default_value));
      }
    }
    cfg.experiments.push_back(std::move(ex));
  }

  if (!violations.empty()) throw ValidationError(std::move(violations));
  return cfg;
}

}  // namespace torlink
