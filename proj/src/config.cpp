#include "kmflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

namespace kmflow {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::flow: return "flow";
    case Scenario::mtw_scan: return "mtw_scan";
    case Scenario::geometry_verify: return "geometry_verify";
    case Scenario::oracle_compare: return "oracle_compare";
  }
  return "flow";
}

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(ErrorCode code, std::vector<std::string> problems)
    : Error(code, join(problems)), problems_(std::move(problems)) {}

namespace {

struct Value {
  enum class Kind { number, string, boolean, array };
  Kind kind = Kind::number;
  double number = 0.0;
  std::string text;
  bool flag = false;
  std::vector<double> items;
  int line = 0;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

using Table = std::map<std::string, Value>;

Table tokenize(std::string_view text) {
  Table table;
  std::vector<std::string> errors;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        errors.push_back(where + ": malformed section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view rhs = trim(line.substr(eq + 1));
    if (key.empty() || rhs.empty()) {
      errors.push_back(where + ": expected key = value");
      continue;
    }
    Value v;
    v.line = line_no;
    if (rhs.front() == '"') {
      if (rhs.size() < 2 || rhs.back() != '"') {
        errors.push_back(where + ": unterminated string");
        continue;
      }
      v.kind = Value::Kind::string;
      v.text = std::string(rhs.substr(1, rhs.size() - 2));
    } else if (rhs == "true" || rhs == "false") {
      v.kind = Value::Kind::boolean;
      v.flag = rhs == "true";
    } else if (rhs.front() == '[') {
      if (rhs.back() != ']') {
        errors.push_back(where + ": unterminated array");
        continue;
      }
      v.kind = Value::Kind::array;
      std::string_view body = trim(rhs.substr(1, rhs.size() - 2));
      bool ok = true;
      while (!body.empty()) {
        const auto comma = body.find(',');
        const auto item = parse_number(body.substr(0, comma));
        if (!item) {
          ok = false;
          break;
        }
        v.items.push_back(*item);
        if (comma == std::string_view::npos) break;
        body = trim(body.substr(comma + 1));
      }
      if (!ok) {
        errors.push_back(where + ": arrays hold numbers only");
        continue;
      }
    } else {
      const auto num = parse_number(rhs);
      if (!num) {
        errors.push_back(where + ": cannot read value '" + std::string(rhs) + "' (strings need quotes)");
        continue;
      }
      v.number = *num;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) {
      errors.push_back(where + ": duplicate key " + full);
      continue;
    }
    table.emplace(full, std::move(v));
  }
  if (!errors.empty()) throw ConfigError(ErrorCode::parse_error, errors);
  return table;
}

// Typed access that records which keys were read and every problem found.
class Reader {
 public:
  explicit Reader(Table table) : table_(std::move(table)) {}

  std::vector<std::string>& errors() { return errors_; }

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  void number(const std::string& key, double& out) {
    if (const Value* v = take(key)) {
      if (v->kind == Value::Kind::number) out = v->number;
      else bad(key, "expected a number");
    }
  }

  void integer(const std::string& key, int& out) {
    double d = out;
    if (const Value* v = peek(key); v && v->kind == Value::Kind::number && v->number != std::floor(v->number)) {
      take(key);
      bad(key, "expected an integer");
      return;
    }
    number(key, d);
    out = static_cast<int>(d);
  }

  void count(const std::string& key, std::size_t& out) {
    int v = static_cast<int>(out);
    integer(key, v);
    if (v < 0) bad(key, "must be non-negative");
    else out = static_cast<std::size_t>(v);
  }

  void seed(const std::string& key, std::uint64_t& out) {
    double d = static_cast<double>(out);
    number(key, d);
    if (d < 0 || d != std::floor(d)) bad(key, "must be a non-negative integer");
    else out = static_cast<std::uint64_t>(d);
  }

  void boolean(const std::string& key, bool& out) {
    if (const Value* v = take(key)) {
      if (v->kind == Value::Kind::boolean) out = v->flag;
      else bad(key, "expected true or false");
    }
  }

  bool text(const std::string& key, std::string& out) {
    if (const Value* v = take(key)) {
      if (v->kind == Value::Kind::string) {
        out = v->text;
        return true;
      }
      bad(key, "expected a quoted string");
    }
    return false;
  }

  // Scalars broadcast to every axis; arrays must have one entry per axis.
  template <class T>
  void per_axis(const std::string& key, int dims, std::array<T, 2>& out) {
    const Value* v = take(key);
    if (!v) return;
    if (v->kind == Value::Kind::number) {
      for (int a = 0; a < dims; ++a) out[a] = static_cast<T>(v->number);
      if (std::is_integral_v<T> && v->number != std::floor(v->number)) bad(key, "expected integers");
      return;
    }
    if (v->kind != Value::Kind::array || static_cast<int>(v->items.size()) != dims) {
      bad(key, "expected one value per axis (" + std::to_string(dims) + ")");
      return;
    }
    for (int a = 0; a < dims; ++a) {
      if (std::is_integral_v<T> && v->items[a] != std::floor(v->items[a])) bad(key, "expected integers");
      out[a] = static_cast<T>(v->items[a]);
    }
  }

  void bad(const std::string& key, const std::string& what) { errors_.push_back(key + ": " + what); }

  void report_unknown() {
    for (const auto& [key, v] : table_) {
      if (!used_.count(key)) errors_.push_back(key + ": unknown key (line " + std::to_string(v.line) + ")");
    }
  }

 private:
  const Value* peek(const std::string& key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }
  const Value* take(const std::string& key) {
    const Value* v = peek(key);
    if (v) used_[key] = true;
    return v;
  }

  Table table_;
  std::map<std::string, bool> used_;
  std::vector<std::string> errors_;
};

template <class E>
bool pick(Reader& r, const std::string& key, std::initializer_list<std::pair<const char*, E>> options, E& out) {
  std::string name;
  if (!r.text(key, name)) return false;
  for (const auto& [label, value] : options) {
    if (name == label) {
      out = value;
      return true;
    }
  }
  std::string allowed;
  for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + std::string(o.first);
  r.bad(key, "unknown value '" + name + "' (expected one of: " + allowed + ")");
  return false;
}

void read_density(Reader& r, const std::string& section, int dims, const std::filesystem::path& base,
                  DensitySpec& d) {
  pick<DensitySpec::Family>(r, section + ".family",
                            {{"constant", DensitySpec::Family::constant},
                             {"sine_product", DensitySpec::Family::sine_product},
                             {"csv", DensitySpec::Family::csv}},
                            d.family);
  r.number(section + ".value", d.value);
  r.number(section + ".scale", d.scale);
  r.per_axis(section + ".amplitude", dims, d.amplitude);
  r.per_axis(section + ".wavenumber", dims, d.wavenumber);
  r.per_axis(section + ".phase", dims, d.phase);
  std::string file;
  if (r.text(section + ".file", file)) d.file = base / file;
  if (d.family == DensitySpec::Family::csv) {
    if (d.file.empty()) r.bad(section + ".file", "required for the csv family");
    else if (!std::filesystem::exists(d.file)) r.bad(section + ".file", "file not found: " + d.file.string());
  }
}

}  // namespace

RunConfig parse_config_string(std::string_view text, const std::filesystem::path& base_dir) {
  Reader r(tokenize(text));
  RunConfig c;
  auto& errors = r.errors();

  pick<Scenario>(r, "scenario",
                 {{"flow", Scenario::flow},
                  {"mtw_scan", Scenario::mtw_scan},
                  {"geometry_verify", Scenario::geometry_verify},
                  {"oracle_compare", Scenario::oracle_compare}},
                 c.scenario);
  r.seed("seed", c.seed);

  r.integer("grid.dims", c.dims);
  const bool dims_ok = c.dims == 1 || c.dims == 2;
  if (!dims_ok) {
    r.bad("grid.dims", "must be 1 or 2");
    c.dims = 1;
  }
  r.per_axis("grid.resolution", c.dims, c.resolution);
  r.per_axis("grid.period", c.dims, c.period);
  if (c.dims == 1) {
    c.resolution[1] = 1;
    c.period[1] = 1.0;
  }
  for (int a = 0; a < c.dims; ++a) {
    if (c.resolution[a] < 8) r.bad("grid.resolution", "needs at least 8 points per axis");
    if (!(c.period[a] > 0.0)) r.bad("grid.period", "must be positive");
  }

  std::string kind;
  if (r.text("cost.kind", kind)) {
    if (const auto k = parse_cost_kind(kind)) c.cost_kind = *k;
    else r.bad("cost.kind", "unknown cost kind '" + kind + "'");
  }
  r.number("cost.epsilon", c.cost_params.epsilon);
  r.per_axis("cost.frequency", c.dims, c.cost_params.frequency);
  r.number("cost.guard_margin", c.guard.margin);

  read_density(r, "density.rho", c.dims, base_dir, c.rho);
  read_density(r, "density.rho_bar", c.dims, base_dir, c.rho_bar);

  FlowConfig& f = c.flow;
  pick<Formulation>(r, "flow.formulation", {{"potential", Formulation::potential}, {"map", Formulation::map}},
                    f.formulation);
  pick<DtPolicy>(r, "flow.dt_policy", {{"cfl", DtPolicy::cfl}, {"fixed", DtPolicy::fixed}}, f.dt_policy);
  pick<Integrator>(r, "flow.integrator", {{"euler", Integrator::euler}, {"midpoint", Integrator::midpoint}},
                   f.integrator);
  r.number("flow.safety", f.safety);
  r.number("flow.dt", f.dt);
  r.number("flow.t_max", f.t_max);
  r.number("flow.stop_grad_theta", f.stop_grad_theta);
  r.integer("flow.monitor_stride", f.monitor_stride);
  r.integer("flow.max_halvings", f.max_halvings);
  r.number("flow.max_principle_slack", f.max_principle_slack);
  r.number("flow.decay_tail_fraction", f.decay_tail_fraction);
  try {
    validate(f);
  } catch (const Error& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    std::string body = colon == std::string::npos ? msg : msg.substr(colon + 2);
    for (std::size_t pos; (pos = body.find("; ")) != std::string::npos; body = body.substr(pos + 2)) {
      errors.push_back(body.substr(0, pos));
    }
    errors.push_back(body);
  }

  InitialSpec& init = c.initial;
  pick<InitialSpec::Kind>(r, "initial.kind",
                          {{"identity", InitialSpec::Kind::identity},
                           {"sine_potential", InitialSpec::Kind::sine_potential},
                           {"curl_perturbation", InitialSpec::Kind::curl_perturbation}},
                          init.kind);
  r.number("initial.amplitude", init.amplitude);
  r.integer("initial.wavenumber", init.wavenumber);
  r.number("initial.delta", init.delta);
  if (init.kind == InitialSpec::Kind::curl_perturbation) {
    if (c.dims != 2) r.bad("initial.kind", "curl_perturbation needs a 2-D grid");
    if (f.formulation != Formulation::map) r.bad("initial.kind", "curl_perturbation needs flow.formulation = \"map\"");
  }

  pick<OracleSpec::Method>(r, "oracle.method",
                           {{"none", OracleSpec::Method::none},
                            {"rearrangement", OracleSpec::Method::rearrangement},
                            {"sinkhorn", OracleSpec::Method::sinkhorn}},
                           c.oracle.method);
  r.number("oracle.epsilon", c.oracle.epsilon);
  r.count("oracle.max_iters", c.oracle.max_iters);
  r.number("oracle.tol", c.oracle.tol);
  r.number("oracle.tolerance", c.oracle.tolerance);
  if (c.oracle.method == OracleSpec::Method::rearrangement && c.dims != 1) {
    r.bad("oracle.method", "rearrangement needs a 1-D grid");
  }
  if (c.oracle.method == OracleSpec::Method::sinkhorn) {
    if (!(c.oracle.epsilon > 0.0)) r.bad("oracle.epsilon", "must be positive");
    for (int a = 0; a < c.dims; ++a) {
      if (c.resolution[a] > 64) r.bad("oracle.method", "sinkhorn supports at most 64 points per axis");
    }
  }
  if (c.scenario == Scenario::oracle_compare && c.oracle.method == OracleSpec::Method::none) {
    r.bad("oracle.method", "oracle_compare needs an oracle method");
  }

  r.integer("mtw.directions", c.mtw.directions);
  r.integer("mtw.stride", c.mtw.stride);
  if (c.mtw.directions < 8) r.bad("mtw.directions", "must be at least 8");
  if (c.mtw.stride < 0) r.bad("mtw.stride", "must be non-negative");
  r.integer("verify.samples", c.verify.samples);
  r.number("verify.fd_step", c.verify.fd_step);
  if (c.verify.samples < 1) r.bad("verify.samples", "must be at least 1");
  if (!(c.verify.fd_step > 0.0)) r.bad("verify.fd_step", "must be positive");

  std::string dir;
  if (r.text("output.dir", dir)) c.output.dir = base_dir / dir;
  else c.output.dir = base_dir / c.output.dir;
  r.integer("output.threads", c.output.threads);
  if (c.output.threads < 0) r.bad("output.threads", "must be non-negative");

  r.report_unknown();

  // Objects that validate themselves: cost parameters and densities.
  if (errors.empty()) {
    try {
      make_cost(c);
    } catch (const Error& e) {
      errors.push_back(std::string("cost: ") + e.what());
    }
    const Grid grid = make_grid(c);
    for (const auto& [name, spec] : {std::pair{"density.rho", &c.rho}, std::pair{"density.rho_bar", &c.rho_bar}}) {
      try {
        const ScalarField d = make_density(*spec, grid);
        for (std::size_t k = 0; k < d.size(); ++k) {
          if (!(d[k] > 0.0) || !std::isfinite(d[k])) {
            errors.push_back(std::string(name) + ": density not positive (node " + std::to_string(k) + ")");
            break;
          }
        }
      } catch (const Error& e) {
        errors.push_back(std::string(name) + ": " + e.what());
      }
    }
  }
  if (!errors.empty()) throw ConfigError(ErrorCode::validation_error, errors);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ErrorCode::io_error, {"cannot open config " + path.string()});
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_string(buffer.str(), path.parent_path());
}

Grid make_grid(const RunConfig& c) {
  return make_grid(c.dims, std::span<const int>(c.resolution.data(), c.dims),
                   std::span<const double>(c.period.data(), c.dims));
}

CostModel make_cost(const RunConfig& c) {
  return CostModel(c.cost_kind, c.dims, c.cost_params, c.guard, c.period);
}

ScalarField make_density(const DensitySpec& spec, const Grid& grid) {
  ScalarField out(grid);
  switch (spec.family) {
    case DensitySpec::Family::constant:
      for (double& v : out.values()) v = spec.value;
      break;
    case DensitySpec::Family::sine_product:
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double v = spec.scale;
        for (int a = 0; a < grid.dims(); ++a) {
          const double arg = 2.0 * std::numbers::pi * spec.wavenumber[a] * grid.coordinate(k, a) / grid.period(a);
          v *= 1.0 + spec.amplitude[a] * std::sin(arg + spec.phase[a]);
        }
        out[k] = v;
      }
      break;
    case DensitySpec::Family::csv: {
      // One row per index along axis 1, comma-separated values along axis 0.
      std::ifstream in(spec.file);
      require(static_cast<bool>(in), ErrorCode::io_error, "cannot open density file " + spec.file.string());
      std::vector<double> values;
      std::string line;
      int rows = 0;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++rows;
        std::string_view rest = line;
        int cols = 0;
        while (true) {
          const auto comma = rest.find(',');
          const auto v = parse_number(rest.substr(0, comma));
          require(v.has_value(), ErrorCode::parse_error,
                  spec.file.string() + " row " + std::to_string(rows) + ": not a number");
          values.push_back(*v);
          ++cols;
          if (comma == std::string_view::npos) break;
          rest = rest.substr(comma + 1);
        }
        require(cols == grid.resolution(0), ErrorCode::grid_mismatch,
                spec.file.string() + " row " + std::to_string(rows) + " has " + std::to_string(cols) +
                    " values, grid has " + std::to_string(grid.resolution(0)));
      }
      require(rows == grid.resolution(1), ErrorCode::grid_mismatch,
              spec.file.string() + " has " + std::to_string(rows) + " rows, grid has " +
                  std::to_string(grid.resolution(1)));
      out = ScalarField(grid, std::move(values));
      break;
    }
  }
  return out;
}

}  // namespace kmflow
