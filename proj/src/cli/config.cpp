#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fsn/cli.hpp"
#include "fsn/error.hpp"

namespace fsn::cli {
namespace {

// A parsed right-hand side before it is bound to a field.
struct Raw {
  enum class Kind { scalar, string, array } kind = Kind::scalar;
  std::string text;               // scalar token or unescaped string
  std::vector<std::string> items;  // array tokens
  int line = 0;
};

[[noreturn]] void fail(const Raw& raw, const std::string& what) {
  throw ValidationError("config line " + std::to_string(raw.line) + ": " + what);
}

double to_double(const Raw& raw, const std::string& token) {
  std::string_view t = token;
  bool negative = false;
  if (!t.empty() && (t.front() == '+' || t.front() == '-')) {
    negative = t.front() == '-';
    t.remove_prefix(1);
  }
  if (t == "inf") return negative ? -std::numeric_limits<double>::infinity()
                                  : std::numeric_limits<double>::infinity();
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    fail(raw, "expected a number, got '" + token + "'");
  }
  return negative ? -v : v;
}

template <typename Int>
Int to_integer(const Raw& raw) {
  if (raw.kind != Raw::Kind::scalar) fail(raw, "expected an integer");
  Int v{};
  const auto& t = raw.text;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    fail(raw, "expected an integer, got '" + t + "'");
  }
  return v;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::string s = fmt::format("{}", v);
  // Keep floats recognisable as floats in the canonical text.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <typename E>
using EnumNames = std::vector<std::pair<std::string_view, E>>;

template <typename E>
E to_enum(const Raw& raw, const EnumNames<E>& names) {
  if (raw.kind != Raw::Kind::string) fail(raw, "expected a quoted string");
  for (const auto& [name, value] : names) {
    if (raw.text == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  fail(raw, "unknown value '" + raw.text + "' (expected one of " + allowed + ")");
}

template <typename E>
std::string enum_name(E value, const EnumNames<E>& names) {
  for (const auto& [name, v] : names) {
    if (v == value) return quote(std::string(name));
  }
  return "\"\"";
}

const EnumNames<ingest::ContextRoles> kRoles{
    {"resources_as_objects", ingest::ContextRoles::resources_as_objects},
    {"tags_as_objects", ingest::ContextRoles::tags_as_objects}};
const EnumNames<lattice::AssignStrategy> kAssign{{"bfs", lattice::AssignStrategy::bfs},
                                                 {"random", lattice::AssignStrategy::random}};
const EnumNames<lattice::Signature> kSignature{{"euclidean", lattice::Signature::euclidean},
                                               {"minkowski", lattice::Signature::minkowski}};
const EnumNames<lattice::GenerationMetric> kMetric{
    {"sqrt_difference", lattice::GenerationMetric::sqrt_difference},
    {"difference", lattice::GenerationMetric::difference}};
const EnumNames<solver::StressLaw> kLaw{{"elastic", solver::StressLaw::elastic},
                                        {"total_deformation", solver::StressLaw::total_deformation}};
const EnumNames<constitutive::CreepOrientation> kOrientation{
    {"as_printed", constitutive::CreepOrientation::as_printed},
    {"inverted", constitutive::CreepOrientation::inverted}};
const EnumNames<constitutive::YieldMode> kYieldMode{
    {"perfect", constitutive::YieldMode::perfect},
    {"linear_hardening", constitutive::YieldMode::linear_hardening}};
const EnumNames<constitutive::ModulusMode> kModulus{
    {"constant", constitutive::ModulusMode::constant},
    {"ramberg_osgood_consistent", constitutive::ModulusMode::ramberg_osgood_consistent}};
const EnumNames<solver::LoadMode> kLoadMode{{"strain_controlled", solver::LoadMode::strain_controlled}};
const EnumNames<solver::LoadDirection> kDirection{{"uniaxial", solver::LoadDirection::uniaxial},
                                                  {"shear", solver::LoadDirection::shear}};
const EnumNames<solver::RewireRule> kRewire{{"off", solver::RewireRule::off},
                                            {"nearest_unbonded", solver::RewireRule::nearest_unbonded}};
const EnumNames<solver::InitialGuess> kGuess{{"affine", solver::InitialGuess::affine},
                                             {"zero", solver::InitialGuess::zero}};

struct Field {
  std::function<void(RunConfig&, const Raw&)> set;
  std::function<std::string(const RunConfig&)> get;
};

using FieldTable = std::map<std::string, std::map<std::string, Field>>;

template <typename Ref>
Field real_field(Ref ref) {
  return {[ref](RunConfig& c, const Raw& r) {
            if (r.kind != Raw::Kind::scalar) fail(r, "expected a number");
            ref(c) = to_double(r, r.text);
          },
          [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Int, typename Ref>
Field int_field(Ref ref) {
  return {[ref](RunConfig& c, const Raw& r) { ref(c) = to_integer<Int>(r); },
          [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); }};
}

template <typename Ref>
Field bool_field(Ref ref) {
  return {[ref](RunConfig& c, const Raw& r) {
            if (r.kind != Raw::Kind::scalar || (r.text != "true" && r.text != "false")) {
              fail(r, "expected true or false");
            }
            ref(c) = r.text == "true";
          },
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Ref>
Field string_field(Ref ref) {
  return {[ref](RunConfig& c, const Raw& r) {
            if (r.kind != Raw::Kind::string) fail(r, "expected a quoted string");
            ref(c) = r.text;
          },
          [ref](const RunConfig& c) { return quote(ref(const_cast<RunConfig&>(c))); }};
}

template <typename E, typename Ref>
Field enum_field(Ref ref, const EnumNames<E>& names) {
  return {[ref, &names](RunConfig& c, const Raw& r) { ref(c) = to_enum(r, names); },
          [ref, &names](const RunConfig& c) {
            return enum_name(ref(const_cast<RunConfig&>(c)), names);
          }};
}

const FieldTable& fields() {
  static const FieldTable table = [] {
    FieldTable t;
    auto& in = t["ingest"];
    in["events"] = string_field([](RunConfig& c) -> auto& { return c.ingest.events; });
    in["tags"] = string_field([](RunConfig& c) -> auto& { return c.ingest.tags; });
    in["context"] = string_field([](RunConfig& c) -> auto& { return c.ingest.context; });
    in["roles"] = enum_field([](RunConfig& c) -> auto& { return c.ingest.roles; }, kRoles);

    auto& la = t["lattice"];
    la["z"] = int_field<int>([](RunConfig& c) -> auto& { return c.lattice.spec.z; });
    la["k_max"] = int_field<int>([](RunConfig& c) -> auto& { return c.lattice.spec.k_max; });
    la["seed"] = int_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.lattice.spec.seed; });
    la["max_nodes"] =
        int_field<std::size_t>([](RunConfig& c) -> auto& { return c.lattice.build.max_nodes; });
    la["stiffness"] = real_field([](RunConfig& c) -> auto& { return c.lattice.build.stiffness; });
    la["stiffness_spread"] =
        real_field([](RunConfig& c) -> auto& { return c.lattice.build.stiffness_spread; });
    la["assign"] = enum_field([](RunConfig& c) -> auto& { return c.lattice.assign; }, kAssign);
    la["input"] = string_field([](RunConfig& c) -> auto& { return c.lattice.input; });

    auto& em = t["embedding"];
    em["signature"] =
        enum_field([](RunConfig& c) -> auto& { return c.embedding.signature; }, kSignature);
    em["generation_metric"] =
        enum_field([](RunConfig& c) -> auto& { return c.embedding.generation_metric; }, kMetric);

    auto& co = t["constitutive"];
    co["law"] = enum_field([](RunConfig& c) -> auto& { return c.models.law; }, kLaw);
    co["s_0"] = real_field([](RunConfig& c) -> auto& { return c.models.constants.s_0; });
    co["A"] = real_field([](RunConfig& c) -> auto& { return c.models.constants.A; });
    co["n"] = real_field([](RunConfig& c) -> auto& { return c.models.constants.n; });
    co["E_el"] = real_field([](RunConfig& c) -> auto& { return c.models.constants.E_el; });
    co["bulk"] = real_field([](RunConfig& c) -> auto& { return c.models.constants.bulk; });
    co["phason_coupling"] =
        real_field([](RunConfig& c) -> auto& { return c.models.constants.phason_coupling; });
    co["continuity"] = bool_field([](RunConfig& c) -> auto& { return c.models.constants.continuity; });

    auto& cr = t["creep"];
    cr["enabled"] = bool_field([](RunConfig& c) -> auto& { return c.models.creep_enabled; });
    cr["B"] = real_field([](RunConfig& c) -> auto& { return c.models.creep.B; });
    cr["m"] = real_field([](RunConfig& c) -> auto& { return c.models.creep.m; });
    cr["s_hat"] = real_field([](RunConfig& c) -> auto& { return c.models.creep.s_hat; });
    cr["orientation"] =
        enum_field([](RunConfig& c) -> auto& { return c.models.creep.orientation; }, kOrientation);

    auto& yi = t["yield"];
    yi["enabled"] = bool_field([](RunConfig& c) -> auto& { return c.models.plasticity_enabled; });
    yi["mode"] = enum_field([](RunConfig& c) -> auto& { return c.models.yield.mode; }, kYieldMode);
    yi["s_y"] = real_field([](RunConfig& c) -> auto& { return c.models.yield.s_y; });
    yi["H"] = real_field([](RunConfig& c) -> auto& { return c.models.yield.H; });

    auto& fl = t["flow"];
    fl["modulus_mode"] =
        enum_field([](RunConfig& c) -> auto& { return c.models.flow.modulus_mode; }, kModulus);
    fl["K0"] = real_field([](RunConfig& c) -> auto& { return c.models.flow.K0; });

    auto& lo = t["load"];
    lo["mode"] = enum_field([](RunConfig& c) -> auto& { return c.load.mode; }, kLoadMode);
    lo["direction"] = enum_field([](RunConfig& c) -> auto& { return c.load.direction; }, kDirection);
    lo["strain_rate"] = real_field([](RunConfig& c) -> auto& { return c.load.strain_rate; });
    lo["target_strain"] = real_field([](RunConfig& c) -> auto& { return c.load.target_strain; });
    lo["steps"] = int_field<int>([](RunConfig& c) -> auto& { return c.load.steps; });
    lo["fracture_threshold"] =
        real_field([](RunConfig& c) -> auto& { return c.load.fracture_threshold; });
    lo["threshold_scatter"] =
        real_field([](RunConfig& c) -> auto& { return c.load.threshold_scatter; });
    lo["rewire"] = enum_field([](RunConfig& c) -> auto& { return c.load.rewire; }, kRewire);
    lo["rewire_budget"] = int_field<int>([](RunConfig& c) -> auto& { return c.load.rewire_budget; });
    lo["phason_ratio"] = real_field([](RunConfig& c) -> auto& { return c.load.phason_ratio; });
    lo["seed"] = int_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.load.seed; });

    auto& so = t["solver"];
    so["tol"] = real_field([](RunConfig& c) -> auto& { return c.solver.tol; });
    so["max_iter"] = int_field<int>([](RunConfig& c) -> auto& { return c.solver.max_iter; });
    so["damping"] = real_field([](RunConfig& c) -> auto& { return c.solver.damping; });
    so["initial_guess"] =
        enum_field([](RunConfig& c) -> auto& { return c.solver.initial_guess; }, kGuess);

    t["output"]["dir"] = string_field([](RunConfig& c) -> auto& { return c.output_dir; });

    auto& sw = t["sweep"];
    sw["threads"] = int_field<int>([](RunConfig& c) -> auto& { return c.sweep.threads; });
    sw["rates"] = Field{[](RunConfig& c, const Raw& r) {
                          if (r.kind != Raw::Kind::array) fail(r, "expected an array of numbers");
                          c.sweep.rates.clear();
                          for (const auto& item : r.items) c.sweep.rates.push_back(to_double(r, item));
                        },
                        [](const RunConfig& c) {
                          std::string s = "[";
                          for (std::size_t i = 0; i < c.sweep.rates.size(); ++i) {
                            s += (i ? ", " : "") + fmt_double(c.sweep.rates[i]);
                          }
                          return s + "]";
                        }};
    return t;
  }();
  return table;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

Raw parse_value(std::string_view v, int line) {
  Raw raw;
  raw.line = line;
  if (v.empty()) fail(raw, "missing value");
  if (v.front() == '"') {
    raw.kind = Raw::Kind::string;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\' && i + 1 < v.size()) ++i;
      raw.text += v[i];
    }
    if (i >= v.size() || !trim(v.substr(i + 1)).empty()) fail(raw, "malformed string");
    return raw;
  }
  if (v.front() == '[') {
    raw.kind = Raw::Kind::array;
    if (v.back() != ']') fail(raw, "unterminated array");
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = trim(body.substr(0, comma));
      if (item.empty()) fail(raw, "empty array element");
      raw.items.emplace_back(item);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return raw;
  }
  raw.text = std::string(v);
  return raw;
}

}  // namespace

RunConfig::RunConfig() {
  models.constants = constitutive::OntologyConstants{};
  models.law = solver::StressLaw::elastic;
  models.yield.mode = constitutive::YieldMode::perfect;
  models.yield.s_y = 0.2;
  models.flow.modulus_mode = constitutive::ModulusMode::constant;
  models.flow.K0 = 50.0;
  models.creep_enabled = true;
  models.creep.B = 1.0;
  models.creep.m = 6.09;
  models.creep.s_hat = 1.19;
  models.creep.orientation = constitutive::CreepOrientation::inverted;
  models.plasticity_enabled = true;
  load.strain_rate = 1e-2;
  load.target_strain = 2.0;
  load.steps = 400;
  load.seed = 42;
}

void RunConfig::validate() const {
  lattice.spec.validate();
  if (!(lattice.build.stiffness > 0.0)) throw ValidationError("lattice.stiffness must be > 0");
  if (!(lattice.build.stiffness_spread >= 0.0 && lattice.build.stiffness_spread < 1.0)) {
    throw ValidationError("lattice.stiffness_spread must be in [0, 1)");
  }
  models.validate();
  load.validate();
  solver.validate();
  if (sweep.threads < 0) throw ValidationError("sweep.threads must be >= 0");
  for (double r : sweep.rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("sweep.rates must all be > 0");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  const auto& table = fields();
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(strip_comment(line));
    if (body.empty()) continue;
    Raw where;
    where.line = line_no;
    if (body.front() == '[') {
      if (body.back() != ']') fail(where, "malformed section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      if (!table.contains(section)) fail(where, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail(where, "expected key = value");
    std::string key(trim(body.substr(0, eq)));
    std::string sec = section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      sec = key.substr(0, dot);
      key = key.substr(dot + 1);
    }
    if (sec.empty()) fail(where, "key '" + key + "' outside a section");
    const auto s_it = table.find(sec);
    if (s_it == table.end()) fail(where, "unknown section [" + sec + "]");
    const auto f_it = s_it->second.find(key);
    if (f_it == s_it->second.end()) fail(where, "unknown key '" + key + "' in [" + sec + "]");
    if (!seen.emplace(sec, key).second) fail(where, "duplicate key '" + sec + "." + key + "'");
    f_it->second.set(config, parse_value(trim(body.substr(eq + 1)), line_no));
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_toml(const RunConfig& config) {
  std::string out;
  for (const auto& [section, keys] : fields()) {
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (const auto& [key, field] : keys) out += key + " = " + field.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::string canonical;
  for (const auto& [section, keys] : fields()) {
    if (section == "output") continue;
    for (const auto& [key, field] : keys) canonical += section + "." + key + "=" + field.get(config) + "\n";
  }
  return sha256_hex(canonical);
}

}  // namespace fsn::cli
