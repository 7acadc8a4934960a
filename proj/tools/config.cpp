#include "config.hpp"

#include "homlab/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace homlab::cli {

namespace {

using V = ValueType;

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Canonical form of `raw` for `spec`; throws ConfigError mentioning `where`.
std::string normalize(const KeySpec& spec, std::string_view raw, const std::string& where) {
  const std::string v = trim(raw);
  try {
    switch (spec.type) {
      case V::integer: return std::to_string(parse_int(v));
      case V::seed: return std::to_string(parse_uint64(v));
      case V::real: return format_double(parse_double(v));
      case V::boolean:
        if (v == "true" || v == "1" || v == "yes") return "true";
        if (v == "false" || v == "0" || v == "no") return "false";
        throw ConfigError("expected true or false, got '" + v + "'");
      case V::text:
        if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
          std::string allowed;
          for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : "|") + c;
          throw ConfigError("expected one of " + allowed + ", got '" + v + "'");
        }
        return v;
      case V::integer_list:
      case V::real_list: {
        std::string out;
        for (const auto& w : words(v)) {
          if (!out.empty()) out += ' ';
          out += spec.type == V::integer_list ? std::to_string(parse_int(w)) : format_double(parse_double(w));
        }
        return out;
      }
    }
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return v;
}

std::vector<std::string> field_kind_names() {
  std::vector<std::string> out;
  for (auto k : {FieldKind::checkerboard, FieldKind::poisson_inclusion, FieldKind::filtered_white_noise,
                 FieldKind::line_inclusion, FieldKind::constant})
    out.emplace_back(to_string(k));
  return out;
}

SectionSpec field_section(FieldKind kind) {
  SectionSpec s{"field", {{"kind", V::text, "", field_kind_names()}, {"d", V::integer, "2", {}}}};
  auto add = [&](std::string name, std::string fallback) { s.keys.push_back({std::move(name), V::real, fallback, {}}); };
  switch (kind) {
    case FieldKind::checkerboard:
      add("a_lo", "1");
      add("a_hi", "4");
      add("prob_hi", "0.5");
      break;
    case FieldKind::poisson_inclusion:
      add("intensity", "1");
      add("radius", "0.2");
      add("a_in", "4");
      add("a_out", "1");
      break;
    case FieldKind::filtered_white_noise:
      add("filter_scale", "0.5");
      add("contrast", "0.1");
      break;
    case FieldKind::line_inclusion:
      add("intensity", "1");
      add("segment_length", "1.5");
      add("thickness", "0.1");
      add("a_line", "1e-05");
      add("a_bg", "1");
      add("orientation_spread", "0.1");
      break;
    case FieldKind::constant:
      add("value", "1");
      break;
  }
  return s;
}

SectionSpec homogenized_section() {
  return {"homogenized",
          {{"source", V::text, "estimate", {"estimate", "given"}},
           {"matrix", V::real_list, "", {}},
           {"scale", V::integer, "16", {}},
           {"samples", V::integer, "16", {}},
           {"cells_per_unit", V::integer, "4", {}}}};
}

}  // namespace

std::vector<SectionSpec> schema_for(std::string_view experiment, FieldKind kind) {
  std::vector<SectionSpec> out;
  out.push_back({"run",
                 {{"experiment", V::text, "", kExperiments},
                  {"seed", V::seed, "0", {}},
                  {"output_dir", V::text, "out", {}},
                  {"threads", V::integer, "0", {}}}});
  out.push_back(field_section(kind));
  out.push_back({"solver", {{"tolerance", V::real, "1e-10", {}}, {"max_iterations", V::integer, "0", {}}}});
  const std::vector<std::string> kernels{"bump", "truncated-gaussian"};
  if (experiment == "gen-field") {
    out.push_back({"grid",
                   {{"side", V::integer, "16", {}},
                    {"cells_per_unit", V::integer, "4", {}},
                    {"placement", V::text, "centered", {"centered", "origin"}},
                    {"format", V::text, "both", {"csv", "binary", "both"}}}});
  } else if (experiment == "effmat") {
    out.push_back({"effmat",
                   {{"side", V::integer, "16", {}},
                    {"cells_per_unit", V::integer, "4", {}},
                    {"samples", V::integer, "8", {}}}});
  } else if (experiment == "sweep") {
    out.push_back({"sweep",
                   {{"scales", V::integer_list, "8 16 32", {}},
                    {"samples", V::integer, "64", {}},
                    {"cells_per_unit", V::integer, "4", {}},
                    {"mode", V::text, "independent", {"independent", "nested"}}}});
  } else if (experiment == "corrector") {
    out.push_back({"corrector",
                   {{"side", V::integer, "128", {}},
                    {"cells_per_unit", V::integer, "2", {}},
                    {"samples", V::integer, "8", {}},
                    {"filter_scales", V::real_list, "4 8 16", {}},
                    {"kernel", V::text, "bump", kernels},
                    {"spacing", V::real, "0", {}},
                    {"growth_radii", V::real_list, "8 16 32", {}},
                    {"dump", V::boolean, "true", {}}}});
  } else if (experiment == "gff-compare") {
    out.push_back({"gff",
                   {{"side", V::integer, "64", {}},
                    {"cells_per_unit", V::integer, "2", {}},
                    {"samples", V::integer, "16", {}},
                    {"filter_scales", V::real_list, "4 8", {}},
                    {"kernel", V::text, "bump", kernels},
                    {"noise_kernel", V::text, "bump", kernels},
                    {"noise_scale", V::real, "1", {}},
                    {"dump", V::boolean, "true", {}}}});
    out.push_back(homogenized_section());
  } else if (experiment == "error-scaling") {
    out.push_back({"error",
                   {{"f", V::text, "quadratic", {"affine", "quadratic", "sine"}},
                    {"inv_eps", V::integer_list, "8 16 32", {}},
                    {"cells_per_eps", V::integer, "4", {}},
                    {"samples", V::integer, "8", {}},
                    {"method", V::text, "fem", {"fem", "oracle"}},
                    {"two_scale", V::boolean, "false", {}},
                    {"weak_rho", V::real, "0", {}}}});
    out.push_back(homogenized_section());
  } else if (experiment == "regularity") {
    out.push_back({"regularity",
                   {{"radii", V::integer_list, "4 8 16", {}},
                    {"draws", V::integer, "16", {}},
                    {"cells_per_unit", V::integer, "2", {}}}});
  } else {
    throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
  }
  return out;
}

Config Config::parse(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [name, node] : tree)
    if (node.empty() && !node.data().empty()) throw ConfigError("key '" + name + "' outside any section");

  Config c;
  const auto experiment = tree.get_optional<std::string>("run.experiment");
  if (!experiment) throw ConfigError("missing key run.experiment");
  c.experiment_ = trim(*experiment);
  const auto kind = tree.get_optional<std::string>(pt::ptree::path_type("field.kind"));
  if (!kind) throw ConfigError("missing key field.kind");
  try {
    c.kind_ = field_kind_from_string(trim(*kind));
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("field.kind: ") + e.what());
  }
  c.schema_ = schema_for(c.experiment_, c.kind_);

  for (const auto& [section, node] : tree) {
    const auto it = std::find_if(c.schema_.begin(), c.schema_.end(), [&](const auto& s) { return s.name == section; });
    if (it == c.schema_.end()) throw ConfigError("unknown section [" + section + "] for experiment " + c.experiment_);
    for (const auto& [key, value] : node) {
      if (std::none_of(it->keys.begin(), it->keys.end(), [&](const auto& k) { return k.name == key; }))
        throw ConfigError("unknown key " + section + "." + key);
      c.values_[section][key] = normalize(c.spec(section, key), value.data(), section + "." + key);
    }
  }
  for (const auto& s : c.schema_)
    for (const auto& k : s.keys)
      if (!c.values_[s.name].contains(k.name)) {
        if (k.fallback.empty() && k.type != V::real_list && k.type != V::integer_list)
          throw ConfigError("missing key " + s.name + "." + k.name);
        c.values_[s.name][k.name] = k.fallback;
      }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
    throw ConfigError("override must look like section.key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
      std::string(assignment.substr(eq + 1)));
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto& k = spec(section, key);
  const auto v = normalize(k, value, section + "." + key);
  if ((section == "run" && key == "experiment" && v != experiment_) ||
      (section == "field" && key == "kind" && v != to_string(kind_)))
    throw ConfigError(section + "." + key + " cannot be overridden");
  values_[section][key] = v;
}

const KeySpec& Config::spec(const std::string& section, const std::string& key) const {
  for (const auto& s : schema_)
    if (s.name == section)
      for (const auto& k : s.keys)
        if (k.name == key) return k;
  throw ConfigError("unknown key " + section + "." + key);
}

const std::string& Config::text(const std::string& section, const std::string& key) const {
  spec(section, key);
  return values_.at(section).at(key);
}

long long Config::integer(const std::string& section, const std::string& key) const {
  return parse_int(text(section, key));
}

Seed Config::seed(const std::string& section, const std::string& key) const {
  return parse_uint64(text(section, key));
}

double Config::real(const std::string& section, const std::string& key) const {
  return parse_double(text(section, key));
}

bool Config::flag(const std::string& section, const std::string& key) const { return text(section, key) == "true"; }

std::vector<int> Config::integers(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  for (const auto& w : words(text(section, key))) out.push_back(static_cast<int>(parse_int(w)));
  return out;
}

std::vector<double> Config::reals(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& w : words(text(section, key))) out.push_back(parse_double(w));
  return out;
}

std::string Config::to_text() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : schema_) {
    out << (first ? "" : "\n") << '[' << s.name << "]\n";
    first = false;
    for (const auto& k : s.keys) out << k.name << " = " << values_.at(s.name).at(k.name) << '\n';
  }
  return out.str();
}

CoefficientField field_from_config(const Config& c, Seed seed) {
  const int d = static_cast<int>(c.integer("field", "d"));
  auto r = [&](const char* key) { return c.real("field", key); };
  switch (c.field_kind()) {
    case FieldKind::checkerboard: return gen_checkerboard(d, r("a_lo"), r("a_hi"), r("prob_hi"), seed);
    case FieldKind::poisson_inclusion:
      return gen_poisson_inclusions(d, r("intensity"), r("radius"), r("a_in"), r("a_out"), seed);
    case FieldKind::filtered_white_noise: return gen_filtered_white_noise(d, r("filter_scale"), r("contrast"), seed);
    case FieldKind::line_inclusion:
      if (d != 2) throw ConfigError("field.d must be 2 for line inclusions");
      return gen_line_inclusions(r("intensity"), r("segment_length"), r("thickness"), r("a_line"), r("a_bg"),
                                 r("orientation_spread"), seed);
    case FieldKind::constant: return gen_constant(d, r("value")).with_seed(seed);
  }
  throw ConfigError("unknown field kind");
}

SolverOptions solver_from_config(const Config& c) {
  SolverOptions o;
  o.tolerance = c.real("solver", "tolerance");
  o.max_iterations = static_cast<int>(c.integer("solver", "max_iterations"));
  if (!(o.tolerance > 0)) throw ConfigError("solver.tolerance must be positive");
  if (o.max_iterations < 0) throw ConfigError("solver.max_iterations must be >= 0");
  return o;
}

}  // namespace homlab::cli
