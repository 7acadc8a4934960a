#pragma once

// Experiment configs: INI text with a fixed schema per experiment, resolved
// against defaults and written back in canonical form. See docs/formats.md.

#include "homlab/fields.hpp"
#include "homlab/solver.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace homlab::cli {

enum class ValueType { integer, seed, real, text, integer_list, real_list, boolean };

struct KeySpec {
  std::string name;
  ValueType type;
  std::string fallback;               ///< default in canonical form
  std::vector<std::string> choices;   ///< allowed text values; empty = any
};

struct SectionSpec {
  std::string name;
  std::vector<KeySpec> keys;
};

inline const std::vector<std::string> kExperiments{"gen-field",     "effmat",     "sweep", "corrector",
                                                   "gff-compare",   "error-scaling", "regularity"};

/// Sections and keys valid for one experiment and field kind, in canonical order.
std::vector<SectionSpec> schema_for(std::string_view experiment, FieldKind kind);

class Config {
 public:
  /// Parses and resolves INI text; throws ConfigError naming the line or key.
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  /// Overrides one value, "section.key=value". The experiment and field kind are fixed.
  void set(std::string_view assignment);
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& experiment() const { return experiment_; }
  FieldKind field_kind() const { return kind_; }

  const std::string& text(const std::string& section, const std::string& key) const;
  long long integer(const std::string& section, const std::string& key) const;
  Seed seed(const std::string& section, const std::string& key) const;
  double real(const std::string& section, const std::string& key) const;
  bool flag(const std::string& section, const std::string& key) const;
  std::vector<int> integers(const std::string& section, const std::string& key) const;
  std::vector<double> reals(const std::string& section, const std::string& key) const;

  /// Canonical text: schema order, normalized values, every key present.
  std::string to_text() const;

 private:
  const KeySpec& spec(const std::string& section, const std::string& key) const;

  std::string experiment_;
  FieldKind kind_ = FieldKind::constant;
  std::vector<SectionSpec> schema_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Field generator described by the [field] section, with the given seed.
CoefficientField field_from_config(const Config& config, Seed seed);
SolverOptions solver_from_config(const Config& config);

}  // namespace homlab::cli
