#pragma once

// Text and binary I/O shared by the file writers and readers.

#include "homlab/types.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace homlab {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::uint64_t parse_uint64(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);

/// Raw native-endian (little-endian on every supported platform) binary fields.
template <typename T>
void write_binary(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

/// Throws ConfigError("truncated <what>") on a short read.
template <typename T>
T read_binary(std::istream& in, std::string_view what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("truncated " + std::string(what));
  return v;
}

/// Rows of a schema-tagged CSV: first line `#schema=N`, optional further
/// `#` lines, then a header row and data rows.
struct CsvTable {
  int schema = 0;
  std::vector<std::string> comments;  ///< `#` lines after the schema tag, without the `#`
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  ///< throws if absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Throws ConfigError naming `what` and both versions unless t.schema matches.
void require_schema(const CsvTable& t, std::string_view what);

/// `k1=v1,k2=v2,...` metadata line -> map. Throws on items without '='.
std::map<std::string, std::string> parse_metadata(std::string_view line);
/// Looks up `key`, throwing ConfigError if it is absent.
const std::string& metadata_at(const std::map<std::string, std::string>& meta, const std::string& key);

}  // namespace homlab
