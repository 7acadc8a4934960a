#include "homlab/io.hpp"

#include "homlab/types.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <system_error>

namespace homlab {

std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return {buf.data(), ptr};
}

double parse_double(std::string_view text) {
  const auto t = trim(text);
  double x = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError("not a number: '" + t + "'");
  return x;
}

long long parse_int(std::string_view text) {
  const auto t = trim(text);
  long long x = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError("not an integer: '" + t + "'");
  return x;
}

std::uint64_t parse_uint64(std::string_view text) {
  const auto t = trim(text);
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError("not an unsigned integer: '" + t + "'");
  return x;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ConfigError("CSV has no column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#schema=", 0) != 0)
    throw ConfigError("CSV does not start with a #schema= line");
  table.schema = static_cast<int>(parse_int(std::string_view(line).substr(8)));
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.substr(1));
      continue;
    }
    if (!have_header) {
      table.header = split(line, ',');
      have_header = true;
    } else {
      table.rows.push_back(split(line, ','));
    }
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_csv(in);
}

void require_schema(const CsvTable& t, std::string_view what) {
  if (t.schema != kSchemaVersion)
    throw ConfigError(std::string(what) + " has schema " + std::to_string(t.schema) + ", expected " +
                      std::to_string(kSchemaVersion));
}

std::map<std::string, std::string> parse_metadata(std::string_view line) {
  std::map<std::string, std::string> meta;
  for (const auto& item : split(line, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("bad metadata item '" + item + "'");
    meta[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return meta;
}

const std::string& metadata_at(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw ConfigError("metadata lacks '" + key + "'");
  return it->second;
}

}  // namespace homlab
