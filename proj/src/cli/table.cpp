#include "table.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "vdrop/cli.hpp"

namespace vdrop::cli {

using nlohmann::ordered_json;

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw UsageError("unknown format '" + s + "' (expected csv or json)");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string meta_value(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);  // JSON has no nan/inf literals
}

}  // namespace

std::string render(const Table& table, Format format) {
  if (format == Format::json) {
    ordered_json doc;
    doc["meta"] = table.meta.is_null() ? ordered_json::object() : table.meta;
    doc["columns"] = table.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& row : table.rows) {
      ordered_json obj;
      for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = json_number(row[i]);
      rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
  }
  std::ostringstream os;
  if (table.meta.is_object()) {
    for (const auto& [key, value] : table.meta.items()) os << "# " << key << "=" << meta_value(value) << "\n";
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << "\n";
  }
  return os.str();
}

void write_output(const std::string& path, const std::string& content, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << content;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  file << content;
  file.close();
  if (!file) throw IoError("failed writing '" + path + "'");
}

}  // namespace vdrop::cli
