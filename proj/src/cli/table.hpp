#pragma once

// Tabular output shared by the subcommands: CSV with '#' header comments, or
// a JSON object carrying the same metadata, column names and rows.

#include <json.hpp>
#include <string>
#include <vector>

namespace vdrop::cli {

enum class Format { csv, json };

Format parse_format(const std::string& s);

struct Table {
  nlohmann::ordered_json meta;  // rendered as "# key=value" lines in CSV
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// %.17g; non-finite values print as nan / inf / -inf.
std::string format_number(double v);

std::string render(const Table& table, Format format);

/// Writes `content` to `path`, or to `fallback` when path is empty or "-".
void write_output(const std::string& path, const std::string& content, std::ostream& fallback);

}  // namespace vdrop::cli
