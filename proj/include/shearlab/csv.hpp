#ifndef SHEARLAB_CSV_HPP
#define SHEARLAB_CSV_HPP

// Plain CSV with a block of "# key=value" metadata lines before the header.

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace shearlab::csv {

using Meta = std::vector<std::pair<std::string, std::string>>;

/// Shortest round-trip decimal representation.
std::string fmt(double v);

void write_meta(std::ostream& os, const Meta& meta);
void write_header(std::ostream& os, const std::vector<std::string>& columns);
void write_row(std::ostream& os, const std::vector<double>& values);

struct Table {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws DomainError if absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

/// Parses the format written above. Non-numeric cells (e.g. a text
/// classification) are stored as NaN. Throws DomainError on malformed input.
Table read(std::istream& is);
Table read_file(const std::string& path);

}  // namespace shearlab::csv

#endif  // SHEARLAB_CSV_HPP
