#pragma once

// CSV ingestion and output: an RFC-4180 reader/writer, the column mapping
// from a table to a Dataset, and the synthetic COVID-shaped data generator.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "misexp/data.hpp"

namespace misexp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, or -1.
  int column(std::string_view name) const;
};

/// Parses RFC-4180 text: comma separated, optional double-quoted fields with
/// "" escapes, CRLF or LF line ends. The first record is the header. Every
/// record must have as many fields as the header. Throws ParseError with the
/// line and column of the problem.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::string& path);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view value);
void write_csv(std::ostream& out, const CsvTable& table);

struct ColumnMap {
  std::string exposure = "A";
  std::string outcome = "Y";
  /// Empty: every column other than exposure and outcome, in file order.
  std::vector<std::string> covariates;
  std::vector<std::string> missing_markers = {"NA", ""};

  void validate() const;
};

/// Builds a Dataset: exposure in {0, 1, marker}, outcome in {0, 1}, numeric
/// covariates (a column whose values are exactly two non-numeric levels is
/// coded 0/1 in sorted level order). Throws SchemaError for absent columns,
/// ValueError for bad values and ParseError for malformed numbers; messages
/// carry the line and column name.
Dataset dataset_from_table(const CsvTable& table, const ColumnMap& columns);
Dataset load_csv(const std::string& path, const ColumnMap& columns);

/// Writes covariates, exposure (first missing marker where R = 1) and outcome
/// with 17 significant digits, so reading the file back reproduces the data.
void write_dataset_csv(std::ostream& out, const Dataset& data, const ColumnMap& columns);

/// Synthetic stand-in for the COVID-19 cohort: columns cvd, death, age, sex,
/// diabetes; n = 927 with exactly 162 missing cvd values. Not real data.
CsvTable synthetic_covid_table(std::uint64_t seed);
ColumnMap synthetic_covid_columns();

}  // namespace misexp
