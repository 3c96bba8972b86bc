#include "misexp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "misexp/errors.hpp"
#include "misexp/glm.hpp"
#include "misexp/random.hpp"

namespace misexp {

int CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::string where(std::size_t line, std::size_t col) {
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_lines;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;       // inside a quoted field
  bool was_quoted = false;   // current field was quoted and has closed
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
    field_started = false;
  };
  const auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record_lines.push_back(record_line);
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
          was_quoted = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      end_field();
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      ++line;
      record_line = line;
    } else if (ch == '"') {
      if (field_started) throw ParseError("unexpected quote inside an unquoted field at " + where(line, record.size() + 1));
      quoted = true;
      field_started = true;
    } else {
      if (was_quoted) throw ParseError("characters after a closing quote at " + where(line, record.size() + 1));
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field starting on " + where(record_line, record.size() + 1));
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw ParseError("empty CSV input: a header row is required");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    // A blank line parses as a single empty field; skip it.
    if (rec.size() == 1 && rec.front().empty() && table.header.size() != 1) continue;
    if (rec.size() != table.header.size()) {
      throw ParseError("line " + std::to_string(record_lines[r]) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " + std::to_string(rec.size()));
    }
    table.rows.push_back(std::move(rec));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (const char ch : value) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  const auto write_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ',';
      out << csv_field(row[j]);
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

// ---------------------------------------------------------------------------

void ColumnMap::validate() const {
  if (exposure.empty() || outcome.empty()) throw ConfigError("exposure and outcome column names are required");
  std::set<std::string> seen = {exposure};
  if (!seen.insert(outcome).second) throw ConfigError("exposure and outcome columns must differ");
  for (const auto& c : covariates) {
    if (!seen.insert(c).second) throw ConfigError("column '" + c + "' is listed more than once");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

}  // namespace

Dataset dataset_from_table(const CsvTable& table, const ColumnMap& columns) {
  columns.validate();
  const auto require = [&table](const std::string& name) {
    const int c = table.column(name);
    if (c < 0) throw SchemaError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(c);
  };
  const std::size_t ca = require(columns.exposure);
  const std::size_t cy = require(columns.outcome);
  std::vector<std::string> cov_names = columns.covariates;
  if (cov_names.empty()) {
    for (const auto& h : table.header) {
      if (h != columns.exposure && h != columns.outcome) cov_names.push_back(h);
    }
  }
  std::vector<std::size_t> cx;
  for (const auto& name : cov_names) cx.push_back(require(name));

  const auto n = static_cast<Index>(table.rows.size());
  if (n < 1) throw ValueError("dataset has no data rows");
  const auto line_of = [](Index i) { return std::to_string(i + 2); };

  Eigen::MatrixXd cov(n, static_cast<Index>(cx.size()));
  for (std::size_t j = 0; j < cx.size(); ++j) {
    // Numeric column, or exactly two text levels coded 0/1 in sorted order.
    std::vector<std::string> cells(static_cast<std::size_t>(n));
    std::set<std::string> levels;
    bool any_text = false;
    bool any_number = false;
    for (Index i = 0; i < n; ++i) {
      const std::string v = trim(table.rows[static_cast<std::size_t>(i)][cx[j]]);
      const bool missing = std::find(columns.missing_markers.begin(), columns.missing_markers.end(), v) !=
                           columns.missing_markers.end();
      if (missing || v.empty()) {
        throw ValueError("missing covariate value at line " + line_of(i) + ", column '" + cov_names[j] + "'");
      }
      double x = 0.0;
      if (parse_number(v, x)) {
        any_number = true;
        cov(i, static_cast<Index>(j)) = x;
      } else {
        any_text = true;
        levels.insert(v);
      }
      cells[static_cast<std::size_t>(i)] = v;
    }
    if (!any_text) continue;
    if (any_number || levels.size() != 2) {
      for (Index i = 0; i < n; ++i) {
        double x = 0.0;
        if (!parse_number(cells[static_cast<std::size_t>(i)], x)) {
          throw ParseError("non-numeric value '" + cells[static_cast<std::size_t>(i)] + "' at line " + line_of(i) +
                           ", column '" + cov_names[j] + "'");
        }
      }
    }
    const std::string& low = *levels.begin();
    for (Index i = 0; i < n; ++i) {
      cov(i, static_cast<Index>(j)) = cells[static_cast<std::size_t>(i)] == low ? 0.0 : 1.0;
    }
  }

  std::vector<std::optional<int>> exposure(static_cast<std::size_t>(n));
  Eigen::VectorXd outcome(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string a = trim(row[ca]);
    if (a == "0" || a == "1") {
      exposure[static_cast<std::size_t>(i)] = a == "1" ? 1 : 0;
    } else if (std::find(columns.missing_markers.begin(), columns.missing_markers.end(), a) ==
               columns.missing_markers.end()) {
      throw ValueError("exposure value '" + a + "' at line " + line_of(i) + ", column '" + columns.exposure +
                       "' is not 0, 1 or a missing marker");
    }
    const std::string y = trim(row[cy]);
    if (y != "0" && y != "1") {
      throw ValueError("outcome value '" + y + "' at line " + line_of(i) + ", column '" + columns.outcome +
                       "' is not 0 or 1");
    }
    outcome(i) = y == "1" ? 1.0 : 0.0;
  }
  return Dataset::from_columns(cov, exposure, outcome, cov_names);
}

Dataset load_csv(const std::string& path, const ColumnMap& columns) {
  return dataset_from_table(read_csv_file(path), columns);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const ColumnMap& columns) {
  CsvTable table;
  for (Index j = 0; j < data.p(); ++j) {
    table.header.push_back(data.covariate_names.empty() ? "x" + std::to_string(j + 1)
                                                        : data.covariate_names[static_cast<std::size_t>(j)]);
  }
  table.header.push_back(columns.exposure);
  table.header.push_back(columns.outcome);
  const std::string marker = columns.missing_markers.empty() ? "NA" : columns.missing_markers.front();
  char buf[32];
  for (Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> row;
    for (Index j = 1; j <= data.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.x(i, j));
      row.emplace_back(buf);
    }
    row.push_back(data.r(i) == 1.0 ? marker : (data.a(i) == 1.0 ? "1" : "0"));
    row.push_back(data.y(i) == 1.0 ? "1" : "0");
    table.rows.push_back(std::move(row));
  }
  write_csv(out, table);
}

// ---------------------------------------------------------------------------

ColumnMap synthetic_covid_columns() {
  ColumnMap c;
  c.exposure = "cvd";
  c.outcome = "death";
  c.covariates = {"age", "sex", "diabetes"};
  return c;
}

CsvTable synthetic_covid_table(std::uint64_t seed) {
  constexpr int n = 927;
  constexpr int n_missing = 162;
  CounterRng rng(derive_seed(seed, {0}));
  std::normal_distribution<double> normal;

  std::vector<int> age(n), male(n), diabetes(n), cvd(n), death(n);
  for (int i = 0; i < n; ++i) {
    age[i] = static_cast<int>(std::lround(std::clamp(67.0 + 17.0 * normal(rng), 0.0, 107.0)));
    male[i] = rng.bernoulli(0.5) ? 1 : 0;
    diabetes[i] = rng.bernoulli(0.59) ? 1 : 0;
    const double eta_a = -1.6 + 0.03 * age[i] + 0.3 * diabetes[i] - 0.1 * male[i];
    cvd[i] = rng.bernoulli(expit(eta_a)) ? 1 : 0;
    const double eta_y = -5.1 + 0.055 * age[i] + 0.1 * male[i] - 0.15 * diabetes[i] - 0.05 * cvd[i];
    death[i] = rng.bernoulli(expit(eta_y)) ? 1 : 0;
  }

  // Exactly n_missing rows by weighted sampling without replacement
  // (exponential keys); the weights depend on covariates and outcome only.
  CounterRng pick(derive_seed(seed, {1}));
  std::vector<std::pair<double, int>> keys;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(0.01 * (age[i] - 67) + 0.4 * diabetes[i] + 0.6 * death[i]);
    const double u = 1.0 - pick.uniform();  // (0, 1]
    keys.emplace_back(-std::log(u) / w, i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<bool> missing(n, false);
  for (int k = 0; k < n_missing; ++k) missing[static_cast<std::size_t>(keys[static_cast<std::size_t>(k)].second)] = true;

  CsvTable table;
  table.header = {"cvd", "death", "age", "sex", "diabetes"};
  for (int i = 0; i < n; ++i) {
    table.rows.push_back({missing[static_cast<std::size_t>(i)] ? "NA" : std::to_string(cvd[i]),
                          std::to_string(death[i]), std::to_string(age[i]), male[i] ? "male" : "female",
                          std::to_string(diabetes[i])});
  }
  return table;
}

}  // namespace misexp
