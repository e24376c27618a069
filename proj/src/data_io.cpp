#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "mest/data.hpp"
#include "mest/error.hpp"

namespace mest {

std::size_t Column::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values);
}

bool Dataset::has(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw SchemaError(std::string(name), "no such column");
}

const NumericColumn& Dataset::numeric(std::string_view name) const {
  const Column& c = column(name);
  if (const auto* v = std::get_if<NumericColumn>(&c.values)) return *v;
  throw SchemaError(std::string(name), "expected a numeric column");
}

std::vector<std::string> Dataset::keys(std::string_view name) const {
  const Column& c = column(name);
  if (const auto* v = std::get_if<CategoricalColumn>(&c.values)) return *v;
  const auto& nums = std::get<NumericColumn>(c.values);
  std::vector<std::string> out;
  out.reserve(nums.size());
  for (double x : nums) out.push_back(format_real(x));
  return out;
}

void Dataset::add(Column column) {
  if (column.name.empty()) throw ArgumentError("column name must not be empty");
  if (has(column.name)) throw ArgumentError("duplicate column '" + column.name + "'");
  if (!columns_.empty() && column.size() != n_rows_) {
    throw ArgumentError("column '" + column.name + "' has " + std::to_string(column.size()) +
                        " rows, dataset has " + std::to_string(n_rows_));
  }
  n_rows_ = column.size();
  columns_.push_back(std::move(column));
}

void Dataset::add_numeric(std::string name, NumericColumn values) {
  add(Column{std::move(name), std::move(values)});
}

void Dataset::add_categorical(std::string name, CategoricalColumn values) {
  add(Column{std::move(name), std::move(values)});
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Dataset out;
  for (const auto& c : columns_) {
    Column sub{c.name, {}};
    std::visit(
        [&](const auto& src) {
          std::decay_t<decltype(src)> dst;
          dst.reserve(rows.size());
          for (std::size_t r : rows) dst.push_back(src.at(r));
          sub.values = std::move(dst);
        },
        c.values);
    out.columns_.push_back(std::move(sub));
  }
  out.n_rows_ = rows.size();
  return out;
}

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

namespace {

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// Reads one RFC-4180 record. Returns false at end of input.
bool next_record(std::istream& in, std::size_t& line, Record& rec) {
  rec.fields.clear();
  int ch = in.peek();
  if (ch == std::char_traits<char>::eof()) return false;
  ++line;
  rec.line = line;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  while (true) {
    ch = in.get();
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) throw IngestError(rec.line, "unterminated quoted field");
      break;
    }
    char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) throw IngestError(line, "quote inside unquoted field");
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      rec.fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (c == '\n') {
      break;
    } else {
      if (field_was_quoted) throw IngestError(line, "text after closing quote");
      field.push_back(c);
    }
  }
  rec.fields.push_back(std::move(field));
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) {
  static constexpr std::array<std::string_view, 7> tokens{"",    "NA",   "N/A", "NaN",
                                                          "nan", "NULL", "null"};
  cell = trim(cell);
  return std::find(tokens.begin(), tokens.end(), cell) != tokens.end();
}

std::optional<double> parse_real(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

bool is_blank(const Record& rec) { return rec.fields.size() == 1 && rec.fields[0].empty(); }

}  // namespace

Dataset read_csv(std::istream& in, const SchemaHints& hints) {
  std::size_t line = 0;
  Record header;
  if (!next_record(in, line, header)) throw IngestError(1, "missing header row");

  const std::size_t ncols = header.fields.size();
  for (std::size_t c = 0; c < ncols; ++c) {
    const std::string& name = header.fields[c];
    if (name.empty()) throw IngestError(header.line, "empty column name at position " +
                                                         std::to_string(c + 1));
    for (std::size_t d = 0; d < c; ++d) {
      if (header.fields[d] == name) {
        throw IngestError(header.line, "duplicate column name '" + name + "'");
      }
    }
  }
  for (const auto& [name, kind] : hints) {
    if (std::find(header.fields.begin(), header.fields.end(), name) == header.fields.end()) {
      throw SchemaError(name, "hinted column not present in header");
    }
  }

  std::vector<std::vector<std::string>> cells(ncols);
  std::vector<std::size_t> lines;
  Record rec;
  while (next_record(in, line, rec)) {
    if (is_blank(rec)) continue;
    if (rec.fields.size() != ncols) {
      throw IngestError(rec.line, "expected " + std::to_string(ncols) + " fields, found " +
                                      std::to_string(rec.fields.size()));
    }
    for (std::size_t c = 0; c < ncols; ++c) {
      if (is_missing(rec.fields[c])) {
        throw IngestError(rec.line, "missing value in column '" + header.fields[c] + "'");
      }
      cells[c].push_back(std::move(rec.fields[c]));
    }
    lines.push_back(rec.line);
  }

  Dataset ds;
  for (std::size_t c = 0; c < ncols; ++c) {
    const std::string& name = header.fields[c];
    auto hint = hints.find(name);
    const bool forced_real = hint != hints.end() && hint->second == ColumnKind::real;
    const bool forced_cat = hint != hints.end() && hint->second == ColumnKind::categorical;

    if (!forced_cat) {
      NumericColumn values;
      values.reserve(cells[c].size());
      bool numeric = true;
      for (std::size_t r = 0; r < cells[c].size(); ++r) {
        auto v = parse_real(cells[c][r]);
        if (!v) {
          if (forced_real) {
            throw IngestError(lines[r], "column '" + name + "': cannot parse '" + cells[c][r] +
                                            "' as a real number");
          }
          numeric = false;
          break;
        }
        values.push_back(*v);
      }
      if (numeric) {
        ds.add_numeric(name, std::move(values));
        continue;
      }
    }
    CategoricalColumn labels;
    labels.reserve(cells[c].size());
    for (auto& cell : cells[c]) labels.emplace_back(trim(cell));
    ds.add_categorical(name, std::move(labels));
  }
  return ds;
}

Dataset read_csv(const std::filesystem::path& path, const SchemaHints& hints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return read_csv(in, hints);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && !s.empty()) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& ds) {
  const auto& cols = ds.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    out << quote_if_needed(cols[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      if (const auto* v = std::get_if<NumericColumn>(&cols[c].values)) {
        out << format_real((*v)[r]);
      } else {
        out << quote_if_needed(std::get<CategoricalColumn>(cols[c].values)[r]);
      }
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_csv(out, ds);
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

UnitPartition partition_units(const Dataset& ds, const std::optional<std::string>& unit_col) {
  if (ds.n_rows() == 0) throw ArgumentError("cannot partition a dataset with no rows");
  UnitPartition partition;
  if (!unit_col) {
    partition.units.reserve(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
      partition.units.push_back(DataUnit{std::to_string(r), ds.select_rows({r}), {r}});
    }
    return partition;
  }

  const auto keys = ds.keys(*unit_col);
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::string> order;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < keys.size(); ++r) {
    auto [it, inserted] = slot.try_emplace(keys[r], order.size());
    if (inserted) {
      order.push_back(keys[r]);
      members.emplace_back();
    }
    members[it->second].push_back(r);
  }
  partition.units.reserve(order.size());
  for (std::size_t u = 0; u < order.size(); ++u) {
    partition.units.push_back(DataUnit{order[u], ds.select_rows(members[u]), members[u]});
  }
  return partition;
}

Eigen::MatrixXd design_matrix(const Dataset& rows, const std::vector<std::string>& covariates,
                              bool intercept) {
  const auto n = static_cast<Eigen::Index>(rows.n_rows());
  const Eigen::Index offset = intercept ? 1 : 0;
  Eigen::MatrixXd X(n, offset + static_cast<Eigen::Index>(covariates.size()));
  if (intercept) X.col(0).setOnes();
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    const auto& col = rows.numeric(covariates[k]);
    X.col(offset + static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(col.data(), n);
  }
  return X;
}

}  // namespace mest
