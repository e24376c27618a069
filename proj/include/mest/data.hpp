#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace mest {

enum class ColumnKind { real, categorical };

using NumericColumn = std::vector<double>;
using CategoricalColumn = std::vector<std::string>;

struct Column {
  std::string name;
  std::variant<NumericColumn, CategoricalColumn> values;

  ColumnKind kind() const {
    return std::holds_alternative<NumericColumn>(values) ? ColumnKind::real
                                                          : ColumnKind::categorical;
  }
  std::size_t size() const;

  bool operator==(const Column&) const = default;
};

/// Rectangular table of named columns. Column names are unique and every
/// column has n_rows() entries.
class Dataset {
 public:
  Dataset() = default;

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  bool has(std::string_view name) const;
  std::vector<std::string> column_names() const;
  const std::vector<Column>& columns() const noexcept { return columns_; }

  const Column& column(std::string_view name) const;
  /// Throws SchemaError when the column is absent or categorical.
  const NumericColumn& numeric(std::string_view name) const;
  /// Cell values rendered as text; numeric cells use shortest round-trip form.
  std::vector<std::string> keys(std::string_view name) const;

  void add(Column column);
  void add_numeric(std::string name, NumericColumn values);
  void add_categorical(std::string name, CategoricalColumn values);

  /// New dataset with the given rows, in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

/// One independent unit O_i: a single row or a whole cluster.
struct DataUnit {
  std::string id;
  Dataset rows;
  /// Positions of this unit's rows in the source dataset.
  std::vector<std::size_t> source_rows;
};

struct UnitPartition {
  std::vector<DataUnit> units;
  std::size_t m() const noexcept { return units.size(); }
};

using SchemaHints = std::map<std::string, ColumnKind, std::less<>>;

/// RFC-4180 style CSV with a mandatory header row. Cells are parsed as reals
/// unless a hint says otherwise or some cell in the column is non-numeric.
/// Missing values ("", NA, NaN, null) are rejected.
Dataset read_csv(std::istream& in, const SchemaHints& hints = {});
Dataset read_csv(const std::filesystem::path& path, const SchemaHints& hints = {});

void write_csv(std::ostream& out, const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

/// Without unit_col every row is its own unit; with it, units follow the
/// first-appearance order of the key values.
UnitPartition partition_units(const Dataset& ds,
                              const std::optional<std::string>& unit_col = std::nullopt);

/// n_i x k matrix with an optional leading column of ones.
Eigen::MatrixXd design_matrix(const Dataset& rows, const std::vector<std::string>& covariates,
                              bool intercept);
inline Eigen::MatrixXd design_matrix(const DataUnit& unit,
                                     const std::vector<std::string>& covariates, bool intercept) {
  return design_matrix(unit.rows, covariates, intercept);
}

/// Shortest round-trip decimal form of a double.
std::string format_real(double value);

}  // namespace mest
