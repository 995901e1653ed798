#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace calibra {

using Index = Eigen::Index;

enum class VariableKind { continuous, binary };

const char* to_string(VariableKind kind);
VariableKind parse_variable_kind(const std::string& text);

struct VariableMeta {
  std::string name;
  VariableKind kind = VariableKind::continuous;
};

/// n x K grid of real cells; a missing cell is stored as quiet NaN.
///
/// Observed cells loaded from CSV keep their source text so that a dataset
/// can be written back out with observed fields byte-identical to the input.
class DataMatrix {
 public:
  DataMatrix(Eigen::MatrixXd values, std::vector<VariableMeta> columns);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  double operator()(Index i, Index j) const { return values_(i, j); }
  bool is_missing(Index i, Index j) const;
  bool has_missing() const;
  Index missing_count() const;

  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<VariableMeta>& columns() const { return columns_; }
  const VariableMeta& column(Index j) const { return columns_.at(static_cast<std::size_t>(j)); }
  std::vector<std::string> column_names() const;
  std::optional<Index> column_index(const std::string& name) const;

  /// Source text of an observed cell, or nullptr when none was recorded.
  const std::string* source_token(Index i, Index j) const;

  /// Copy whose missing cells are taken from `filled`. Observed cells of
  /// `filled` must equal this matrix bit-for-bit; every cell of `filled`
  /// must be finite.
  DataMatrix completed_with(const Eigen::MatrixXd& filled) const;

  /// Columns reordered (or subset) by index.
  DataMatrix select_columns(const std::vector<Index>& order) const;

  void set_source_tokens(std::vector<std::string> tokens);

 private:
  Eigen::MatrixXd values_;
  std::vector<VariableMeta> columns_;
  std::vector<std::string> tokens_;  // row-major, empty when not loaded from text
};

/// Missing-data indicator matrix: m(i, j) = 1 exactly where cell (i, j) is missing.
class MissingMask {
 public:
  using Grid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit MissingMask(Grid m);

  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  std::uint8_t operator()(Index i, Index j) const { return m_(i, j); }
  bool missing(Index i, Index j) const { return m_(i, j) != 0; }
  const Grid& grid() const { return m_; }

  Index observed_count(Index j) const;
  bool any_missing() const;
  bool row_fully_missing(Index i) const;

  friend bool operator==(const MissingMask& a, const MissingMask& b) {
    return a.m_.rows() == b.m_.rows() && a.m_.cols() == b.m_.cols() && a.m_ == b.m_;
  }

 private:
  Grid m_;
};

/// One missingness pattern: the rows sharing it and the observed flag per column.
struct Pattern {
  std::vector<Index> rows;
  std::vector<bool> observed;

  std::vector<Index> observed_indices() const;
  std::vector<Index> missing_indices() const;
  bool complete() const;
};

struct PatternSummary {
  std::vector<Pattern> patterns;  // ordered by first row of appearance
  std::optional<std::vector<Index>> monotone_order;
};

struct CsvOptions {
  std::set<std::string> missing_tokens{"", "NA"};
  std::map<std::string, VariableKind> kind_overrides;
};

DataMatrix parse_csv(const std::string& text, const CsvOptions& options = {});
DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

std::string format_csv(const DataMatrix& data);
void write_csv(const DataMatrix& data, const std::filesystem::path& path);

/// `dir/<stem>_imp<d>.csv` for imputation d (1-based).
std::filesystem::path imputation_path(const std::filesystem::path& dir, const std::string& stem, int d);

MissingMask compute_mask(const DataMatrix& data);

PatternSummary analyze_patterns(const MissingMask& mask);

/// True when every row's observed set is a prefix of `order`.
bool is_monotone_in_order(const MissingMask& mask, const std::vector<Index>& order);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace calibra
