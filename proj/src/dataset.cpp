#include "calibra/dataset.hpp"

#include "calibra/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace calibra {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw InputError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

bool parse_number(const std::string& token, double& out) {
  std::string_view s(token);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

const char* to_string(VariableKind kind) {
  return kind == VariableKind::binary ? "binary" : "continuous";
}

VariableKind parse_variable_kind(const std::string& text) {
  if (text == "binary") return VariableKind::binary;
  if (text == "continuous") return VariableKind::continuous;
  throw InputError("unknown variable kind '" + text + "'");
}

// ---------------------------------------------------------------------------
// DataMatrix

DataMatrix::DataMatrix(Eigen::MatrixXd values, std::vector<VariableMeta> columns)
    : values_(std::move(values)), columns_(std::move(columns)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw PreconditionError("data matrix needs at least one row and one column");
  if (static_cast<Index>(columns_.size()) != values_.cols())
    throw PreconditionError("column metadata does not match data width");
  std::set<std::string> seen;
  for (const auto& c : columns_)
    if (!seen.insert(c.name).second) throw InputError("duplicate column name '" + c.name + "'");
  for (Index j = 0; j < cols(); ++j) {
    for (Index i = 0; i < rows(); ++i) {
      const double v = values_(i, j);
      if (std::isinf(v)) throw InputError("infinite value in column '" + columns_[j].name + "'");
      if (columns_[j].kind == VariableKind::binary && !std::isnan(v) && v != 0.0 && v != 1.0)
        throw InputError("binary column '" + columns_[j].name + "' has a value outside {0,1}");
    }
  }
}

bool DataMatrix::is_missing(Index i, Index j) const { return std::isnan(values_(i, j)); }

bool DataMatrix::has_missing() const { return missing_count() > 0; }

Index DataMatrix::missing_count() const {
  return static_cast<Index>(values_.array().isNaN().count());
}

std::vector<std::string> DataMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

std::optional<Index> DataMatrix::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].name == name) return static_cast<Index>(j);
  return std::nullopt;
}

const std::string* DataMatrix::source_token(Index i, Index j) const {
  if (tokens_.empty() || is_missing(i, j)) return nullptr;
  const auto& t = tokens_[static_cast<std::size_t>(i * cols() + j)];
  return t.empty() ? nullptr : &t;
}

void DataMatrix::set_source_tokens(std::vector<std::string> tokens) {
  if (!tokens.empty() && static_cast<Index>(tokens.size()) != rows() * cols())
    throw PreconditionError("token grid does not match data shape");
  tokens_ = std::move(tokens);
}

DataMatrix DataMatrix::completed_with(const Eigen::MatrixXd& filled) const {
  if (filled.rows() != rows() || filled.cols() != cols())
    throw PreconditionError("completed matrix shape mismatch");
  for (Index j = 0; j < cols(); ++j) {
    for (Index i = 0; i < rows(); ++i) {
      const double v = filled(i, j);
      if (!std::isfinite(v)) throw PreconditionError("completed matrix has a non-finite cell");
      if (!is_missing(i, j) && v != values_(i, j))
        throw PreconditionError("completed matrix alters an observed cell");
    }
  }
  DataMatrix out(filled, columns_);
  if (!tokens_.empty()) {
    std::vector<std::string> tokens = tokens_;
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        if (is_missing(i, j)) tokens[static_cast<std::size_t>(i * cols() + j)].clear();
    out.tokens_ = std::move(tokens);
  }
  return out;
}

DataMatrix DataMatrix::select_columns(const std::vector<Index>& order) const {
  Eigen::MatrixXd v(rows(), static_cast<Index>(order.size()));
  std::vector<VariableMeta> meta;
  for (std::size_t c = 0; c < order.size(); ++c) {
    if (order[c] < 0 || order[c] >= cols()) throw PreconditionError("column index out of range");
    v.col(static_cast<Index>(c)) = values_.col(order[c]);
    meta.push_back(columns_[static_cast<std::size_t>(order[c])]);
  }
  DataMatrix out(std::move(v), std::move(meta));
  if (!tokens_.empty()) {
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(rows()) * order.size());
    for (Index i = 0; i < rows(); ++i)
      for (Index j : order) tokens.push_back(tokens_[static_cast<std::size_t>(i * cols() + j)]);
    out.tokens_ = std::move(tokens);
  }
  return out;
}

// ---------------------------------------------------------------------------
// MissingMask

MissingMask::MissingMask(Grid m) : m_(std::move(m)) {
  for (Index j = 0; j < m_.cols(); ++j)
    for (Index i = 0; i < m_.rows(); ++i)
      if (m_(i, j) > 1) throw PreconditionError("mask entries must be 0 or 1");
}

Index MissingMask::observed_count(Index j) const {
  Index n = 0;
  for (Index i = 0; i < m_.rows(); ++i) n += m_(i, j) == 0;
  return n;
}

bool MissingMask::any_missing() const {
  for (Index j = 0; j < m_.cols(); ++j)
    for (Index i = 0; i < m_.rows(); ++i)
      if (m_(i, j)) return true;
  return false;
}

bool MissingMask::row_fully_missing(Index i) const {
  for (Index j = 0; j < m_.cols(); ++j)
    if (!m_(i, j)) return false;
  return true;
}

std::vector<Index> Pattern::observed_indices() const {
  std::vector<Index> idx;
  for (std::size_t j = 0; j < observed.size(); ++j)
    if (observed[j]) idx.push_back(static_cast<Index>(j));
  return idx;
}

std::vector<Index> Pattern::missing_indices() const {
  std::vector<Index> idx;
  for (std::size_t j = 0; j < observed.size(); ++j)
    if (!observed[j]) idx.push_back(static_cast<Index>(j));
  return idx;
}

bool Pattern::complete() const {
  return std::all_of(observed.begin(), observed.end(), [](bool b) { return b; });
}

// ---------------------------------------------------------------------------
// CSV

DataMatrix parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> header;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
      header = split_record(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_record(line);
    if (fields.size() != header.size())
      throw InputError("ragged row at line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    records.push_back(std::move(fields));
  }
  if (!have_header) throw InputError("CSV has no header row");
  if (records.empty()) throw InputError("CSV has no data rows");

  const auto n = static_cast<Index>(records.size());
  const auto k = static_cast<Index>(header.size());
  Eigen::MatrixXd values(n, k);
  std::vector<std::string> tokens(static_cast<std::size_t>(n * k));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      auto& tok = records[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (options.missing_tokens.count(tok)) {
        values(i, j) = kMissing;
        continue;
      }
      double v = 0.0;
      if (!parse_number(tok, v))
        throw InputError("non-numeric cell '" + tok + "' at row " + std::to_string(i + 1) +
                         ", column '" + header[static_cast<std::size_t>(j)] + "'");
      values(i, j) = v;
      tokens[static_cast<std::size_t>(i * k + j)] = std::move(tok);
    }
  }

  std::vector<VariableMeta> meta;
  for (Index j = 0; j < k; ++j) {
    const auto& name = header[static_cast<std::size_t>(j)];
    VariableMeta m{name, VariableKind::continuous};
    if (auto it = options.kind_overrides.find(name); it != options.kind_overrides.end()) {
      m.kind = it->second;
    } else {
      Index n_obs = 0;
      bool zero_one = true;
      for (Index i = 0; i < n; ++i) {
        const double v = values(i, j);
        if (std::isnan(v)) continue;
        ++n_obs;
        zero_one = zero_one && (v == 0.0 || v == 1.0);
      }
      if (n_obs > 0 && zero_one) m.kind = VariableKind::binary;
    }
    meta.push_back(std::move(m));
  }
  for (const auto& [name, kind] : options.kind_overrides) {
    if (std::none_of(meta.begin(), meta.end(), [&](const VariableMeta& m) { return m.name == name; }))
      throw InputError("kind override names unknown column '" + name + "'");
  }

  DataMatrix data(std::move(values), std::move(meta));
  data.set_source_tokens(std::move(tokens));
  return data;
}

DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_csv(const DataMatrix& data) {
  std::string out;
  for (Index j = 0; j < data.cols(); ++j) {
    if (j) out.push_back(',');
    out += quote_if_needed(data.column(j).name);
  }
  out.push_back('\n');
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) {
      if (j) out.push_back(',');
      if (data.is_missing(i, j)) {
        out += "NA";
      } else if (const auto* tok = data.source_token(i, j)) {
        out += *tok;
      } else {
        out += format_double(data(i, j));
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const DataMatrix& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << format_csv(data);
}

std::filesystem::path imputation_path(const std::filesystem::path& dir, const std::string& stem, int d) {
  return dir / (stem + "_imp" + std::to_string(d) + ".csv");
}

// ---------------------------------------------------------------------------
// Mask and patterns

MissingMask compute_mask(const DataMatrix& data) {
  MissingMask::Grid m(data.rows(), data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i) m(i, j) = data.is_missing(i, j) ? 1 : 0;
  return MissingMask(std::move(m));
}

bool is_monotone_in_order(const MissingMask& mask, const std::vector<Index>& order) {
  for (Index i = 0; i < mask.rows(); ++i) {
    bool seen_missing = false;
    for (Index j : order) {
      if (mask.missing(i, j)) seen_missing = true;
      else if (seen_missing) return false;
    }
  }
  return true;
}

PatternSummary analyze_patterns(const MissingMask& mask) {
  PatternSummary summary;
  std::map<std::vector<bool>, std::size_t> index;
  for (Index i = 0; i < mask.rows(); ++i) {
    std::vector<bool> observed(static_cast<std::size_t>(mask.cols()));
    for (Index j = 0; j < mask.cols(); ++j) observed[static_cast<std::size_t>(j)] = !mask.missing(i, j);
    auto [it, inserted] = index.try_emplace(observed, summary.patterns.size());
    if (inserted) summary.patterns.push_back(Pattern{{}, observed});
    summary.patterns[it->second].rows.push_back(i);
  }

  std::vector<Index> order(static_cast<std::size_t>(mask.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<Index> counts(order.size());
  for (Index j = 0; j < mask.cols(); ++j) counts[static_cast<std::size_t>(j)] = mask.observed_count(j);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  if (is_monotone_in_order(mask, order)) summary.monotone_order = std::move(order);
  return summary;
}

}  // namespace calibra
