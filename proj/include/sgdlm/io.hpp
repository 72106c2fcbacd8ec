#pragma once

// Data ingestion and the flat export schema shared with the plotting tools.
//
// Export tables are comma-separated with the header
//   t,kind,label,statistic,value
// and values written with 17 significant digits so they re-read bit-exactly.

#include "sgdlm/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sgdlm {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr int kExportSchemaVersion = 1;

enum class Transform { none, log_return };

Transform parse_transform(const std::string& name);
const char* to_string(Transform t);

struct TimeSeriesTable {
  std::vector<std::string> times;   // one per row of y
  std::vector<std::string> labels;  // one per column of y
  Matrix y;
};

/// Parses a rectangular table: header row of series labels after a leading
/// time column, then one row per period. The log-return transform drops the
/// first period. Throws IngestionError naming the row and column of ragged
/// rows, blank or non-numeric cells, and non-positive levels.
TimeSeriesTable parse_table(const std::string& text, Transform transform, const std::string& source = "<input>");

TimeSeriesTable ingest(const std::filesystem::path& path, Transform transform);

/// Reorders columns to `labels`. Throws IngestionError for a missing label.
TimeSeriesTable select_columns(const TimeSeriesTable& table, const std::vector<std::string>& labels);

/// Inverse of parse_table with Transform::none.
void write_table(const std::filesystem::path& path, const TimeSeriesTable& table);

enum class RowKind { forecast, posterior, counterfactual, marglik, factor, monitor };

const char* to_string(RowKind k);
RowKind parse_kind(const std::string& s);

struct StepRecordRow {
  std::string t;
  RowKind kind = RowKind::posterior;
  std::string label;
  std::string statistic;
  double value = 0.0;

  bool operator==(const StepRecordRow&) const = default;
};

std::string format_value(double v);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

void write_rows(std::ostream& out, const std::vector<StepRecordRow>& rows);
void write_rows(const std::filesystem::path& path, const std::vector<StepRecordRow>& rows);
std::vector<StepRecordRow> read_rows(std::istream& in);
std::vector<StepRecordRow> read_rows(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

}  // namespace sgdlm
