#include "sgdlm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgdlm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

Transform parse_transform(const std::string& name) {
  if (name == "none") return Transform::none;
  if (name == "log-return") return Transform::log_return;
  throw ConfigError("unknown transform '" + name + "' (expected none or log-return)");
}

const char* to_string(Transform t) { return t == Transform::none ? "none" : "log-return"; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

TimeSeriesTable parse_table(const std::string& text, Transform transform, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IngestionError(source + ": empty table");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2) throw IngestionError(source + ": header needs a time column and at least one series");
  TimeSeriesTable raw;
  for (std::size_t c = 1; c < header.size(); ++c) {
    auto label = trim(header[c]);
    if (label.empty()) throw IngestionError(source + ": row 1, column " + std::to_string(c + 1) + ": empty label");
    raw.labels.push_back(label);
  }
  const auto q = static_cast<Eigen::Index>(raw.labels.size());
  raw.y.resize(static_cast<Eigen::Index>(lines.size() - 1), q);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = source + ": row " + std::to_string(r + 1);
    if (cells.size() != header.size())
      throw IngestionError(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
    raw.times.push_back(trim(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      const std::string at = where + ", column " + std::to_string(c + 1) + " (" + raw.labels[c - 1] + ")";
      if (cell.empty()) throw IngestionError(at + ": missing value");
      double v = 0.0;
      if (!parse_double(cell, v) || !std::isfinite(v)) throw IngestionError(at + ": not a number: '" + cell + "'");
      raw.y(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) = v;
    }
  }
  if (transform == Transform::none) return raw;

  if (raw.y.rows() < 2) throw IngestionError(source + ": log returns need at least two periods");
  TimeSeriesTable out;
  out.labels = raw.labels;
  out.times.assign(raw.times.begin() + 1, raw.times.end());
  out.y.resize(raw.y.rows() - 1, q);
  for (Eigen::Index r = 0; r < raw.y.rows(); ++r)
    for (Eigen::Index c = 0; c < q; ++c)
      if (!(raw.y(r, c) > 0.0))
        throw IngestionError(source + ": row " + std::to_string(r + 2) + ", column " + std::to_string(c + 2) + " (" +
                             raw.labels[static_cast<std::size_t>(c)] + "): log returns need positive levels");
  for (Eigen::Index r = 1; r < raw.y.rows(); ++r)
    for (Eigen::Index c = 0; c < q; ++c) out.y(r - 1, c) = std::log(raw.y(r, c) / raw.y(r - 1, c));
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TimeSeriesTable ingest(const std::filesystem::path& path, Transform transform) {
  return parse_table(read_text(path), transform, path.string());
}

TimeSeriesTable select_columns(const TimeSeriesTable& table, const std::vector<std::string>& labels) {
  TimeSeriesTable out;
  out.times = table.times;
  out.labels = labels;
  out.y.resize(table.y.rows(), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    auto it = std::find(table.labels.begin(), table.labels.end(), labels[j]);
    if (it == table.labels.end()) throw IngestionError("data has no column '" + labels[j] + "'");
    out.y.col(static_cast<Eigen::Index>(j)) = table.y.col(it - table.labels.begin());
  }
  return out;
}

void write_table(const std::filesystem::path& path, const TimeSeriesTable& table) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "t";
  for (const auto& l : table.labels) out << ',' << quote(l);
  out << '\n';
  for (Eigen::Index r = 0; r < table.y.rows(); ++r) {
    out << quote(table.times.at(static_cast<std::size_t>(r)));
    for (Eigen::Index c = 0; c < table.y.cols(); ++c) out << ',' << format_value(table.y(r, c));
    out << '\n';
  }
}

const char* to_string(RowKind k) {
  switch (k) {
    case RowKind::forecast: return "forecast";
    case RowKind::posterior: return "posterior";
    case RowKind::counterfactual: return "counterfactual";
    case RowKind::marglik: return "marglik";
    case RowKind::factor: return "factor";
    case RowKind::monitor: return "monitor";
  }
  return "?";
}

RowKind parse_kind(const std::string& s) {
  for (auto k : {RowKind::forecast, RowKind::posterior, RowKind::counterfactual, RowKind::marglik, RowKind::factor,
                 RowKind::monitor})
    if (s == to_string(k)) return k;
  throw IngestionError("unknown row kind '" + s + "'");
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_rows(std::ostream& out, const std::vector<StepRecordRow>& rows) {
  out << "t,kind,label,statistic,value\n";
  for (const auto& r : rows)
    out << quote(r.t) << ',' << to_string(r.kind) << ',' << quote(r.label) << ',' << quote(r.statistic) << ','
        << format_value(r.value) << '\n';
}

void write_rows(const std::filesystem::path& path, const std::vector<StepRecordRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  write_rows(out, rows);
}

std::vector<StepRecordRow> read_rows(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  const auto lines = lines_of(ss.str());
  if (lines.empty() || lines[0] != "t,kind,label,statistic,value")
    throw IngestionError("export table: bad or missing header");
  std::vector<StepRecordRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != 5)
      throw IngestionError("export table: row " + std::to_string(i + 1) + ": expected 5 cells, found " +
                           std::to_string(cells.size()));
    StepRecordRow r{cells[0], parse_kind(cells[1]), cells[2], cells[3], 0.0};
    if (cells[4] == "nan") {
      r.value = std::nan("");
    } else if (cells[4] == "inf" || cells[4] == "-inf") {
      r.value = cells[4][0] == '-' ? -HUGE_VAL : HUGE_VAL;
    } else if (!parse_double(cells[4], r.value)) {
      throw IngestionError("export table: row " + std::to_string(i + 1) + ", column 5: not a number: '" + cells[4] +
                           "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<StepRecordRow> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return read_rows(in);
}

}  // namespace sgdlm
