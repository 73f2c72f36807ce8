#include "powlab/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "powlab/errors.hpp"

namespace powlab {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

template <class T>
T parse_field(std::string_view text, std::size_t line, const std::string& column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    std::ostringstream os;
    os << "line " << line << ": cannot parse " << column << " '" << text << "'";
    throw DataError(os.str());
  }
  return value;
}

std::string list_heights(const std::vector<std::int64_t>& heights) {
  std::ostringstream os;
  for (std::size_t i = 0; i < heights.size() && i < 20; ++i) os << (i ? ", " : "") << heights[i];
  if (heights.size() > 20) os << ", ... (" << heights.size() << " total)";
  return os.str();
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const std::vector<ChainRecord>& records) {
  out << "height,timestamp,block_time,difficulty,scheduled_rate\n";
  for (const auto& r : records) {
    out << r.height << ',' << format_double(r.timestamp) << ',' << format_double(r.block_time) << ','
        << format_double(r.difficulty) << ',' << format_double(r.scheduled_rate) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<ChainRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_trace_csv(out, records);
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<ChainRecord> load_chain_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_fields(line).front().empty()) break;
  }
  if (line_no == 0 || line.empty()) throw DataError("chain CSV is empty");

  std::map<std::string, std::size_t> column;
  const auto header = split_fields(line);
  for (std::size_t i = 0; i < header.size(); ++i) column[std::string(header[i])] = i;
  for (const char* required : {"height", "timestamp", "difficulty"})
    if (!column.count(required))
      throw DataError(std::string("chain CSV header lacks column '") + required + "' (line " +
                      std::to_string(line_no) + ")");
  const auto col_height = column["height"];
  const auto col_time = column["timestamp"];
  const auto col_diff = column["difficulty"];
  const std::optional<std::size_t> col_bt =
      column.count("block_time") ? std::optional(column["block_time"]) : std::nullopt;
  const std::optional<std::size_t> col_rate =
      column.count("scheduled_rate") ? std::optional(column["scheduled_rate"]) : std::nullopt;

  std::vector<ChainRecord> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.size() == 1 && fields.front().empty()) continue;
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << "line " << line_no << ": expected " << header.size() << " fields, found " << fields.size();
      throw DataError(os.str());
    }
    ChainRecord r;
    r.height = parse_field<std::int64_t>(fields[col_height], line_no, "height");
    r.timestamp = parse_field<double>(fields[col_time], line_no, "timestamp");
    r.difficulty = parse_field<double>(fields[col_diff], line_no, "difficulty");
    if (col_bt) r.block_time = parse_field<double>(fields[*col_bt], line_no, "block_time");
    if (col_rate) r.scheduled_rate = parse_field<double>(fields[*col_rate], line_no, "scheduled_rate");
    if (!(r.difficulty > 0.0) || !std::isfinite(r.timestamp)) {
      std::ostringstream os;
      os << "line " << line_no << ": difficulty must be > 0 and timestamp finite";
      throw DataError(os.str());
    }
    rows.push_back(r);
  }

  std::vector<std::int64_t> gaps;
  std::vector<std::int64_t> backwards;
  std::vector<std::int64_t> inconsistent;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].height != rows[i - 1].height + 1) gaps.push_back(rows[i].height);
    if (rows[i].timestamp < rows[i - 1].timestamp) backwards.push_back(rows[i].height);
    if (col_bt) {
      const double diff = rows[i].timestamp - rows[i - 1].timestamp;
      const double tol = 1e-9 * std::max(1.0, std::abs(rows[i].timestamp));
      if (std::abs(diff - rows[i].block_time) > tol) inconsistent.push_back(rows[i].height);
    }
  }
  if (!gaps.empty()) throw DataError("heights are not contiguous at: " + list_heights(gaps));
  if (!backwards.empty()) throw DataError("timestamps decrease at heights: " + list_heights(backwards));
  if (!inconsistent.empty())
    throw DataError("block_time disagrees with timestamp difference at heights: " + list_heights(inconsistent));

  if (col_bt) {
    for (const auto& r : rows)
      if (r.block_time < 0.0) throw DataError("negative block_time at height " + std::to_string(r.height));
    return rows;
  }
  std::vector<ChainRecord> out;
  out.reserve(rows.empty() ? 0 : rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ChainRecord r = rows[i];
    r.block_time = rows[i].timestamp - rows[i - 1].timestamp;
    out.push_back(r);
  }
  return out;
}

std::vector<ChainRecord> load_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open chain CSV " + path.string());
  return load_chain_csv(in);
}

void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("write_columns_csv: header/column mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << format_double(columns[c][r]);
    out << '\n';
  }
}

}  // namespace powlab
