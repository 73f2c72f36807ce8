#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "powlab/chain_sim.hpp"

namespace powlab {

/// 17 significant digits; parses back to the identical double.
std::string format_double(double value);

/// Header `height,timestamp,block_time,difficulty,scheduled_rate`.
void write_trace_csv(std::ostream& out, const std::vector<ChainRecord>& records);
void write_trace_csv(const std::filesystem::path& path, const std::vector<ChainRecord>& records);

/// Read a chain CSV. Required columns: height, timestamp, difficulty (any
/// order). When a block_time column is present it is used and checked against
/// the timestamp differences; otherwise block times are derived from
/// consecutive timestamps and the first row, whose block time is undefined, is
/// dropped. An optional scheduled_rate column is carried through.
///
/// Throws DataError naming the line for malformed rows, and listing the
/// offending heights for non-monotone timestamps or non-contiguous heights.
std::vector<ChainRecord> load_chain_csv(std::istream& in);
std::vector<ChainRecord> load_chain_csv(const std::filesystem::path& path);

/// Plot-ready table: one header line and equally long numeric columns.
void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

}  // namespace powlab
