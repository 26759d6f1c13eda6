#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "readbench/engines.hpp"

namespace readbench {

/// Version written to every stored line.
inline constexpr int kStoreSchemaVersion = 1;

/// One JSON object, no trailing newline. Fields of `extra_json` are merged in
/// at the top level.
std::string record_to_json(const RunRecord& record);

/// Throws ConfigError on malformed input. Unknown top-level fields are kept
/// in extra_json.
RunRecord record_from_json(std::string_view line);

struct ReadResult {
  std::vector<RunRecord> records;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // "line N: reason"
};

/// Appends one line per record; each line is written with a single write so
/// concurrent readers never see half a record. Throws IoError.
void write_records(const std::filesystem::path& store, std::span<const RunRecord> records);

/// Reads every parseable line; corrupt lines are skipped and reported.
/// A missing store reads as empty.
ReadResult read_records(const std::filesystem::path& store);
ReadResult read_records(std::istream& in);

struct ScatterOptions {
  /// Budget for choosing the enlarged best point of each block size.
  double p999_budget_us = std::numeric_limits<double>::infinity();
  int width = 960;
  int height = 600;
  std::string title = "Throughput vs 99.9th percentile latency";
};

/// One plotted point, in record order.
struct ScatterPoint {
  std::size_t record = 0;
  std::string label;
  std::uint64_t block_size = 0;
  double throughput_mbps = 0.0;
  std::uint64_t p999_us = 0;
  double cpu_percent = 0.0;
  std::string shape;  // circle, square, triangle, diamond, down, hexagon
  std::string fill;   // #rrggbb
  bool best = false;
};

/// Shapes follow ascending block size; shades follow CPU use on a 0..400%
/// scale. Best points come from select_best within each block size.
std::vector<ScatterPoint> scatter_points(std::span<const RunRecord> records,
                                         const ScatterOptions& options = {});

/// Standalone SVG: x is throughput in MB/s, y is p99.9 in microseconds on a
/// log scale. Byte-identical for identical input. Throws ConfigError on empty
/// input.
std::string scatter_summary(std::span<const RunRecord> records, const ScatterOptions& options = {});

/// CSV of the plotted points, for re-rendering elsewhere.
std::string scatter_points_csv(std::span<const RunRecord> records, const ScatterOptions& options = {});

/// CSV with columns block_size,label,count,min_us,mean_us,p99_us,p999_us,
/// max_us,throughput_mbps; rows sorted by block size, then label.
std::string latency_table(std::span<const RunRecord> records);

/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace readbench
