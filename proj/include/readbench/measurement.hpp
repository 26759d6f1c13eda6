#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace readbench {

struct LatencySample {
  std::uint64_t duration_us = 0;
  std::uint64_t bytes = 0;
};

/// Aggregate statistics over one run, microseconds.
struct LatencyStats {
  std::uint64_t count = 0;
  std::uint64_t min_us = 0;
  std::uint64_t max_us = 0;
  double mean_us = 0.0;
  std::uint64_t p99_us = 0;
  std::uint64_t p999_us = 0;

  bool operator==(const LatencyStats&) const = default;
};

/// Nearest-rank percentile on an ascending range: the k-th smallest value with
/// k = ceil(numerator / denominator * n), computed in integers.
std::uint64_t nearest_rank(std::span<const std::uint64_t> sorted, std::uint64_t numerator,
                           std::uint64_t denominator);

/// Throws EmptySampleSet on empty input.
LatencyStats aggregate_latencies(std::span<const LatencySample> samples);

/// Decimal megabytes per second. Throws InvalidInterval unless elapsed > 0.
double compute_throughput(std::uint64_t total_bytes, double elapsed_seconds);

/// Point-in-time CPU-time totals, seconds.
struct CpuTimes {
  double process = 0.0;
  double external = 0.0;
};

struct CpuUsage {
  double process_cpu = 0.0;
  double external_cpu = 0.0;
  double wall = 0.0;
  double percent_of_core = 0.0;

  static CpuUsage from(double process_cpu, double external_cpu, double wall);
  bool operator==(const CpuUsage&) const = default;
};

/// Throws ClockError if any component of `after` is below `before`, and
/// InvalidInterval unless wall > 0.
CpuUsage measure_cpu(const CpuTimes& before, const CpuTimes& after, double wall_seconds);

/// Default external-thread predicate: ring submission poller threads, named
/// "io_uring-sq" on older kernels and "iou-sqp-<pid>" on newer ones.
bool is_kernel_poll_thread(std::string_view name);

/// Reader over a /proc-style process table. The root is configurable so tests
/// can point it at a synthetic fixture.
class ProcessTable {
 public:
  struct Task {
    int pid = 0;
    int tid = 0;
    std::string name;
    std::uint64_t ticks = 0;  // utime + stime
  };

  explicit ProcessTable(std::filesystem::path root = "/proc", long ticks_per_second = 0);

  std::vector<Task> tasks() const;

  /// Process CPU of `pid` excluding its own threads that match `external`,
  /// plus CPU of every matching thread system-wide.
  CpuTimes snapshot(const std::function<bool(std::string_view)>& external, int pid = 0) const;

  long ticks_per_second() const noexcept { return ticks_per_second_; }

 private:
  std::filesystem::path root_;
  long ticks_per_second_;
};

/// Collects samples for one worker. With a nonzero reservoir capacity it keeps
/// a uniform random subset of that size instead of every sample.
class SampleRecorder {
 public:
  explicit SampleRecorder(std::size_t reservoir_capacity = 0, std::uint64_t seed = 0);

  void record(const LatencySample& sample);
  std::span<const LatencySample> samples() const noexcept { return samples_; }
  std::uint64_t seen() const noexcept { return seen_; }
  std::uint64_t total_bytes() const noexcept { return total_bytes_; }

 private:
  std::size_t capacity_;
  std::vector<LatencySample> samples_;
  std::uint64_t seen_ = 0;
  std::uint64_t total_bytes_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace readbench
