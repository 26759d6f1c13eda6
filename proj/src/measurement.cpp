#include "readbench/measurement.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "readbench/errors.hpp"

namespace readbench {

std::uint64_t nearest_rank(std::span<const std::uint64_t> sorted, std::uint64_t numerator,
                           std::uint64_t denominator) {
  if (sorted.empty()) throw EmptySampleSet();
  const auto n = static_cast<unsigned __int128>(sorted.size());
  auto k = static_cast<std::uint64_t>((n * numerator + denominator - 1) / denominator);
  k = std::clamp<std::uint64_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

LatencyStats aggregate_latencies(std::span<const LatencySample> samples) {
  if (samples.empty()) throw EmptySampleSet();
  std::vector<std::uint64_t> durations(samples.size());
  std::transform(samples.begin(), samples.end(), durations.begin(),
                 [](const LatencySample& s) { return s.duration_us; });
  std::sort(durations.begin(), durations.end());

  // Sum of sorted values keeps the mean independent of input order.
  long double sum = 0;
  for (auto d : durations) sum += d;

  LatencyStats stats;
  stats.count = durations.size();
  stats.min_us = durations.front();
  stats.max_us = durations.back();
  stats.mean_us = static_cast<double>(sum / durations.size());
  stats.p99_us = nearest_rank(durations, 99, 100);
  stats.p999_us = nearest_rank(durations, 999, 1000);
  return stats;
}

double compute_throughput(std::uint64_t total_bytes, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0))
    throw InvalidInterval("throughput interval must be positive, got " +
                          std::to_string(elapsed_seconds));
  return static_cast<double>(total_bytes) / elapsed_seconds / 1e6;
}

CpuUsage CpuUsage::from(double process_cpu, double external_cpu, double wall) {
  CpuUsage usage;
  usage.process_cpu = process_cpu;
  usage.external_cpu = external_cpu;
  usage.wall = wall;
  usage.percent_of_core = wall > 0.0 ? 100.0 * (process_cpu + external_cpu) / wall : 0.0;
  return usage;
}

CpuUsage measure_cpu(const CpuTimes& before, const CpuTimes& after, double wall_seconds) {
  if (after.process < before.process || after.external < before.external)
    throw ClockError("cpu time went backwards between snapshots");
  if (!(wall_seconds > 0.0)) throw InvalidInterval("wall interval must be positive");
  return CpuUsage::from(after.process - before.process, after.external - before.external,
                        wall_seconds);
}

bool is_kernel_poll_thread(std::string_view name) {
  return name.starts_with("io_uring-sq") || name.starts_with("iou-sqp-");
}

namespace {

struct StatLine {
  std::string name;
  std::uint64_t ticks = 0;
};

// Format: "pid (comm) state ppid ..."; comm may itself contain spaces and
// parentheses, so split at the last ')'.
std::optional<StatLine> read_stat(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  const auto open = line.find('(');
  const auto close = line.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    return std::nullopt;
  StatLine out;
  out.name = line.substr(open + 1, close - open - 1);
  std::istringstream rest(line.substr(close + 1));
  std::vector<std::string> fields;
  for (std::string tok; rest >> tok;) fields.push_back(std::move(tok));
  // fields[0] is field 3 (state); utime is field 14, stime field 15.
  if (fields.size() < 13) return std::nullopt;
  try {
    out.ticks = std::stoull(fields[11]) + std::stoull(fields[12]);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return out;
}

std::optional<int> numeric_name(const std::filesystem::path& p) {
  const auto s = p.filename().string();
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return std::stoi(s);
}

}  // namespace

ProcessTable::ProcessTable(std::filesystem::path root, long ticks_per_second)
    : root_(std::move(root)),
      ticks_per_second_(ticks_per_second > 0 ? ticks_per_second : ::sysconf(_SC_CLK_TCK)) {}

std::vector<ProcessTable::Task> ProcessTable::tasks() const {
  std::vector<Task> out;
  std::error_code ec;
  for (const auto& proc : std::filesystem::directory_iterator(root_, ec)) {
    const auto pid = numeric_name(proc.path());
    if (!pid) continue;
    std::error_code tec;
    for (const auto& task : std::filesystem::directory_iterator(proc.path() / "task", tec)) {
      const auto tid = numeric_name(task.path());
      if (!tid) continue;
      if (auto st = read_stat(task.path() / "stat"))
        out.push_back({*pid, *tid, std::move(st->name), st->ticks});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Task& a, const Task& b) { return a.tid < b.tid; });
  return out;
}

CpuTimes ProcessTable::snapshot(const std::function<bool(std::string_view)>& external,
                                int pid) const {
  if (pid == 0) pid = static_cast<int>(::getpid());
  const double tick = 1.0 / static_cast<double>(ticks_per_second_);

  std::uint64_t own_ticks = 0;
  if (auto st = read_stat(root_ / std::to_string(pid) / "stat")) own_ticks = st->ticks;

  std::uint64_t external_ticks = 0;
  std::uint64_t own_external_ticks = 0;
  for (const auto& t : tasks()) {
    if (!external(t.name)) continue;
    external_ticks += t.ticks;
    if (t.pid == pid) own_external_ticks += t.ticks;
  }
  CpuTimes times;
  times.process = static_cast<double>(own_ticks - std::min(own_ticks, own_external_ticks)) * tick;
  times.external = static_cast<double>(external_ticks) * tick;
  return times;
}

SampleRecorder::SampleRecorder(std::size_t reservoir_capacity, std::uint64_t seed)
    : capacity_(reservoir_capacity), rng_(seed) {
  if (capacity_ > 0) samples_.reserve(capacity_);
}

void SampleRecorder::record(const LatencySample& sample) {
  ++seen_;
  total_bytes_ += sample.bytes;
  if (capacity_ == 0 || samples_.size() < capacity_) {
    samples_.push_back(sample);
    return;
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, seen_ - 1);
  if (const auto j = pick(rng_); j < capacity_) samples_[j] = sample;
}

}  // namespace readbench
