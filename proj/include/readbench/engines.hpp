#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readbench/config.hpp"
#include "readbench/fill.hpp"
#include "readbench/label.hpp"
#include "readbench/measurement.hpp"
#include "readbench/target.hpp"

namespace readbench {

/// What to read. Exactly one of `duration_s` and `request_budget` is set.
/// Simulated targets interpret every time in simulated seconds.
struct WorkloadSpec {
  explicit WorkloadSpec(Target t) : target(std::move(t)) {}

  Target target;
  AccessPattern pattern = AccessPattern::Random;
  std::uint64_t block_size = 4096;
  std::uint32_t threads = 1;
  double warmup_s = 5.0;
  std::optional<double> duration_s = 60.0;
  /// Measured requests in total, split evenly across workers.
  std::optional<std::uint64_t> request_budget;
  std::uint64_t seed = 1;
  bool verify = false;
  /// First block of a sequential stream; random streams ignore it.
  std::uint64_t start_offset = 0;
  /// Nonzero keeps a uniform reservoir of this many samples per worker.
  std::size_t reservoir = 0;

  /// Switches to budget mode.
  WorkloadSpec& with_requests(std::uint64_t n) {
    request_budget = n;
    duration_s.reset();
    return *this;
  }
  WorkloadSpec& with_duration(double seconds) {
    duration_s = seconds;
    request_budget.reset();
    return *this;
  }

  /// Throws ConfigError.
  void validate(const EngineConfig& engine) const;
};

/// Serializable summary of a WorkloadSpec.
struct WorkloadInfo {
  std::string target;
  std::uint64_t capacity = 0;
  bool direct = false;
  AccessPattern pattern = AccessPattern::Random;
  std::uint64_t block_size = 0;
  std::uint32_t threads = 1;
  double warmup_s = 0.0;
  std::optional<double> duration_s;
  std::optional<std::uint64_t> request_budget;
  std::uint64_t seed = 0;
  bool verify = false;
  std::uint64_t start_offset = 0;

  static WorkloadInfo from(const WorkloadSpec& spec);
  bool operator==(const WorkloadInfo&) const = default;
};

/// Counters gathered while running; used to check engine invariants.
struct RunDiagnostics {
  std::uint64_t requests = 0;          // measured
  std::uint64_t warmup_requests = 0;
  std::uint64_t bytes = 0;             // measured
  /// Order-independent sum of block_hash over every block read, when verifying.
  std::uint64_t checksum = 0;
  std::uint64_t blocks_verified = 0;
  std::uint32_t peak_outstanding = 0;  // per worker
  std::uint64_t harvests = 0;
  /// Smallest harvest outside the final drain; 0 when there were none.
  std::uint64_t min_harvest = 0;
  std::uint64_t stalls = 0;
  std::uint64_t polled_fallbacks = 0;
  bool partial = false;

  bool operator==(const RunDiagnostics&) const = default;
};

struct RunRecord {
  WorkloadInfo workload;
  EngineConfig engine;
  double throughput_mbps = 0.0;
  LatencyStats latency;
  CpuUsage cpu;
  std::string label;
  std::string started_at;
  std::string notes;
  RunDiagnostics diagnostics;
  /// Fields of a stored record this version does not know, as a JSON object.
  std::string extra_json;

  bool operator==(const RunRecord&) const = default;
};

struct CompletionEvent {
  std::uint32_t worker = 0;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  std::int64_t submit_ns = 0;
  std::int64_t complete_ns = 0;  // observed at harvest
  bool measured = false;
};

/// Modeled host CPU cost for simulated runs, where no real CPU is spent.
struct SimCpuCosts {
  double syscall_us = 1.5;
  double per_request_us = 1.0;
  double fixed_file_saving_us = 0.2;
  double fixed_buffer_saving_us = 0.3;
};

struct RunOptions {
  /// Called for every completed request, in harvest order per worker.
  std::function<void(const CompletionEvent&)> observer;
  SimCpuCosts sim_cpu;
  /// Run a thread pool instead when an async interface cannot be set up.
  bool fallback_to_sync = false;
  std::chrono::milliseconds harvest_timeout{1000};
};

/// SyncRead or PolledRead on one thread.
RunRecord run_sync(const WorkloadSpec& workload, const EngineConfig& engine = {},
                   const RunOptions& options = {});
RunRecord run_threadpool(const WorkloadSpec& workload, const RunOptions& options = {});
RunRecord run_kernel_async(const WorkloadSpec& workload, const EngineConfig& engine,
                           const RunOptions& options = {});
RunRecord run_ring(const WorkloadSpec& workload, const EngineConfig& engine,
                   const RunOptions& options = {});

/// Dispatches on engine.kind.
RunRecord run(const WorkloadSpec& workload, const EngineConfig& engine,
              const RunOptions& options = {});

/// Submits all `offsets` at once, waits for every completion and records the
/// makespan; one sample per repetition of the workload's budget or duration.
/// Requires an async engine with queue_size >= offsets.size().
LatencyStats read_scattered(const WorkloadSpec& workload, const EngineConfig& engine,
                            std::span<const std::uint64_t> offsets);

/// As read_scattered, drawing `blocks` fresh random block offsets per request
/// from the workload seed.
LatencyStats read_scattered_random(const WorkloadSpec& workload, const EngineConfig& engine,
                                   std::size_t blocks);

struct EngineSupport {
  std::string name;
  bool supported = false;
  std::string detail;
};

/// Probes the kernel interfaces behind each engine and ring feature.
std::vector<EngineSupport> probe_engines();

/// Per-worker offset stream: uniform random block indices from
/// SplitMix64(seed + worker), or consecutive blocks wrapping at capacity.
class OffsetStream {
 public:
  OffsetStream(AccessPattern pattern, std::uint64_t capacity, std::uint64_t block,
               std::uint64_t seed, std::uint64_t start_offset = 0);

  std::uint64_t next();

 private:
  AccessPattern pattern_;
  std::uint64_t block_;
  std::uint64_t blocks_;
  std::uint64_t cursor_;
  SplitMix64 rng_;
};

}  // namespace readbench
