#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "readbench/devicesim.hpp"
#include "readbench/engines.hpp"

namespace readbench {

/// The parameter a plan varies.
enum class SweepAxis { BlockSize, Threads, QueueSize, BatchSize, Offset };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view s);

/// One run per value (times `repeat`), everything else taken from the base
/// workload and engine. Offset plans run sequential streams starting at each
/// value, which samples throughput across the device.
struct ExperimentPlan {
  explicit ExperimentPlan(WorkloadSpec workload) : base_workload(std::move(workload)) {}

  std::string name;
  SweepAxis axis = SweepAxis::BlockSize;
  std::vector<std::uint64_t> values;
  WorkloadSpec base_workload;
  EngineConfig base_engine;
  std::uint32_t repeat = 1;

  /// Throws ConfigError.
  void validate() const;

  /// Workload and engine of one point; repetition r perturbs the seed by r.
  std::pair<WorkloadSpec, EngineConfig> point(std::uint64_t value, std::uint32_t repetition) const;
};

struct PlanError {
  std::size_t value_index = 0;
  std::uint64_t value = 0;
  std::uint32_t repetition = 0;
  std::string message;
};

struct PlanResult {
  std::vector<RunRecord> records;
  std::vector<PlanError> errors;
};

/// Runs every point strictly in order. A failing run is recorded in `errors`
/// and the plan continues. `on_record` sees each record as soon as it exists.
PlanResult run_plan(const ExperimentPlan& plan, const RunOptions& options = {},
                    const std::function<void(const RunRecord&)>& on_record = {});

/// Throughput of a full sequential pass, in fixed time windows.
struct ScanTimeline {
  double window_s = 0.0;
  /// MB/s per window; the last window may be shorter and is divided by its
  /// own length.
  std::vector<double> mbps;
  std::uint64_t total_bytes = 0;
  double elapsed_s = 0.0;
};

/// Reads the whole target once with synchronous sequential reads. Each
/// request's bytes are spread evenly over its submit-to-completion interval.
ScanTimeline whole_scan(const Target& target, std::uint64_t block, double window_s,
                        std::uint64_t seed = 1);

struct BestConfigRow {
  DeviceKind device = DeviceKind::NvmeSsd;
  std::uint32_t threads = 1;
  std::uint32_t queue_size = 1;
  std::uint32_t batch_size = 1;

  bool operator==(const BestConfigRow&) const = default;
};

struct BestConfigTable {
  EngineKind engine = EngineKind::KernelAsyncQueue;
  bool kernel_poll = false;
  /// Ultra-low-latency, NVMe, SATA SSD, HDD.
  std::vector<BestConfigRow> rows;

  const BestConfigRow& row(DeviceKind device) const;
  bool operator==(const BestConfigTable&) const = default;
};

/// Published best settings for the aio engine, the ring, and the ring with a
/// kernel poll thread. Throws NoSuchPreset for any other engine.
BestConfigTable paper_best_configs(EngineKind kind, bool kernel_poll = false);

/// Engine configuration of a preset row.
EngineConfig preset_engine(const BestConfigTable& table, DeviceKind device);

/// Highest throughput among records with p999 <= budget; if none qualify, the
/// lowest p999 (then highest throughput). Remaining ties go to lower CPU, then
/// lower queue size, then the lexicographically smaller label.
/// Throws ConfigError on empty input.
const RunRecord& select_best(std::span<const RunRecord> records, double p999_budget_us);

/// Key-value plan files. Keys: name, axis, values, repeat, model or path,
/// direct, fill_seed, engine, queue, batch, fixed_files, fixed_buffers,
/// kernel_poll, pattern, block, threads, warmup, duration or requests, seed,
/// verify.
ExperimentPlan parse_plan(std::istream& in);
ExperimentPlan load_plan(const std::filesystem::path& path);

/// Names accepted by builtin_plans.
std::vector<std::string> builtin_plan_names();

/// The named campaigns over `base`. `device` picks the published best rows when
/// the target is a real file. Throws ConfigError for unknown names.
std::vector<ExperimentPlan> builtin_plans(std::string_view name, const WorkloadSpec& base,
                                          const EngineConfig& engine, DeviceKind device);

/// Default grids.
std::vector<std::uint64_t> default_block_sizes();   // 4K..32M doubling
std::vector<std::uint64_t> default_thread_counts();  // 1..64
std::vector<std::uint64_t> default_queue_sizes();    // 1..256 doubling
std::vector<std::uint64_t> default_batch_sizes(std::uint32_t queue_size);

/// Shell command that switches the I/O scheduler of a block device. Needs
/// root and affects the whole host, so it is printed, never run.
std::string scheduler_command(std::string_view device, std::string_view scheduler = "bfq");

}  // namespace readbench
