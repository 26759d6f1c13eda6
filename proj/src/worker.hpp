#pragma once

// Per-worker request loop shared by the real-thread and simulated drivers:
// keep `depth` requests outstanding, harvest at least `batch` completions at a
// time, refill exactly as many as were harvested.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "readbench/engines.hpp"

namespace readbench::detail {

struct SlotRequest {
  std::uint32_t slot = 0;
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
  std::int64_t submit_ns = 0;
};

struct SlotCompletion {
  std::uint32_t slot = 0;
  std::int64_t result = 0;  // bytes transferred or -errno
};

struct WorkerSetup {
  std::uint32_t index = 0;
  std::uint32_t depth = 1;
  std::uint32_t batch = 1;
  std::uint64_t block = 4096;
  std::optional<std::uint64_t> budget;
  std::int64_t warmup_end_ns = 0;
  std::optional<std::int64_t> stop_ns;
  bool verify = false;
  std::uint64_t fill_seed = 0;
  std::size_t reservoir = 0;
};

/// Returns the bytes of a completed slot; called only when verifying.
using SlotData = std::function<std::span<const std::byte>(std::uint32_t slot, std::uint64_t offset,
                                                          std::uint64_t len)>;

class Worker {
 public:
  Worker(const WorkerSetup& setup, OffsetStream stream);

  /// Initial fill of the queue.
  std::vector<SlotRequest> start(std::int64_t now_ns);

  /// Completions to wait for before the next harvest; 0 once finished.
  std::size_t need() const noexcept;
  bool finished() const noexcept { return outstanding_ == 0; }

  /// Records the harvested completions at observation time `now_ns` and
  /// returns the refill. Throws VerifyError or IoError.
  std::vector<SlotRequest> harvest(std::span<const SlotCompletion> done, std::int64_t now_ns,
                                   const SlotData& data,
                                   const std::function<void(const CompletionEvent&)>& observer);

  /// Stops further submissions; outstanding requests still drain.
  void stop() noexcept { stopped_ = true; }

  std::uint32_t outstanding() const noexcept { return outstanding_; }
  std::uint32_t depth() const noexcept { return setup_.depth; }
  const SampleRecorder& samples() const noexcept { return samples_; }
  const RunDiagnostics& diagnostics() const noexcept { return diag_; }
  std::optional<std::int64_t> first_measured_submit() const noexcept { return first_submit_; }
  std::optional<std::int64_t> last_measured_complete() const noexcept { return last_complete_; }
  /// Harvests and submission batches during the measured phase.
  std::uint64_t measured_harvests() const noexcept { return measured_harvests_; }
  std::uint64_t measured_submits() const noexcept { return measured_submits_; }
  const WorkerSetup& setup() const noexcept { return setup_; }

 private:
  bool may_submit(std::int64_t now_ns) const noexcept;
  std::vector<SlotRequest> submit_up_to(std::size_t count, std::int64_t now_ns);

  WorkerSetup setup_;
  OffsetStream stream_;
  SampleRecorder samples_;
  RunDiagnostics diag_;

  struct Slot {
    std::uint64_t offset = 0;
    std::int64_t submit_ns = 0;
    bool busy = false;
  };
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::uint32_t outstanding_ = 0;
  std::uint64_t measured_submitted_ = 0;
  std::uint64_t measured_harvests_ = 0;
  std::uint64_t measured_submits_ = 0;
  std::optional<std::int64_t> first_submit_;
  std::optional<std::int64_t> last_complete_;
  bool stopped_ = false;
};

}  // namespace readbench::detail
