#pragma once

// Kernel-facing request queues used by the real-target driver. One queue per
// worker thread; never shared.

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "readbench/target.hpp"
#include "worker.hpp"

namespace readbench::detail {

class IoQueue {
 public:
  virtual ~IoQueue() = default;

  virtual void submit(std::span<const SlotRequest> requests) = 0;

  /// Appends completions to `out` until at least `min_complete` arrived or the
  /// timeout passed. Returns false on timeout.
  virtual bool wait(std::size_t min_complete, std::chrono::milliseconds timeout,
                    std::vector<SlotCompletion>& out) = 0;

  virtual std::uint64_t polled_fallbacks() const { return 0; }
};

struct RingFlags {
  bool fixed_files = false;
  bool fixed_buffers = false;
  bool kernel_poll = false;
};

/// Positional reads performed at submit time; `polled` uses high-priority
/// reads with fallback.
std::unique_ptr<IoQueue> make_sync_queue(const Target& target, std::span<AlignedBuffer> buffers,
                                         bool polled);

/// Throws EngineUnsupported when the kernel refuses queue creation.
std::unique_ptr<IoQueue> make_aio_queue(const Target& target, std::span<AlignedBuffer> buffers);

/// Throws EngineUnsupported naming the failing feature.
std::unique_ptr<IoQueue> make_ring_queue(const Target& target, std::span<AlignedBuffer> buffers,
                                         RingFlags flags);

/// Feature probes for list-engines.
bool probe_aio(std::string& detail);
bool probe_ring(RingFlags flags, std::string& detail);

}  // namespace readbench::detail
