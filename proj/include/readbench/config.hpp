#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace readbench {

enum class AccessPattern { Sequential, Random };

std::string_view to_string(AccessPattern p);
AccessPattern access_pattern_from_string(std::string_view s);

enum class EngineKind { SyncRead, PolledRead, ThreadPoolSync, KernelAsyncQueue, CompletionRing };

/// Short names: sync, polled, pool, aio, uring.
std::string_view to_string(EngineKind kind);
EngineKind engine_kind_from_string(std::string_view s);

constexpr bool is_async(EngineKind k) noexcept {
  return k == EngineKind::KernelAsyncQueue || k == EngineKind::CompletionRing;
}

inline constexpr std::uint32_t kMaxQueueSize = 4096;

/// How to read. Queue and batch apply to the async kinds only and stay 1
/// otherwise; the registration and poll-thread flags apply to the ring only.
struct EngineConfig {
  EngineKind kind = EngineKind::SyncRead;
  std::uint32_t queue_size = 1;
  /// Minimum completions awaited per harvest.
  std::uint32_t batch_size = 1;
  bool fixed_files = false;
  bool fixed_buffers = false;
  bool kernel_poll = false;

  /// Throws ConfigError.
  void validate() const;

  bool operator==(const EngineConfig&) const = default;
};

}  // namespace readbench
