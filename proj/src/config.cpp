#include "readbench/config.hpp"

#include "readbench/errors.hpp"

namespace readbench {

std::string_view to_string(AccessPattern p) {
  return p == AccessPattern::Sequential ? "sequential" : "random";
}

AccessPattern access_pattern_from_string(std::string_view s) {
  if (s == "sequential" || s == "seq") return AccessPattern::Sequential;
  if (s == "random" || s == "rand") return AccessPattern::Random;
  throw ConfigError("unknown access pattern '" + std::string(s) + "'");
}

std::string_view to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::SyncRead: return "sync";
    case EngineKind::PolledRead: return "polled";
    case EngineKind::ThreadPoolSync: return "pool";
    case EngineKind::KernelAsyncQueue: return "aio";
    case EngineKind::CompletionRing: return "uring";
  }
  return "?";
}

EngineKind engine_kind_from_string(std::string_view s) {
  if (s == "sync" || s == "pread") return EngineKind::SyncRead;
  if (s == "polled" || s == "preadv2") return EngineKind::PolledRead;
  if (s == "pool" || s == "threadpool") return EngineKind::ThreadPoolSync;
  if (s == "aio" || s == "libaio") return EngineKind::KernelAsyncQueue;
  if (s == "uring" || s == "io_uring" || s == "ring") return EngineKind::CompletionRing;
  throw ConfigError("unknown engine '" + std::string(s) + "'");
}

void EngineConfig::validate() const {
  if (is_async(kind)) {
    if (queue_size < 1 || queue_size > kMaxQueueSize)
      throw ConfigError("queue size must be in 1.." + std::to_string(kMaxQueueSize) + ", got " +
                        std::to_string(queue_size));
    if (batch_size < 1 || batch_size > queue_size)
      throw ConfigError("batch size must be in 1..queue size, got " + std::to_string(batch_size));
  } else if (queue_size != 1 || batch_size != 1) {
    throw ConfigError("queue and batch size apply only to async engines");
  }
  if (kind != EngineKind::CompletionRing && (fixed_files || fixed_buffers || kernel_poll))
    throw ConfigError("fixed files, fixed buffers and kernel poll apply only to the ring engine");
}

}  // namespace readbench
