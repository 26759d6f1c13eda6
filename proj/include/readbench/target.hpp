#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "readbench/devicesim.hpp"

namespace readbench {

/// Offset, length and buffer alignment required in direct mode.
inline constexpr std::uint64_t kDirectAlignment = 4096;

/// Heap buffer aligned for direct I/O.
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t size, std::size_t alignment = kDirectAlignment);

  std::span<std::byte> bytes() noexcept { return {data_.get(), size_}; }
  std::span<const std::byte> bytes() const noexcept { return {data_.get(), size_}; }
  std::byte* data() noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }

 private:
  struct Free {
    void operator()(std::byte* p) const noexcept;
  };
  std::unique_ptr<std::byte, Free> data_;
  std::size_t size_ = 0;
};

enum class TargetKind { RealFile, Simulated };

struct OpenOptions {
  bool direct = true;
  bool polled_hint = false;
};

struct PolledReadResult {
  std::uint64_t latency_us = 0;
  bool fell_back = false;  // kernel or filesystem refused polled completion
};

/// Shared, read-only handle over a real file (or raw block device) or a
/// simulated device. Copies share the underlying descriptor or device.
class Target {
 public:
  /// Capacity is the file size rounded down to a 4096 multiple.
  static Target open_file(const std::filesystem::path& path, OpenOptions options,
                          std::uint64_t fill_seed);
  static Target simulated(DeviceModel model, std::uint64_t fill_seed);

  TargetKind kind() const noexcept;
  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint64_t fill_seed() const noexcept { return fill_seed_; }
  bool direct() const noexcept;
  bool polled_hint() const noexcept;
  const std::filesystem::path& path() const;
  /// File descriptor; -1 for simulated targets.
  int fd() const noexcept;
  /// Device model; nullptr for real files.
  const DeviceModel* model() const noexcept;
  /// "file:<path>" or "sim:<model name>".
  std::string describe() const;

  /// Throws AlignmentError or IoError before any I/O if the request is out of
  /// bounds or misaligned for direct mode.
  void check_request(std::uint64_t offset, std::span<const std::byte> buffer) const;

  /// Positional read; returns observed latency in microseconds. Simulated
  /// targets take latency from the model and content from the fill pattern.
  std::uint64_t read_block(std::uint64_t offset, std::span<std::byte> buffer) const;

  /// Polled-completion read. Falls back to read_block when unsupported.
  PolledReadResult read_block_polled(std::uint64_t offset, std::span<std::byte> buffer) const;

 private:
  struct File;
  struct Sim;

  Target() = default;

  static std::uint64_t sim_read(Sim& sim, std::uint64_t seed, std::uint64_t offset,
                                std::span<std::byte> buffer, bool polled);

  std::shared_ptr<const File> file_;
  std::shared_ptr<Sim> sim_;
  std::uint64_t capacity_ = 0;
  std::uint64_t fill_seed_ = 0;
};

/// Largest 4096 multiple not above 90% of the device capacity.
std::uint64_t recommended_file_size(std::uint64_t device_capacity);

/// Writes the fill pattern for `seed` into a new file of `size` bytes with
/// 1 MiB sequential buffered writes, syncs it, and opens it buffered.
/// Throws PrepareError.
Target prepare_target(const std::filesystem::path& path, std::uint64_t size, std::uint64_t seed);

struct VerifyReport {
  std::uint64_t bytes_checked = 0;
  std::optional<std::uint64_t> first_bad_offset;
};

/// Sequential scan of the whole target against its fill seed.
VerifyReport verify_target(const Target& target, std::size_t chunk = 1u << 20);

}  // namespace readbench
