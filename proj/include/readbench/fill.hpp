#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

namespace readbench {

/// SplitMix64 finalizer (Stafford's variant 13). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Test-file content: the little-endian 64-bit word at byte offset o
/// (o a multiple of 8) is mix64(seed ^ o). No state beyond the seed.
struct FillPattern {
  std::uint64_t seed = 0;

  constexpr std::uint64_t word_at(std::uint64_t offset) const noexcept {
    return mix64(seed ^ offset);
  }

  /// Writes the pattern for [offset, offset + out.size()). Both must be
  /// multiples of 8.
  void fill(std::span<std::byte> out, std::uint64_t offset) const noexcept;

  /// Absolute byte offset of the first byte that differs, if any.
  std::optional<std::uint64_t> first_mismatch(std::span<const std::byte> data,
                                              std::uint64_t offset) const noexcept;
};

/// True iff every word in `data` matches the pattern for `seed` at `offset`.
bool verify_block(std::span<const std::byte> data, std::uint64_t offset,
                  std::uint64_t seed) noexcept;

/// Content hash of one block, independent of where it was read from. Block
/// hashes are combined by wrapping addition so the run checksum does not
/// depend on completion order.
std::uint64_t block_hash(std::span<const std::byte> data) noexcept;

/// Offset-indexed random stream for request offsets (SplitMix64).
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform integer in [0, bound), multiply-shift reduction.
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace readbench
