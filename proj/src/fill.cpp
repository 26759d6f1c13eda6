#include "readbench/fill.hpp"

#include <bit>
#include <cstring>

namespace readbench {

namespace {

inline std::uint64_t load_le(const std::byte* p) noexcept {
  std::uint64_t w;
  std::memcpy(&w, p, sizeof w);
  if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap64(w);
  return w;
}

inline void store_le(std::byte* p, std::uint64_t w) noexcept {
  if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap64(w);
  std::memcpy(p, &w, sizeof w);
}

}  // namespace

void FillPattern::fill(std::span<std::byte> out, std::uint64_t offset) const noexcept {
  for (std::size_t i = 0; i + 8 <= out.size(); i += 8) store_le(out.data() + i, word_at(offset + i));
}

std::optional<std::uint64_t> FillPattern::first_mismatch(std::span<const std::byte> data,
                                                         std::uint64_t offset) const noexcept {
  for (std::size_t i = 0; i + 8 <= data.size(); i += 8) {
    const std::uint64_t expected = word_at(offset + i);
    if (load_le(data.data() + i) == expected) continue;
    std::byte want[8];
    store_le(want, expected);
    for (std::size_t b = 0; b < 8; ++b)
      if (data[i + b] != want[b]) return offset + i + b;
  }
  return std::nullopt;
}

bool verify_block(std::span<const std::byte> data, std::uint64_t offset,
                  std::uint64_t seed) noexcept {
  const FillPattern pattern{seed};
  for (std::size_t i = 0; i + 8 <= data.size(); i += 8)
    if (load_le(data.data() + i) != pattern.word_at(offset + i)) return false;
  return true;
}

std::uint64_t block_hash(std::span<const std::byte> data) noexcept {
  // FNV-1a over 64-bit words, finalized.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::size_t i = 0;
  for (; i + 8 <= data.size(); i += 8) h = (h ^ load_le(data.data() + i)) * 0x100000001b3ULL;
  for (; i < data.size(); ++i) h = (h ^ std::to_integer<std::uint64_t>(data[i])) * 0x100000001b3ULL;
  return mix64(h ^ data.size());
}

}  // namespace readbench
