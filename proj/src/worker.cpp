#include "worker.hpp"

#include <algorithm>
#include <cstring>

#include "readbench/errors.hpp"
#include "readbench/fill.hpp"

namespace readbench {

OffsetStream::OffsetStream(AccessPattern pattern, std::uint64_t capacity, std::uint64_t block,
                           std::uint64_t seed, std::uint64_t start_offset)
    : pattern_(pattern),
      block_(block),
      blocks_(block == 0 ? 0 : capacity / block),
      cursor_(0),
      rng_(seed) {
  if (blocks_ == 0) throw ConfigError("block size larger than target capacity");
  cursor_ = (start_offset / block_) % blocks_;
}

std::uint64_t OffsetStream::next() {
  if (pattern_ == AccessPattern::Random) return rng_.below(blocks_) * block_;
  const std::uint64_t offset = cursor_ * block_;
  cursor_ = cursor_ + 1 == blocks_ ? 0 : cursor_ + 1;
  return offset;
}

namespace detail {

namespace {

std::uint64_t ns_to_us(std::int64_t ns) {
  return ns <= 0 ? 0 : static_cast<std::uint64_t>((ns + 500) / 1000);
}

}  // namespace

Worker::Worker(const WorkerSetup& setup, OffsetStream stream)
    : setup_(setup),
      stream_(std::move(stream)),
      samples_(setup.reservoir, setup.fill_seed ^ setup.index),
      slots_(setup.depth) {
  free_.reserve(setup_.depth);
  for (std::uint32_t i = setup_.depth; i > 0; --i) free_.push_back(i - 1);
}

bool Worker::may_submit(std::int64_t now_ns) const noexcept {
  if (stopped_) return false;
  if (setup_.stop_ns && now_ns >= *setup_.stop_ns) return false;
  if (now_ns < setup_.warmup_end_ns) return true;
  return !setup_.budget || measured_submitted_ < *setup_.budget;
}

std::vector<SlotRequest> Worker::submit_up_to(std::size_t count, std::int64_t now_ns) {
  std::vector<SlotRequest> out;
  while (out.size() < count && !free_.empty() && may_submit(now_ns)) {
    const std::uint32_t slot = free_.back();
    free_.pop_back();
    const std::uint64_t offset = stream_.next();
    slots_[slot] = {offset, now_ns, true};
    if (now_ns >= setup_.warmup_end_ns) {
      ++measured_submitted_;
      if (!first_submit_) first_submit_ = now_ns;
    }
    out.push_back({slot, offset, setup_.block, now_ns});
  }
  outstanding_ += static_cast<std::uint32_t>(out.size());
  diag_.peak_outstanding = std::max(diag_.peak_outstanding, outstanding_);
  if (!out.empty() && now_ns >= setup_.warmup_end_ns) ++measured_submits_;
  return out;
}

std::vector<SlotRequest> Worker::start(std::int64_t now_ns) {
  return submit_up_to(setup_.depth, now_ns);
}

std::size_t Worker::need() const noexcept {
  return std::min<std::size_t>(setup_.batch, outstanding_);
}

std::vector<SlotRequest> Worker::harvest(
    std::span<const SlotCompletion> done, std::int64_t now_ns, const SlotData& data,
    const std::function<void(const CompletionEvent&)>& observer) {
  const bool drain = need() < setup_.batch;
  ++diag_.harvests;
  if (!drain)
    diag_.min_harvest = diag_.min_harvest == 0 ? done.size()
                                               : std::min<std::uint64_t>(diag_.min_harvest, done.size());
  if (now_ns >= setup_.warmup_end_ns) ++measured_harvests_;

  for (const auto& c : done) {
    Slot& slot = slots_.at(c.slot);
    if (!slot.busy) throw Error("completion for idle slot " + std::to_string(c.slot));
    if (c.result < 0)
      throw IoError("read at " + std::to_string(slot.offset) + " failed: " +
                    std::strerror(static_cast<int>(-c.result)));
    if (static_cast<std::uint64_t>(c.result) != setup_.block)
      throw IoError("short read at " + std::to_string(slot.offset) + ": " +
                    std::to_string(c.result) + " of " + std::to_string(setup_.block) + " bytes");

    if (setup_.verify) {
      const auto bytes = data(c.slot, slot.offset, setup_.block);
      if (auto bad = FillPattern{setup_.fill_seed}.first_mismatch(bytes, slot.offset))
        throw VerifyError(*bad);
      diag_.checksum += block_hash(bytes);
      ++diag_.blocks_verified;
    }

    const bool measured = slot.submit_ns >= setup_.warmup_end_ns;
    if (measured) {
      samples_.record({ns_to_us(now_ns - slot.submit_ns), setup_.block});
      ++diag_.requests;
      diag_.bytes += setup_.block;
      last_complete_ = std::max(last_complete_.value_or(now_ns), now_ns);
    } else {
      ++diag_.warmup_requests;
    }
    if (observer)
      observer({setup_.index, slot.offset, setup_.block, slot.submit_ns, now_ns, measured});

    slot.busy = false;
    free_.push_back(c.slot);
  }
  outstanding_ -= static_cast<std::uint32_t>(done.size());
  return submit_up_to(done.size(), now_ns);
}

}  // namespace detail
}  // namespace readbench
