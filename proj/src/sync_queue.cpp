#include "io_queue.hpp"

#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>

#include "readbench/errors.hpp"

namespace readbench::detail {

namespace {

class SyncQueue final : public IoQueue {
 public:
  SyncQueue(const Target& target, std::span<AlignedBuffer> buffers, bool polled)
      : target_(target), buffers_(buffers), polled_(polled) {}

  void submit(std::span<const SlotRequest> requests) override {
    for (const auto& r : requests) {
      auto buffer = buffers_[r.slot].bytes().first(r.len);
      std::int64_t result = static_cast<std::int64_t>(r.len);
      try {
        if (polled_) {
          if (target_.read_block_polled(r.offset, buffer).fell_back) ++fallbacks_;
        } else {
          target_.read_block(r.offset, buffer);
        }
      } catch (const AlignmentError&) {
        throw;
      } catch (const IoError&) {
        result = -EIO;
      }
      ready_.push_back({r.slot, result});
    }
  }

  bool wait(std::size_t min_complete, std::chrono::milliseconds,
            std::vector<SlotCompletion>& out) override {
    if (ready_.size() < min_complete) throw Error("sync queue waited for unsubmitted reads");
    out.insert(out.end(), ready_.begin(), ready_.end());
    ready_.clear();
    return true;
  }

  std::uint64_t polled_fallbacks() const override { return fallbacks_; }

 private:
  Target target_;
  std::span<AlignedBuffer> buffers_;
  bool polled_;
  std::vector<SlotCompletion> ready_;
  std::uint64_t fallbacks_ = 0;
};

}  // namespace

std::unique_ptr<IoQueue> make_sync_queue(const Target& target, std::span<AlignedBuffer> buffers,
                                         bool polled) {
  return std::make_unique<SyncQueue>(target, buffers, polled);
}

}  // namespace readbench::detail
