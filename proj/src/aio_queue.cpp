#include <linux/aio_abi.h>
#include <sys/syscall.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "io_queue.hpp"
#include "readbench/errors.hpp"

namespace readbench::detail {

namespace {

int io_setup(unsigned nr, aio_context_t* ctx) { return static_cast<int>(::syscall(__NR_io_setup, nr, ctx)); }
int io_destroy(aio_context_t ctx) { return static_cast<int>(::syscall(__NR_io_destroy, ctx)); }
long io_submit(aio_context_t ctx, long n, iocb** iocbs) { return ::syscall(__NR_io_submit, ctx, n, iocbs); }
long io_getevents(aio_context_t ctx, long min_nr, long max_nr, io_event* events, timespec* timeout) {
  return ::syscall(__NR_io_getevents, ctx, min_nr, max_nr, events, timeout);
}

class AioQueue final : public IoQueue {
 public:
  AioQueue(const Target& target, std::span<AlignedBuffer> buffers)
      : fd_(target.fd()), buffers_(buffers), iocbs_(buffers.size()), events_(buffers.size()) {
    if (io_setup(static_cast<unsigned>(buffers.size()), &ctx_) != 0)
      throw EngineUnsupported("aio io_setup", std::strerror(errno));
  }

  ~AioQueue() override {
    if (ctx_ != 0) io_destroy(ctx_);
  }

  AioQueue(const AioQueue&) = delete;
  AioQueue& operator=(const AioQueue&) = delete;

  void submit(std::span<const SlotRequest> requests) override {
    if (requests.empty()) return;
    std::vector<iocb*> batch;
    batch.reserve(requests.size());
    for (const auto& r : requests) {
      iocb& cb = iocbs_[r.slot];
      std::memset(&cb, 0, sizeof cb);
      cb.aio_data = r.slot;
      cb.aio_lio_opcode = IOCB_CMD_PREAD;
      cb.aio_fildes = static_cast<std::uint32_t>(fd_);
      cb.aio_buf = reinterpret_cast<std::uint64_t>(buffers_[r.slot].data());
      cb.aio_nbytes = r.len;
      cb.aio_offset = static_cast<std::int64_t>(r.offset);
      batch.push_back(&cb);
    }
    std::size_t done = 0;
    while (done < batch.size()) {
      const long n = io_submit(ctx_, static_cast<long>(batch.size() - done), batch.data() + done);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw IoError(std::string("io_submit: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  bool wait(std::size_t min_complete, std::chrono::milliseconds timeout,
            std::vector<SlotCompletion>& out) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t got = 0;
    while (got < min_complete) {
      const auto left = std::max(deadline - std::chrono::steady_clock::now(),
                                 std::chrono::steady_clock::duration::zero());
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(left);
      timespec ts{static_cast<time_t>(secs.count()),
                  static_cast<long>(std::chrono::duration_cast<std::chrono::nanoseconds>(left - secs).count())};
      const long n = io_getevents(ctx_, static_cast<long>(min_complete - got),
                                  static_cast<long>(events_.size()), events_.data(), &ts);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("io_getevents: ") + std::strerror(errno));
      }
      for (long i = 0; i < n; ++i)
        out.push_back({static_cast<std::uint32_t>(events_[i].data), events_[i].res});
      got += static_cast<std::size_t>(n);
      if (got < min_complete && std::chrono::steady_clock::now() >= deadline) return false;
    }
    return true;
  }

 private:
  int fd_;
  std::span<AlignedBuffer> buffers_;
  aio_context_t ctx_ = 0;
  std::vector<iocb> iocbs_;
  std::vector<io_event> events_;
};

}  // namespace

std::unique_ptr<IoQueue> make_aio_queue(const Target& target, std::span<AlignedBuffer> buffers) {
  return std::make_unique<AioQueue>(target, buffers);
}

bool probe_aio(std::string& detail) {
  aio_context_t ctx = 0;
  if (io_setup(1, &ctx) != 0) {
    detail = std::strerror(errno);
    return false;
  }
  io_destroy(ctx);
  detail = "io_setup ok";
  return true;
}

}  // namespace readbench::detail
