#include <linux/io_uring.h>
#include <linux/time_types.h>
#include <signal.h>
#include <sys/mman.h>
#include <sys/syscall.h>
#include <sys/uio.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <utility>
#include <vector>
#include <cerrno>
#include <cstring>

#include "io_queue.hpp"
#include "readbench/errors.hpp"

namespace readbench::detail {

namespace {

int sys_setup(unsigned entries, io_uring_params* p) {
  return static_cast<int>(::syscall(__NR_io_uring_setup, entries, p));
}

int sys_enter(int fd, unsigned to_submit, unsigned min_complete, unsigned flags, const void* arg,
              std::size_t argsz) {
  return static_cast<int>(
      ::syscall(__NR_io_uring_enter, fd, to_submit, min_complete, flags, arg, argsz));
}

int sys_register(int fd, unsigned opcode, const void* arg, unsigned nr) {
  return static_cast<int>(::syscall(__NR_io_uring_register, fd, opcode, arg, nr));
}

template <typename T>
T load_acquire(const T* p) {
  return std::atomic_ref<T>(*const_cast<T*>(p)).load(std::memory_order_acquire);
}

template <typename T>
void store_release(T* p, T v) {
  std::atomic_ref<T>(*p).store(v, std::memory_order_release);
}

class Mapping {
 public:
  Mapping() = default;
  Mapping(int fd, std::size_t len, off_t offset) : len_(len) {
    void* p = ::mmap(nullptr, len, PROT_READ | PROT_WRITE, MAP_SHARED | MAP_POPULATE, fd, offset);
    if (p == MAP_FAILED) throw EngineUnsupported("ring mmap", std::strerror(errno));
    ptr_ = static_cast<char*>(p);
  }
  ~Mapping() {
    if (ptr_) ::munmap(ptr_, len_);
  }
  Mapping(Mapping&& o) noexcept : ptr_(std::exchange(o.ptr_, nullptr)), len_(o.len_) {}
  Mapping& operator=(Mapping&& o) noexcept {
    std::swap(ptr_, o.ptr_);
    std::swap(len_, o.len_);
    return *this;
  }

  char* get() const noexcept { return ptr_; }

 private:
  char* ptr_ = nullptr;
  std::size_t len_ = 0;
};

/// Submission/completion ring pair over raw syscalls.
class Ring {
 public:
  Ring(unsigned entries, bool kernel_poll) {
    io_uring_params p{};
    if (kernel_poll) {
      p.flags |= IORING_SETUP_SQPOLL;
      p.sq_thread_idle = 1000;
    }
    fd_ = sys_setup(entries, &p);
    if (fd_ < 0)
      throw EngineUnsupported(kernel_poll ? "ring kernel poll thread" : "ring io_uring_setup",
                              std::strerror(errno));
    params_ = p;
    try {
      const std::size_t sq_len = p.sq_off.array + p.sq_entries * sizeof(std::uint32_t);
      const std::size_t cq_len = p.cq_off.cqes + p.cq_entries * sizeof(io_uring_cqe);
      if (p.features & IORING_FEAT_SINGLE_MMAP) {
        sq_map_ = Mapping(fd_, std::max(sq_len, cq_len), IORING_OFF_SQ_RING);
      } else {
        sq_map_ = Mapping(fd_, sq_len, IORING_OFF_SQ_RING);
        cq_map_ = Mapping(fd_, cq_len, IORING_OFF_CQ_RING);
      }
      sqe_map_ = Mapping(fd_, p.sq_entries * sizeof(io_uring_sqe), IORING_OFF_SQES);
    } catch (...) {
      ::close(fd_);
      throw;
    }
    char* sq = sq_map_.get();
    char* cq = cq_map_.get() ? cq_map_.get() : sq;
    sq_head_ = reinterpret_cast<unsigned*>(sq + p.sq_off.head);
    sq_tail_ = reinterpret_cast<unsigned*>(sq + p.sq_off.tail);
    sq_mask_ = *reinterpret_cast<unsigned*>(sq + p.sq_off.ring_mask);
    sq_flags_ = reinterpret_cast<unsigned*>(sq + p.sq_off.flags);
    sq_array_ = reinterpret_cast<unsigned*>(sq + p.sq_off.array);
    cq_head_ = reinterpret_cast<unsigned*>(cq + p.cq_off.head);
    cq_tail_ = reinterpret_cast<unsigned*>(cq + p.cq_off.tail);
    cq_mask_ = *reinterpret_cast<unsigned*>(cq + p.cq_off.ring_mask);
    cqes_ = reinterpret_cast<io_uring_cqe*>(cq + p.cq_off.cqes);
    sqes_ = reinterpret_cast<io_uring_sqe*>(sqe_map_.get());
  }

  ~Ring() {
    sqe_map_ = {};
    cq_map_ = {};
    sq_map_ = {};
    if (fd_ >= 0) ::close(fd_);
  }

  Ring(const Ring&) = delete;
  Ring& operator=(const Ring&) = delete;

  int fd() const noexcept { return fd_; }
  const io_uring_params& params() const noexcept { return params_; }
  bool kernel_poll() const noexcept { return params_.flags & IORING_SETUP_SQPOLL; }

  io_uring_sqe& next_sqe() {
    const unsigned tail = local_tail_;
    if (tail - load_acquire(sq_head_) >= params_.sq_entries) throw Error("ring submission queue full");
    const unsigned idx = tail & sq_mask_;
    io_uring_sqe& sqe = sqes_[idx];
    std::memset(&sqe, 0, sizeof sqe);
    sq_array_[idx] = idx;
    ++local_tail_;
    ++pending_;
    return sqe;
  }

  void publish() { store_release(sq_tail_, local_tail_); }

  /// Submits pending entries and optionally waits for completions.
  void enter(unsigned min_complete, const __kernel_timespec* timeout, bool& timed_out) {
    timed_out = false;
    publish();
    unsigned flags = 0;
    unsigned to_submit = pending_;
    if (kernel_poll()) {
      // The poller thread consumes the queue; only wake it if it went idle.
      to_submit = 0;
      if (load_acquire(sq_flags_) & IORING_SQ_NEED_WAKEUP) flags |= IORING_ENTER_SQ_WAKEUP;
    }
    if (min_complete > 0) flags |= IORING_ENTER_GETEVENTS;
    if (to_submit == 0 && flags == 0) {
      pending_ = 0;
      return;
    }
    io_uring_getevents_arg arg{};
    const void* argp = nullptr;
    std::size_t argsz = 0;
    if (timeout && min_complete > 0 && (params_.features & IORING_FEAT_EXT_ARG)) {
      arg.sigmask_sz = _NSIG / 8;
      arg.ts = reinterpret_cast<std::uint64_t>(timeout);
      flags |= IORING_ENTER_EXT_ARG;
      argp = &arg;
      argsz = sizeof arg;
    }
    for (;;) {
      const int rc = sys_enter(fd_, to_submit, min_complete, flags, argp, argsz);
      if (rc >= 0) {
        if (!kernel_poll() && static_cast<unsigned>(rc) < to_submit) {
          to_submit -= static_cast<unsigned>(rc);
          continue;
        }
        break;
      }
      if (errno == EINTR) continue;
      if (errno == ETIME) {
        timed_out = true;
        break;
      }
      if (errno == EBUSY || errno == EAGAIN) {
        // Completion queue backlog; caller reaps and retries.
        break;
      }
      throw IoError(std::string("io_uring_enter: ") + std::strerror(errno));
    }
    pending_ = 0;
  }

  template <typename F>
  std::size_t reap(F&& on_cqe) {
    unsigned head = *cq_head_;
    const unsigned tail = load_acquire(cq_tail_);
    std::size_t n = 0;
    for (; head != tail; ++head, ++n) on_cqe(cqes_[head & cq_mask_]);
    store_release(cq_head_, head);
    return n;
  }

 private:
  int fd_ = -1;
  io_uring_params params_{};
  Mapping sq_map_, cq_map_, sqe_map_;
  unsigned* sq_head_ = nullptr;
  unsigned* sq_tail_ = nullptr;
  unsigned sq_mask_ = 0;
  unsigned* sq_flags_ = nullptr;
  unsigned* sq_array_ = nullptr;
  unsigned* cq_head_ = nullptr;
  unsigned* cq_tail_ = nullptr;
  unsigned cq_mask_ = 0;
  io_uring_cqe* cqes_ = nullptr;
  io_uring_sqe* sqes_ = nullptr;
  unsigned local_tail_ = 0;
  unsigned pending_ = 0;
};

class RingQueue final : public IoQueue {
 public:
  RingQueue(const Target& target, std::span<AlignedBuffer> buffers, RingFlags flags)
      : ring_(static_cast<unsigned>(buffers.size()), flags.kernel_poll),
        fd_(target.fd()),
        buffers_(buffers),
        flags_(flags) {
    if (flags.fixed_files) {
      const int fds[1] = {fd_};
      if (sys_register(ring_.fd(), IORING_REGISTER_FILES, fds, 1) != 0)
        throw EngineUnsupported("ring fixed files", std::strerror(errno));
    }
    if (flags.fixed_buffers) {
      std::vector<iovec> iov;
      iov.reserve(buffers.size());
      for (auto& b : buffers) iov.push_back({b.data(), b.size()});
      if (sys_register(ring_.fd(), IORING_REGISTER_BUFFERS, iov.data(),
                       static_cast<unsigned>(iov.size())) != 0)
        throw EngineUnsupported("ring fixed buffers", std::strerror(errno));
    }
  }

  void submit(std::span<const SlotRequest> requests) override {
    if (requests.empty()) return;
    for (const auto& r : requests) {
      io_uring_sqe& sqe = ring_.next_sqe();
      sqe.opcode = flags_.fixed_buffers ? IORING_OP_READ_FIXED : IORING_OP_READ;
      sqe.fd = flags_.fixed_files ? 0 : fd_;
      if (flags_.fixed_files) sqe.flags |= IOSQE_FIXED_FILE;
      sqe.off = r.offset;
      sqe.addr = reinterpret_cast<std::uint64_t>(buffers_[r.slot].data());
      sqe.len = static_cast<std::uint32_t>(r.len);
      if (flags_.fixed_buffers) sqe.buf_index = static_cast<std::uint16_t>(r.slot);
      sqe.user_data = r.slot;
    }
    bool timed_out = false;
    ring_.enter(0, nullptr, timed_out);
  }

  bool wait(std::size_t min_complete, std::chrono::milliseconds timeout,
            std::vector<SlotCompletion>& out) override {
    auto collect = [&] {
      return ring_.reap([&](const io_uring_cqe& cqe) {
        out.push_back({static_cast<std::uint32_t>(cqe.user_data), cqe.res});
      });
    };
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t got = collect();
    while (got < min_complete) {
      const auto left = std::max(deadline - std::chrono::steady_clock::now(),
                                 std::chrono::steady_clock::duration::zero());
      const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(left).count();
      __kernel_timespec ts{ns / 1'000'000'000, ns % 1'000'000'000};
      bool timed_out = false;
      ring_.enter(static_cast<unsigned>(min_complete - got), &ts, timed_out);
      got += collect();
      if (got < min_complete && (timed_out || std::chrono::steady_clock::now() >= deadline))
        return false;
    }
    return true;
  }

 private:
  Ring ring_;
  int fd_;
  std::span<AlignedBuffer> buffers_;
  RingFlags flags_;
};

}  // namespace

std::unique_ptr<IoQueue> make_ring_queue(const Target& target, std::span<AlignedBuffer> buffers,
                                         RingFlags flags) {
  return std::make_unique<RingQueue>(target, buffers, flags);
}

bool probe_ring(RingFlags flags, std::string& detail) {
  try {
    Ring ring(4, flags.kernel_poll);
    if (flags.fixed_files) {
      const int fds[1] = {STDIN_FILENO};
      if (sys_register(ring.fd(), IORING_REGISTER_FILES, fds, 1) != 0) {
        detail = std::strerror(errno);
        return false;
      }
    }
    if (flags.fixed_buffers) {
      AlignedBuffer b(4096);
      iovec iov{b.data(), b.size()};
      if (sys_register(ring.fd(), IORING_REGISTER_BUFFERS, &iov, 1) != 0) {
        detail = std::strerror(errno);
        return false;
      }
    }
    char features[32];
    std::snprintf(features, sizeof features, "features=0x%x", ring.params().features);
    detail = features;
    return true;
  } catch (const EngineUnsupported& e) {
    detail = e.what();
    return false;
  }
}

}  // namespace readbench::detail
