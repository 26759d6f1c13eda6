#include "readbench/target.hpp"

#include <fcntl.h>
#include <linux/fs.h>
#include <sys/ioctl.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "readbench/errors.hpp"
#include "readbench/fill.hpp"

namespace readbench {

AlignedBuffer::AlignedBuffer(std::size_t size, std::size_t alignment) : size_(size) {
  const std::size_t rounded = (size + alignment - 1) / alignment * alignment;
  void* p = std::aligned_alloc(alignment, rounded == 0 ? alignment : rounded);
  if (p == nullptr) throw std::bad_alloc();
  data_.reset(static_cast<std::byte*>(p));
}

void AlignedBuffer::Free::operator()(std::byte* p) const noexcept { std::free(p); }

namespace {

std::string errno_text(int err) { return std::strerror(err); }

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::uint64_t ns_to_us(std::int64_t ns) { return static_cast<std::uint64_t>((ns + 500) / 1000); }

}  // namespace

struct Target::File {
  std::filesystem::path path;
  int fd = -1;
  bool direct = false;
  bool polled_hint = false;

  ~File() {
    if (fd >= 0) ::close(fd);
  }
};

struct Target::Sim {
  explicit Sim(DeviceModel m) : model(m), device(std::move(m)) {}

  DeviceModel model;
  std::mutex mutex;
  SimulatedDevice device;
  std::uint64_t next_id = 0;
};

Target Target::open_file(const std::filesystem::path& path, OpenOptions options,
                         std::uint64_t fill_seed) {
  auto file = std::make_shared<File>();
  file->path = path;
  file->direct = options.direct;
  file->polled_hint = options.polled_hint;
  int flags = O_RDONLY | O_CLOEXEC;
  if (options.direct) flags |= O_DIRECT;
  file->fd = ::open(path.c_str(), flags);
  if (file->fd < 0)
    throw IoError("cannot open " + path.string() + (options.direct ? " (direct)" : "") + ": " +
                  errno_text(errno));

  struct stat st {};
  if (::fstat(file->fd, &st) != 0) throw IoError("fstat " + path.string() + ": " + errno_text(errno));
  std::uint64_t size = static_cast<std::uint64_t>(st.st_size);
  if (S_ISBLK(st.st_mode)) {
    if (::ioctl(file->fd, BLKGETSIZE64, &size) != 0)
      throw IoError("BLKGETSIZE64 " + path.string() + ": " + errno_text(errno));
  }

  Target t;
  t.capacity_ = size / 4096 * 4096;
  t.fill_seed_ = fill_seed;
  t.file_ = std::move(file);
  return t;
}

Target Target::simulated(DeviceModel model, std::uint64_t fill_seed) {
  model.validate();
  Target t;
  t.capacity_ = model.capacity;
  t.fill_seed_ = fill_seed;
  t.sim_ = std::make_shared<Sim>(std::move(model));
  return t;
}

TargetKind Target::kind() const noexcept { return file_ ? TargetKind::RealFile : TargetKind::Simulated; }
bool Target::direct() const noexcept { return file_ && file_->direct; }
bool Target::polled_hint() const noexcept { return file_ && file_->polled_hint; }
int Target::fd() const noexcept { return file_ ? file_->fd : -1; }
const DeviceModel* Target::model() const noexcept { return sim_ ? &sim_->model : nullptr; }

const std::filesystem::path& Target::path() const {
  static const std::filesystem::path empty;
  return file_ ? file_->path : empty;
}

std::string Target::describe() const {
  if (file_) return "file:" + file_->path.string();
  return "sim:" + sim_->model.name;
}

void Target::check_request(std::uint64_t offset, std::span<const std::byte> buffer) const {
  if (buffer.empty()) throw IoError("zero-length read");
  if (offset > capacity_ || buffer.size() > capacity_ - offset)
    throw IoError("read [" + std::to_string(offset) + ", +" + std::to_string(buffer.size()) +
                  ") beyond capacity " + std::to_string(capacity_));
  if (direct()) {
    const auto addr = reinterpret_cast<std::uintptr_t>(buffer.data());
    if (offset % kDirectAlignment || buffer.size() % kDirectAlignment || addr % kDirectAlignment)
      throw AlignmentError("direct read needs 4096-aligned offset, length and buffer (offset " +
                           std::to_string(offset) + ", length " + std::to_string(buffer.size()) +
                           ")");
  }
}

namespace {

void pread_full(int fd, std::uint64_t offset, std::span<std::byte> buffer) {
  std::size_t done = 0;
  while (done < buffer.size()) {
    const ssize_t n = ::pread(fd, buffer.data() + done, buffer.size() - done,
                              static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("pread at " + std::to_string(offset + done) + ": " + errno_text(errno));
    }
    if (n == 0) throw IoError("short read at " + std::to_string(offset + done));
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::uint64_t Target::sim_read(Sim& sim, std::uint64_t seed, std::uint64_t offset,
                               std::span<std::byte> buffer, bool polled) {
  std::int64_t latency_ns = 0;
  {
    std::lock_guard lock(sim.mutex);
    auto& dev = sim.device;
    const auto id = sim.next_id++;
    const auto submitted = dev.clock_ns();
    dev.submit({.id = id, .offset = offset, .len = buffer.size(), .submit_ns = submitted,
                .polled = polled});
    for (bool done = false; !done;)
      for (const auto& c : dev.advance())
        if (c.request.id == id) {
          latency_ns = c.complete_ns - submitted;
          done = true;
        }
  }
  FillPattern{seed}.fill(buffer, offset);
  return ns_to_us(latency_ns);
}

std::uint64_t Target::read_block(std::uint64_t offset, std::span<std::byte> buffer) const {
  check_request(offset, buffer);
  if (file_) {
    const auto start = now_ns();
    pread_full(file_->fd, offset, buffer);
    return ns_to_us(now_ns() - start);
  }

  return sim_read(*sim_, fill_seed_, offset, buffer, false);
}

PolledReadResult Target::read_block_polled(std::uint64_t offset, std::span<std::byte> buffer) const {
  check_request(offset, buffer);
  if (sim_) return {sim_read(*sim_, fill_seed_, offset, buffer, true), false};

  // High-priority reads only poll with direct I/O.
  if (!file_->direct) return {read_block(offset, buffer), true};
  const auto start = now_ns();
  std::size_t done = 0;
  while (done < buffer.size()) {
    iovec iov{buffer.data() + done, buffer.size() - done};
    const ssize_t n = ::preadv2(file_->fd, &iov, 1, static_cast<off_t>(offset + done), RWF_HIPRI);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == EOPNOTSUPP || errno == EINVAL || errno == ENOSYS) {
        if (done != 0) throw IoError("polled read failed mid-request at " + std::to_string(offset));
        return {read_block(offset, buffer), true};
      }
      throw IoError("preadv2 at " + std::to_string(offset + done) + ": " + errno_text(errno));
    }
    if (n == 0) throw IoError("short read at " + std::to_string(offset + done));
    done += static_cast<std::size_t>(n);
  }
  return {ns_to_us(now_ns() - start), false};
}

std::uint64_t recommended_file_size(std::uint64_t device_capacity) {
  const auto ninety = static_cast<std::uint64_t>(
      static_cast<unsigned __int128>(device_capacity) * 9 / 10);
  return ninety / 4096 * 4096;
}

Target prepare_target(const std::filesystem::path& path, std::uint64_t size, std::uint64_t seed) {
  if (size == 0 || size % 4096 != 0)
    throw PrepareError("size must be a positive multiple of 4096, got " + std::to_string(size));

  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  struct statvfs vfs {};
  if (::statvfs(dir.c_str(), &vfs) == 0) {
    std::uint64_t available = static_cast<std::uint64_t>(vfs.f_bavail) * vfs.f_frsize;
    std::error_code ec;
    if (const auto existing = std::filesystem::file_size(path, ec); !ec) available += existing;
    if (available < size)
      throw PrepareError("not enough space for " + std::to_string(size) + " bytes in " +
                         dir.string() + " (" + std::to_string(available) + " available)");
  }

  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw PrepareError("cannot create " + path.string() + ": " + errno_text(errno));

  const FillPattern pattern{seed};
  std::vector<std::byte> chunk(std::size_t{1} << 20);
  std::uint64_t written = 0;
  try {
    while (written < size) {
      const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(chunk.size(), size - written));
      pattern.fill(std::span(chunk).first(n), written);
      std::size_t done = 0;
      while (done < n) {
        const ssize_t w = ::pwrite(fd, chunk.data() + done, n - done,
                                   static_cast<off_t>(written + done));
        if (w < 0) {
          if (errno == EINTR) continue;
          throw PrepareError("write " + path.string() + ": " + errno_text(errno));
        }
        done += static_cast<std::size_t>(w);
      }
      written += n;
    }
    if (::fsync(fd) != 0) throw PrepareError("fsync " + path.string() + ": " + errno_text(errno));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  return Target::open_file(path, {.direct = false}, seed);
}

VerifyReport verify_target(const Target& target, std::size_t chunk) {
  chunk = std::max<std::size_t>(chunk / kDirectAlignment * kDirectAlignment, kDirectAlignment);
  AlignedBuffer buffer(chunk);
  const FillPattern pattern{target.fill_seed()};
  VerifyReport report;
  for (std::uint64_t offset = 0; offset < target.capacity();) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, target.capacity() - offset));
    auto view = buffer.bytes().first(n);
    if (target.kind() == TargetKind::RealFile) {
      pread_full(target.fd(), offset, view);
    } else {
      pattern.fill(view, offset);
    }
    if (auto bad = pattern.first_mismatch(view, offset)) {
      report.first_bad_offset = bad;
      report.bytes_checked = *bad;
      return report;
    }
    offset += n;
    report.bytes_checked = offset;
  }
  return report;
}

}  // namespace readbench
