#include "readbench/engines.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "io_queue.hpp"
#include "readbench/errors.hpp"
#include "worker.hpp"

namespace readbench {

using detail::SlotCompletion;
using detail::SlotRequest;
using detail::Worker;
using detail::WorkerSetup;

void WorkloadSpec::validate(const EngineConfig& engine) const {
  engine.validate();
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!std::has_single_bit(block_size) || block_size < 4096 || block_size > (64u << 20))
    throw ConfigError("block size must be a power of two in 4K..64M, got " +
                      std::to_string(block_size));
  if (block_size > target.capacity())
    throw ConfigError("block size exceeds target capacity " + std::to_string(target.capacity()));
  if (duration_s.has_value() == request_budget.has_value())
    throw ConfigError("set exactly one of duration and request budget");
  if (duration_s && !(*duration_s > 0.0)) throw ConfigError("duration must be positive");
  if (request_budget && *request_budget == 0) throw ConfigError("request budget must be positive");
  if (!(warmup_s >= 0.0) || !std::isfinite(warmup_s)) throw ConfigError("warm-up must be >= 0");
  if ((engine.kind == EngineKind::SyncRead || engine.kind == EngineKind::PolledRead) && threads != 1)
    throw ConfigError("synchronous engines run on one thread; use the thread pool");
}

WorkloadInfo WorkloadInfo::from(const WorkloadSpec& s) {
  WorkloadInfo w;
  w.target = s.target.describe();
  w.capacity = s.target.capacity();
  w.direct = s.target.direct();
  w.pattern = s.pattern;
  w.block_size = s.block_size;
  w.threads = s.threads;
  w.warmup_s = s.warmup_s;
  w.duration_s = s.duration_s;
  w.request_budget = s.request_budget;
  w.seed = s.seed;
  w.verify = s.verify;
  w.start_offset = s.start_offset;
  return w;
}

namespace {

constexpr int kMaxConsecutiveStalls = 30;

std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_note(std::string& notes, const std::string& note) {
  if (!notes.empty()) notes += "; ";
  notes += note;
}

std::vector<Worker> make_workers(const WorkloadSpec& w, const EngineConfig& e) {
  const std::uint32_t depth = is_async(e.kind) ? e.queue_size : 1;
  const std::uint32_t batch = is_async(e.kind) ? e.batch_size : 1;
  std::vector<Worker> workers;
  workers.reserve(w.threads);
  for (std::uint32_t i = 0; i < w.threads; ++i) {
    WorkerSetup s;
    s.index = i;
    s.depth = depth;
    s.batch = batch;
    s.block = w.block_size;
    if (w.request_budget)
      s.budget = *w.request_budget / w.threads + (i < *w.request_budget % w.threads ? 1 : 0);
    s.warmup_end_ns = seconds_to_ns(w.warmup_s);
    if (w.duration_s) s.stop_ns = s.warmup_end_ns + seconds_to_ns(*w.duration_s);
    s.verify = w.verify;
    s.fill_seed = w.target.fill_seed();
    s.reservoir = w.reservoir;
    workers.emplace_back(s, OffsetStream(w.pattern, w.target.capacity(), w.block_size, w.seed + i,
                                         w.start_offset));
  }
  return workers;
}

struct Interval {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  double seconds() const { return static_cast<double>(end_ns - start_ns) / 1e9; }
};

Interval measured_interval(const std::vector<Worker>& workers, std::int64_t warmup_end_ns) {
  std::optional<std::int64_t> first, last;
  for (const auto& w : workers) {
    if (auto f = w.first_measured_submit()) first = std::min(first.value_or(*f), *f);
    if (auto l = w.last_measured_complete()) last = std::max(last.value_or(*l), *l);
  }
  Interval iv{first.value_or(warmup_end_ns), last.value_or(warmup_end_ns)};
  if (iv.end_ns <= iv.start_ns) iv.end_ns = iv.start_ns + 1;
  return iv;
}

RunDiagnostics merge_diagnostics(const std::vector<Worker>& workers) {
  RunDiagnostics d;
  for (const auto& w : workers) {
    const auto& x = w.diagnostics();
    d.requests += x.requests;
    d.warmup_requests += x.warmup_requests;
    d.bytes += x.bytes;
    d.checksum += x.checksum;
    d.blocks_verified += x.blocks_verified;
    d.peak_outstanding = std::max(d.peak_outstanding, x.peak_outstanding);
    d.harvests += x.harvests;
    if (x.min_harvest != 0)
      d.min_harvest = d.min_harvest == 0 ? x.min_harvest : std::min(d.min_harvest, x.min_harvest);
  }
  return d;
}

/// Statistics, throughput and label; CPU and notes are filled by the caller.
RunRecord assemble(const WorkloadSpec& w, const EngineConfig& e, const std::vector<Worker>& workers,
                   std::string started_at) {
  std::vector<LatencySample> all;
  for (const auto& wk : workers) {
    const auto s = wk.samples().samples();
    all.insert(all.end(), s.begin(), s.end());
  }
  RunRecord r;
  r.workload = WorkloadInfo::from(w);
  r.engine = e;
  r.latency = aggregate_latencies(all);
  r.diagnostics = merge_diagnostics(workers);
  const auto iv = measured_interval(workers, seconds_to_ns(w.warmup_s));
  r.throughput_mbps = compute_throughput(r.diagnostics.bytes, iv.seconds());
  r.label = encode_label(e, w.threads).display();
  r.started_at = std::move(started_at);
  return r;
}

CpuUsage simulated_cpu(const WorkloadSpec& w, const EngineConfig& e, const std::vector<Worker>& workers,
                       const LatencyStats& stats, double wall, const SimCpuCosts& c) {
  double process_us = 0.0;
  for (const auto& wk : workers) {
    const double requests = static_cast<double>(wk.diagnostics().requests);
    const double submits = static_cast<double>(wk.measured_submits());
    const double harvests = static_cast<double>(wk.measured_harvests());
    switch (e.kind) {
      case EngineKind::SyncRead:
      case EngineKind::ThreadPoolSync:
        process_us += requests * (c.syscall_us + c.per_request_us);
        break;
      case EngineKind::PolledRead:
        // The caller spins for the whole service time.
        process_us += requests * std::max(stats.mean_us, c.syscall_us + c.per_request_us);
        break;
      case EngineKind::KernelAsyncQueue:
        process_us += requests * c.per_request_us + (submits + harvests) * c.syscall_us;
        break;
      case EngineKind::CompletionRing: {
        double per = c.per_request_us;
        if (e.fixed_files) per -= c.fixed_file_saving_us;
        if (e.fixed_buffers) per -= c.fixed_buffer_saving_us;
        const double calls = harvests + (e.kernel_poll ? 0.0 : submits);
        process_us += requests * std::max(per, 0.0) + calls * c.syscall_us;
        break;
      }
    }
  }
  const double external = e.kernel_poll ? wall * w.threads : 0.0;
  return CpuUsage::from(process_us / 1e6, external, wall);
}

// ---------------------------------------------------------------------------
// Simulated driver: one event loop over a fresh device, workers in index order.

RunRecord run_simulated(const WorkloadSpec& w, const EngineConfig& e, const RunOptions& opts) {
  const std::string started = utc_now();
  SimulatedDevice device(*w.target.model());
  auto workers = make_workers(w, e);
  const bool polled = e.kind == EngineKind::PolledRead;

  std::vector<std::vector<SlotCompletion>> ready(workers.size());
  std::vector<std::byte> scratch(w.verify ? w.block_size : 0);
  const FillPattern pattern{w.target.fill_seed()};
  const detail::SlotData data = [&](std::uint32_t, std::uint64_t offset, std::uint64_t len) {
    auto out = std::span<std::byte>(scratch).first(len);
    pattern.fill(out, offset);
    return std::span<const std::byte>(out);
  };

  std::vector<SimRequest> batch;
  auto submit = [&](std::uint32_t wi, const std::vector<SlotRequest>& reqs) {
    if (reqs.empty()) return;
    batch.clear();
    for (const auto& r : reqs)
      batch.push_back({(std::uint64_t{wi} << 32) | r.slot, r.offset, r.len, r.submit_ns, polled});
    device.submit_batch(batch);
  };

  for (std::uint32_t i = 0; i < workers.size(); ++i) submit(i, workers[i].start(0));

  for (;;) {
    const std::int64_t now = device.clock_ns();
    for (bool progress = true; progress;) {
      progress = false;
      for (std::uint32_t i = 0; i < workers.size(); ++i) {
        const std::size_t need = workers[i].need();
        if (need == 0 || ready[i].size() < need) continue;
        auto refill = workers[i].harvest(ready[i], now, data, opts.observer);
        ready[i].clear();
        submit(i, refill);
        progress = true;
      }
    }
    if (std::all_of(workers.begin(), workers.end(), [](const Worker& x) { return x.finished(); }))
      break;
    const auto done = device.advance();
    if (done.empty()) throw Error("simulated device went idle with requests outstanding");
    for (const auto& c : done)
      ready[c.request.id >> 32].push_back(
          {static_cast<std::uint32_t>(c.request.id), static_cast<std::int64_t>(c.request.len)});
  }

  RunRecord r = assemble(w, e, workers, started);
  const auto iv = measured_interval(workers, seconds_to_ns(w.warmup_s));
  r.cpu = simulated_cpu(w, e, workers, r.latency, iv.seconds(), opts.sim_cpu);
  return r;
}

// ---------------------------------------------------------------------------
// Real driver: one thread and one kernel queue per worker.

std::unique_ptr<detail::IoQueue> make_queue(const WorkloadSpec& w, const EngineConfig& e,
                                            std::span<AlignedBuffer> buffers) {
  switch (e.kind) {
    case EngineKind::SyncRead:
    case EngineKind::ThreadPoolSync:
      return detail::make_sync_queue(w.target, buffers, false);
    case EngineKind::PolledRead:
      return detail::make_sync_queue(w.target, buffers, true);
    case EngineKind::KernelAsyncQueue:
      return detail::make_aio_queue(w.target, buffers);
    case EngineKind::CompletionRing:
      return detail::make_ring_queue(w.target, buffers,
                                     {e.fixed_files, e.fixed_buffers, e.kernel_poll});
  }
  throw ConfigError("unknown engine kind");
}

RunRecord run_real(const WorkloadSpec& w, const EngineConfig& e, const RunOptions& opts) {
  const std::string started = utc_now();
  auto workers = make_workers(w, e);
  const std::uint32_t depth = workers.front().depth();

  // Queues are created up front so an unsupported interface fails before any
  // thread starts.
  std::vector<std::vector<AlignedBuffer>> buffers(workers.size());
  std::vector<std::unique_ptr<detail::IoQueue>> queues;
  for (auto& b : buffers) {
    for (std::uint32_t s = 0; s < depth; ++s) b.emplace_back(w.block_size);
    queues.push_back(make_queue(w, e, b));
  }

  std::mutex observer_mutex;
  std::function<void(const CompletionEvent&)> observer;
  if (opts.observer)
    observer = [&](const CompletionEvent& ev) {
      std::lock_guard lock(observer_mutex);
      opts.observer(ev);
    };

  const auto t0 = std::chrono::steady_clock::now();
  auto now_ns = [t0] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  std::atomic<bool> abort{false};
  std::atomic<std::size_t> running{workers.size()};
  std::vector<std::exception_ptr> failures(workers.size());
  std::vector<std::uint64_t> stalls(workers.size(), 0);

  auto body = [&](std::size_t i) {
    Worker& wk = workers[i];
    auto& queue = *queues[i];
    const detail::SlotData data = [&](std::uint32_t slot, std::uint64_t, std::uint64_t len) {
      return std::span<const std::byte>(buffers[i][slot].bytes().first(len));
    };
    std::vector<SlotCompletion> done;
    try {
      queue.submit(wk.start(now_ns()));
      int consecutive = 0;
      while (!wk.finished()) {
        if (abort.load(std::memory_order_relaxed)) wk.stop();
        const std::size_t need = wk.need();
        if (!queue.wait(need - std::min(need, done.size()), opts.harvest_timeout, done)) {
          ++stalls[i];
          if (++consecutive >= kMaxConsecutiveStalls)
            throw IoError("no completions for " +
                          std::to_string(consecutive * opts.harvest_timeout.count()) + " ms");
          if (done.size() < need) continue;
        }
        consecutive = 0;
        queue.submit(wk.harvest(done, now_ns(), data, observer));
        done.clear();
      }
    } catch (...) {
      failures[i] = std::current_exception();
      abort = true;
    }
    running.fetch_sub(1);
  };

  std::vector<std::thread> threads;
  threads.reserve(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) threads.emplace_back(body, i);

  ProcessTable table;
  const auto warmup_end = t0 + std::chrono::nanoseconds(seconds_to_ns(w.warmup_s));
  while (running.load() > 0 && std::chrono::steady_clock::now() < warmup_end)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const CpuTimes before = table.snapshot(is_kernel_poll_thread);
  const auto measure_start = std::chrono::steady_clock::now();
  for (auto& t : threads) t.join();
  const CpuTimes after = table.snapshot(is_kernel_poll_thread);
  const double cpu_wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - measure_start).count();

  std::uint64_t fallbacks = 0;
  for (const auto& q : queues) fallbacks += q->polled_fallbacks();
  queues.clear();

  // Verification failures always surface; other failures abort multi-worker runs.
  std::exception_ptr first;
  for (auto& f : failures) {
    if (!f) continue;
    try {
      std::rethrow_exception(f);
    } catch (const VerifyError&) {
      throw;
    } catch (...) {
      if (!first) first = f;
    }
  }
  std::string notes;
  bool partial = false;
  if (first) {
    std::string what;
    try {
      std::rethrow_exception(first);
    } catch (const std::exception& ex) {
      what = ex.what();
    }
    if (workers.size() > 1) throw AbortedRun("worker failed: " + what);
    try {
      std::rethrow_exception(first);
    } catch (const IoError&) {
      if (workers.front().diagnostics().requests == 0) throw;
    }
    partial = true;
    append_note(notes, "partial run: " + what);
  }

  RunRecord r = assemble(w, e, workers, started);
  r.diagnostics.partial = partial;
  for (auto s : stalls) r.diagnostics.stalls += s;
  r.diagnostics.polled_fallbacks = fallbacks;
  if (cpu_wall > 0.0) r.cpu = measure_cpu(before, after, cpu_wall);
  if (fallbacks > 0)
    append_note(notes, "polled reads fell back to regular reads " + std::to_string(fallbacks) + " times");
  if (r.diagnostics.stalls > 0)
    append_note(notes, std::to_string(r.diagnostics.stalls) + " harvest stalls");
  r.notes = notes;
  return r;
}

RunRecord run_checked(const WorkloadSpec& w, const EngineConfig& e, const RunOptions& opts) {
  w.validate(e);
  if (w.target.kind() == TargetKind::Simulated) return run_simulated(w, e, opts);
  try {
    return run_real(w, e, opts);
  } catch (const EngineUnsupported& ex) {
    if (!opts.fallback_to_sync || !is_async(e.kind)) throw;
    RunRecord r = run_real(w, EngineConfig{.kind = EngineKind::ThreadPoolSync}, opts);
    append_note(r.notes, std::string("fell back to thread pool: ") + ex.what());
    return r;
  }
}

std::vector<std::uint64_t> draw_offsets(OffsetStream& stream, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (auto& o : out) o = stream.next();
  return out;
}

using OffsetSource = std::function<std::vector<std::uint64_t>()>;

/// Shared body of the scattered-read entry points. Each repetition submits a
/// whole group and records its makespan as one sample.
LatencyStats scattered(const WorkloadSpec& w, const EngineConfig& e, std::size_t group,
                       const OffsetSource& next_group) {
  w.validate(e);
  if (!is_async(e.kind)) throw ConfigError("scattered reads need an async engine");
  if (w.threads != 1) throw ConfigError("scattered reads run on one thread");
  if (group == 0) throw ConfigError("scattered read needs at least one block");
  if (group > e.queue_size)
    throw ConfigError("scattered read of " + std::to_string(group) + " blocks exceeds queue size " +
                      std::to_string(e.queue_size));

  const std::int64_t warmup_end = seconds_to_ns(w.warmup_s);
  const std::int64_t stop = w.duration_s ? warmup_end + seconds_to_ns(*w.duration_s)
                                          : std::numeric_limits<std::int64_t>::max();
  const std::uint64_t budget = w.request_budget.value_or(std::numeric_limits<std::uint64_t>::max());
  std::vector<LatencySample> samples;
  auto keep_going = [&](std::int64_t now) {
    return now < stop && (now < warmup_end || samples.size() < budget);
  };
  auto check = [&](std::span<const std::byte> bytes, std::uint64_t offset) {
    if (!w.verify) return;
    if (auto bad = FillPattern{w.target.fill_seed()}.first_mismatch(bytes, offset))
      throw VerifyError(*bad);
  };
  auto record = [&](std::int64_t start, std::int64_t end) {
    if (start < warmup_end) return;
    samples.push_back({static_cast<std::uint64_t>((end - start + 500) / 1000), group * w.block_size});
  };

  if (w.target.kind() == TargetKind::Simulated) {
    SimulatedDevice device(*w.target.model());
    std::vector<SimRequest> reqs(group);
    while (keep_going(device.clock_ns())) {
      const auto offsets = next_group();
      const std::int64_t start = device.clock_ns();
      for (std::size_t i = 0; i < group; ++i)
        reqs[i] = {i, offsets[i], w.block_size, start, false};
      device.submit_batch(reqs);
      std::size_t completed = 0;
      while (completed < group) completed += device.advance().size();
      record(start, device.clock_ns());
    }
  } else {
    std::vector<AlignedBuffer> buffers;
    for (std::size_t i = 0; i < group; ++i) buffers.emplace_back(w.block_size);
    auto queue = make_queue(w, e, buffers);
    const auto t0 = std::chrono::steady_clock::now();
    auto now_ns = [t0] {
      return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
          .count();
    };
    std::vector<SlotRequest> reqs(group);
    std::vector<SlotCompletion> done;
    while (keep_going(now_ns())) {
      const auto offsets = next_group();
      const std::int64_t start = now_ns();
      for (std::size_t i = 0; i < group; ++i)
        reqs[i] = {static_cast<std::uint32_t>(i), offsets[i], w.block_size, start};
      queue->submit(reqs);
      done.clear();
      int stalls = 0;
      while (done.size() < group)
        if (!queue->wait(group - done.size(), std::chrono::milliseconds(1000), done) &&
            ++stalls >= kMaxConsecutiveStalls)
          throw IoError("scattered read made no progress");
      const std::int64_t end = now_ns();
      for (const auto& c : done) {
        if (c.result != static_cast<std::int64_t>(w.block_size))
          throw IoError("scattered read failed at " + std::to_string(offsets[c.slot]));
        check(buffers[c.slot].bytes().first(w.block_size), offsets[c.slot]);
      }
      record(start, end);
    }
  }
  return aggregate_latencies(samples);
}

}  // namespace

RunRecord run_sync(const WorkloadSpec& workload, const EngineConfig& engine, const RunOptions& options) {
  if (engine.kind != EngineKind::SyncRead && engine.kind != EngineKind::PolledRead)
    throw ConfigError("run_sync needs the sync or polled engine");
  return run_checked(workload, engine, options);
}

RunRecord run_threadpool(const WorkloadSpec& workload, const RunOptions& options) {
  return run_checked(workload, EngineConfig{.kind = EngineKind::ThreadPoolSync}, options);
}

RunRecord run_kernel_async(const WorkloadSpec& workload, const EngineConfig& engine,
                           const RunOptions& options) {
  if (engine.kind != EngineKind::KernelAsyncQueue) throw ConfigError("run_kernel_async needs the aio engine");
  return run_checked(workload, engine, options);
}

RunRecord run_ring(const WorkloadSpec& workload, const EngineConfig& engine, const RunOptions& options) {
  if (engine.kind != EngineKind::CompletionRing) throw ConfigError("run_ring needs the ring engine");
  return run_checked(workload, engine, options);
}

RunRecord run(const WorkloadSpec& workload, const EngineConfig& engine, const RunOptions& options) {
  return run_checked(workload, engine, options);
}

LatencyStats read_scattered(const WorkloadSpec& workload, const EngineConfig& engine,
                            std::span<const std::uint64_t> offsets) {
  const std::vector<std::uint64_t> fixed(offsets.begin(), offsets.end());
  return scattered(workload, engine, fixed.size(), [&] { return fixed; });
}

LatencyStats read_scattered_random(const WorkloadSpec& workload, const EngineConfig& engine,
                                   std::size_t blocks) {
  OffsetStream stream(AccessPattern::Random, workload.target.capacity(), workload.block_size,
                      workload.seed);
  return scattered(workload, engine, blocks, [&] { return draw_offsets(stream, blocks); });
}

std::vector<EngineSupport> probe_engines() {
  std::vector<EngineSupport> out;
  out.push_back({"sync", true, "pread"});
  out.push_back({"polled", true, "preadv2 RWF_HIPRI; falls back per request without poll queues"});
  out.push_back({"pool", true, "pread on worker threads"});
  std::string detail;
  const bool aio = detail::probe_aio(detail);
  out.push_back({"aio", aio, detail});
  const bool ring = detail::probe_ring({}, detail);
  out.push_back({"uring", ring, detail});
  const std::pair<const char*, detail::RingFlags> features[] = {
      {"uring+fixed-files", {true, false, false}},
      {"uring+fixed-buffers", {false, true, false}},
      {"uring+kernel-poll", {false, false, true}},
  };
  for (const auto& [name, flags] : features) {
    bool ok = ring && detail::probe_ring(flags, detail);
    if (!ring) detail = "ring unavailable";
    out.push_back({name, ok, detail});
  }
  return out;
}

}  // namespace readbench
