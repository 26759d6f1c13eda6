// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "readbench/errors.hpp"
#include "readbench/fill.hpp"
#include "readbench/label.hpp"
#include "readbench/measurement.hpp"
#include "readbench/report.hpp"
#include "readbench/sweep.hpp"
#include "readbench/target.hpp"

using namespace readbench;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

WorkloadSpec sim(DeviceModel m, std::uint64_t requests, std::uint64_t block = 4096) {
  WorkloadSpec w(Target::simulated(std::move(m), 1));
  w.warmup_s = 0;
  w.block_size = block;
  w.with_requests(requests);
  return w;
}

EngineConfig aio(std::uint32_t q, std::uint32_t b = 1) {
  return {.kind = EngineKind::KernelAsyncQueue, .queue_size = q, .batch_size = b};
}
EngineConfig ring(std::uint32_t q, std::uint32_t b = 1) {
  return {.kind = EngineKind::CompletionRing, .queue_size = q, .batch_size = b};
}

bool engine_supported(const std::string& name) {
  for (const auto& s : probe_engines())
    if (s.name == name) return s.supported;
  return false;
}

std::filesystem::path scratch_file(const char* name) {
  // The build tree is on a real filesystem more often than /tmp is.
  return std::filesystem::current_path() / name;
}

Outcome c1_percentiles() {
  std::mt19937_64 rng(1);
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = set == 0 ? 1 : set == 1 ? 100000 : 1 + rng() % 100000;
    std::vector<LatencySample> s(n);
    std::vector<std::uint64_t> v(n);
    const std::uint64_t range = 1 + rng() % 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng() % range;
      s[i].duration_us = v[i];
    }
    std::sort(v.begin(), v.end());
    auto rank = [&](std::uint64_t num, std::uint64_t den) {
      const std::uint64_t k = (num * n + den - 1) / den;
      return v[std::max<std::uint64_t>(k, 1) - 1];
    };
    const auto st = aggregate_latencies(s);
    long double sum = 0;
    for (auto x : v) sum += x;
    const bool ok = st.count == n && st.min_us == v.front() && st.max_us == v.back() &&
                    st.p99_us == rank(99, 100) && st.p999_us == rank(999, 1000) &&
                    std::fabs(st.mean_us - static_cast<double>(sum / n)) <= 1e-6 * std::max(1.0, st.mean_us);
    if (!ok) return {false, fmt("set %d (n=%zu) differs from oracle", set, n)};
  }
  return {true, "200 sets match the sort oracle exactly"};
}

Outcome c2_hdd_single() {
  const auto m = DeviceModel::preset(DeviceKind::Hdd);
  const auto r = run_sync(sim(m, 10000, 256 << 10));
  const double fastest = 262144.0 / m.outer_rate * 1e6;
  const double slowest = 262144.0 / m.inner_rate * 1e6;
  const auto& l = r.latency;
  const bool ok = std::fabs(l.mean_us - 12000) <= 600 && static_cast<double>(l.min_us) >= std::floor(fastest) &&
                  static_cast<double>(l.max_us) <= 25000 + slowest;
  return {ok, fmt("mean %.0f us, min %llu us (bound %.0f), max %llu us (bound %.0f)", l.mean_us,
                  static_cast<unsigned long long>(l.min_us), fastest, static_cast<unsigned long long>(l.max_us),
                  25000 + slowest)};
}

Outcome c3_hdd_scan() {
  auto m = DeviceModel::preset(DeviceKind::Hdd);
  m.capacity = 1ULL << 30;
  const auto tl = whole_scan(Target::simulated(m, 1), 1 << 20, 0.25);
  bool mono = true;
  for (std::size_t i = 1; i < tl.mbps.size(); ++i) mono = mono && tl.mbps[i] <= tl.mbps[i - 1];
  const double first = tl.mbps.front(), last = tl.mbps.back();
  const bool ok = mono && tl.mbps.size() > 2 && std::fabs(first - 250) <= 12.5 && std::fabs(last - 150) <= 7.5;
  return {ok, fmt("%zu windows, %.1f -> %.1f MB/s, %s", tl.mbps.size(), first, last,
                  mono ? "non-increasing" : "NOT monotone")};
}

Outcome c4_ssd_ull() {
  const auto ssd = run_sync(sim(DeviceModel::preset(DeviceKind::SataSsd), 10000));
  const auto ull = run_sync(sim(DeviceModel::preset(DeviceKind::UltraLowLatency), 10000));
  const bool ok = std::fabs(ssd.latency.mean_us - 140) <= 14 &&
                  std::llabs(static_cast<long long>(ull.latency.min_us) - 12) <= 1;
  return {ok, fmt("ssd mean %.1f us, ull min %llu us", ssd.latency.mean_us,
                  static_cast<unsigned long long>(ull.latency.min_us))};
}

Outcome c5_littles_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const double latency_us = 100;
  std::string worst;
  double worst_err = 0;
  bool ok = true;
  int i = 0;
  for (std::uint32_t p : {1u, 4u, 16u})
    for (std::uint32_t d : {2u, 8u, 32u}) {
      auto w = sim(DeviceModel::fixed_latency(latency_us, p, 1ULL << 34), 20000);
      w.threads = 2;
      const auto e = (i++ % 2) ? ring(d / 2) : aio(d / 2);
      const auto r = run(w, e);
      const double expect = std::min(d, p) * 4096.0 / (latency_us * 1e-6) / 1e6;
      const double err = std::fabs(r.throughput_mbps - expect) / expect;
      if (worst.empty() || err > worst_err) {
        worst_err = err;
        worst = fmt("D=%u P=%u: %.1f vs %.1f MB/s", d, p, r.throughput_mbps, expect);
      }
      ok = ok && err <= 0.10;
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs < 30;
  return {ok, fmt("worst error %.2f%% (%s), %.1f s", 100 * worst_err, worst.c_str(), secs)};
}

Outcome c6_depth_one() {
  const auto m = DeviceModel::fixed_latency(80, 4, 1ULL << 30);
  const double base = run_sync(sim(m, 5000)).latency.mean_us;
  const double a = run(sim(m, 5000), aio(1)).latency.mean_us;
  const double u = run(sim(m, 5000), ring(1)).latency.mean_us;
  const bool ok = std::fabs(a - base) <= 0.1 * base && std::fabs(u - base) <= 0.1 * base;
  return {ok, fmt("sync %.1f, aio %.1f, ring %.1f us", base, a, u)};
}

Outcome c7_cross_engine() {
  const auto path = scratch_file("acceptance_c7.bin");
  constexpr std::uint64_t kSize = 64 << 20, kBlock = 65536, kSeed = 4242;
  prepare_target(path, kSize, kSeed);
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() { std::filesystem::remove(p); }
  } cleanup{path};

  bool direct = true;
  auto open = [&] {
    try {
      return Target::open_file(path, {.direct = true}, kSeed);
    } catch (const IoError&) {
      direct = false;
      return Target::open_file(path, {.direct = false}, kSeed);
    }
  };

  std::uint64_t expected = 0;
  {
    std::vector<std::byte> buf(kBlock);
    FillPattern p{kSeed};
    for (std::uint64_t off = 0; off < kSize; off += kBlock) {
      p.fill(buf, off);
      expected += block_hash(buf);
    }
  }

  WorkloadSpec w(open());
  w.pattern = AccessPattern::Sequential;
  w.block_size = kBlock;
  w.warmup_s = 0;
  w.verify = true;
  w.with_requests(kSize / kBlock);

  std::vector<EngineConfig> engines{{}, {.kind = EngineKind::PolledRead}, {.kind = EngineKind::ThreadPoolSync}};
  std::string skipped;
  if (engine_supported("aio")) engines.push_back(aio(16, 4));
  else skipped += " aio";
  if (engine_supported("uring")) engines.push_back(ring(16, 4));
  else skipped += " uring";

  std::string detail;
  for (const auto& e : engines) {
    const auto r = run(w, e);
    if (r.diagnostics.checksum != expected || r.diagnostics.blocks_verified != kSize / kBlock)
      return {false, fmt("%s checksum %016llx, expected %016llx", r.label.c_str(),
                         static_cast<unsigned long long>(r.diagnostics.checksum),
                         static_cast<unsigned long long>(expected))};
  }
  const auto rep = verify_target(w.target);
  if (rep.first_bad_offset || rep.bytes_checked != kSize) return {false, "full verification failed"};

  const std::uint64_t bad = 37 * 1048576 + 12345;
  {
    const int fd = ::open(path.c_str(), O_RDWR);
    unsigned char x = 0;
    const bool wrote = fd >= 0 && ::pread(fd, &x, 1, static_cast<off_t>(bad)) == 1 &&
                       (x ^= 0xff, ::pwrite(fd, &x, 1, static_cast<off_t>(bad)) == 1);
    if (fd >= 0) ::close(fd);
    if (!wrote) return {false, "could not modify the test file"};
  }
  const auto tampered = verify_target(open());
  if (!tampered.first_bad_offset || *tampered.first_bad_offset != bad)
    return {false, "verify_target did not name the flipped byte"};
  std::uint64_t named = 0;
  try {
    run(w, {});
  } catch (const VerifyError& e) {
    named = e.offset();
  }
  if (named != bad) return {false, fmt("run reported offset %llu", static_cast<unsigned long long>(named))};
  return {true, fmt("%zu engines, checksum %016llx, %s I/O, flip at %llu detected%s%s", engines.size(),
                    static_cast<unsigned long long>(expected), direct ? "direct" : "buffered",
                    static_cast<unsigned long long>(bad), skipped.empty() ? "" : "; unsupported:",
                    skipped.c_str())};
}

Outcome c8_scattered() {
  const auto m = DeviceModel::fixed_latency(100, 32, 1ULL << 34);
  const double single = run_sync(sim(m, 200)).latency.mean_us;
  std::string detail = fmt("L=%.0f us;", single);
  bool ok = true;
  for (std::size_t n : {1u, 5u, 20u}) {
    const auto s = read_scattered_random(sim(m, 200), aio(32), n);
    ok = ok && static_cast<double>(s.max_us) <= 1.2 * single;
    detail += fmt(" n=%zu max %llu us;", n, static_cast<unsigned long long>(s.max_us));
  }
  const auto hdd = DeviceModel::preset(DeviceKind::Hdd);
  const auto one = read_scattered_random(sim(hdd, 2000), aio(16), 1);
  const auto five = read_scattered_random(sim(hdd, 2000), aio(16), 5);
  ok = ok && five.mean_us < 5 * one.mean_us;
  detail += fmt(" hdd 1 block %.0f us, 5 blocks %.0f us", one.mean_us, five.mean_us);
  return {ok, detail};
}

Outcome c9_labels() {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10000; ++i) {
    LabeledConfig c;
    switch (rng() % 5) {
      case 0: break;
      case 1: c.engine.kind = EngineKind::PolledRead; break;
      case 2:
        c.engine.kind = EngineKind::ThreadPoolSync;
        c.threads = 2 + static_cast<std::uint32_t>(rng() % 63);
        break;
      default:
        c.engine.kind = rng() % 2 ? EngineKind::KernelAsyncQueue : EngineKind::CompletionRing;
        c.engine.queue_size = 1 + static_cast<std::uint32_t>(rng() % kMaxQueueSize);
        c.engine.batch_size = 1 + static_cast<std::uint32_t>(rng() % c.engine.queue_size);
        c.threads = 1 + static_cast<std::uint32_t>(rng() % 64);
        if (c.engine.kind == EngineKind::CompletionRing) {
          c.engine.fixed_files = rng() % 2;
          c.engine.fixed_buffers = rng() % 2;
          c.engine.kernel_poll = rng() % 2;
        }
    }
    if (!(parse_label(encode_label(c.engine, c.threads)) == c)) return {false, fmt("round trip %d failed", i)};
  }
  struct Case {
    const char* text;
    LabeledConfig want;
  };
  const Case cases[] = {
      {"P", {}},
      {"A16B1", {{.kind = EngineKind::KernelAsyncQueue, .queue_size = 16}, 1}},
      {"A64B1", {{.kind = EngineKind::KernelAsyncQueue, .queue_size = 64}, 1}},
      {"U1B1F", {{.kind = EngineKind::CompletionRing, .fixed_files = true}, 1}},
      {"A16B1T3", {{.kind = EngineKind::KernelAsyncQueue, .queue_size = 16}, 3}},
      {"U64B1MFT2",
       {{.kind = EngineKind::CompletionRing, .queue_size = 64, .fixed_files = true, .fixed_buffers = true}, 2}},
      {"U32B1", {{.kind = EngineKind::CompletionRing, .queue_size = 32}, 1}},
  };
  for (const auto& c : cases) {
    if (!(parse_label(c.text) == c.want)) return {false, fmt("'%s' parsed wrongly", c.text)};
    if (encode_label(c.want.engine, c.want.threads).text != c.text)
      return {false, fmt("'%s' does not re-encode", c.text)};
  }
  return {true, "10^4 round trips and 7 literal labels"};
}

Outcome c10_presets() {
  using D = DeviceKind;
  const BestConfigTable want[] = {
      {EngineKind::KernelAsyncQueue, false,
       {{D::UltraLowLatency, 2, 16, 4}, {D::NvmeSsd, 3, 16, 1}, {D::SataSsd, 1, 16, 2}, {D::Hdd, 1, 16, 16}}},
      {EngineKind::CompletionRing, false,
       {{D::UltraLowLatency, 3, 4, 2}, {D::NvmeSsd, 3, 16, 2}, {D::SataSsd, 1, 32, 8}, {D::Hdd, 1, 1, 1}}},
      {EngineKind::CompletionRing, true,
       {{D::UltraLowLatency, 2, 16, 2}, {D::NvmeSsd, 2, 32, 8}, {D::SataSsd, 1, 16, 4}, {D::Hdd, 1, 1, 1}}},
  };
  for (const auto& t : want)
    if (!(paper_best_configs(t.engine, t.kernel_poll) == t)) return {false, "table mismatch"};
  return {true, "three tables equal field for field"};
}

std::vector<RunRecord> replay_campaign() {
  std::vector<RunRecord> rs;
  auto w = sim(DeviceModel::preset(DeviceKind::NvmeSsd), 4000);
  w.threads = 2;
  rs.push_back(run(w, ring(16, 2)));
  rs.push_back(run(w, aio(32, 4)));
  auto s = sim(DeviceModel::preset(DeviceKind::SataSsd), 2000, 65536);
  s.threads = 3;
  rs.push_back(run(s, {.kind = EngineKind::ThreadPoolSync}));
  rs.push_back(run_sync(sim(DeviceModel::preset(DeviceKind::Hdd), 300)));
  rs.push_back(run_sync(sim(DeviceModel::preset(DeviceKind::UltraLowLatency), 3000), {.kind = EngineKind::PolledRead}));
  return rs;
}

Outcome c11_replay() {
  auto a = replay_campaign();
  auto b = replay_campaign();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i].latency == b[i].latency) || a[i].throughput_mbps != b[i].throughput_mbps)
      return {false, fmt("record %zu differs on replay", i)};
  // Wall-clock fields are the only legitimate differences.
  for (auto* v : {&a, &b})
    for (auto& r : *v) r.started_at.clear();
  const auto sa = scatter_summary(a);
  const auto sb = scatter_summary(b);
  if (sa != sb) return {false, "scatter documents differ"};
  return {true, fmt("%zu records identical, SVG %zu bytes identical", a.size(), sa.size())};
}

Outcome c12_warmup() {
  auto steady = DeviceModel::preset(DeviceKind::SataSsd);
  auto slow = steady;
  const double warmup_s = 0.5;
  slow.slow_start_us = warmup_s * 1e6;
  slow.slow_start_factor = 10;

  auto w = sim(slow, 20000);
  w.warmup_s = warmup_s;
  const auto r = run_sync(w);
  const double reference = run_sync(sim(steady, 100000)).latency.mean_us;
  auto same = sim(steady, 20000);
  same.warmup_s = warmup_s;
  const double unslowed = run_sync(same).latency.mean_us;
  const bool ok = r.diagnostics.warmup_requests > 0 && std::fabs(r.latency.mean_us - reference) <= 0.05 * reference;
  return {ok, fmt("post-warmup mean %.1f us vs steady model mean %.1f us (same run without slow start: %.1f us), "
                  "%llu warmup requests excluded",
                  r.latency.mean_us, reference, unslowed,
                  static_cast<unsigned long long>(r.diagnostics.warmup_requests))};
}

Outcome c13_real_smoke() {
  const auto path = scratch_file("acceptance_c13.bin");
  constexpr std::uint64_t kSeed = 1313;
  prepare_target(path, 64 << 20, kSeed);
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() { std::filesystem::remove(p); }
  } cleanup{path};
  Target t = [&]() -> Target {
    try {
      return Target::open_file(path, {.direct = true}, kSeed);
    } catch (const IoError&) {
      return Target::open_file(path, {.direct = false}, kSeed);
    }
  }();
  if (!t.direct()) return {true, "skipped: no direct I/O on this filesystem"};

  struct Case {
    const char* probe;
    EngineConfig engine;
    std::uint32_t threads;
  };
  const Case cases[] = {{"sync", {}, 1},
                        {"polled", {.kind = EngineKind::PolledRead}, 1},
                        {"pool", {.kind = EngineKind::ThreadPoolSync}, 2},
                        {"aio", aio(16, 4), 1},
                        {"uring", ring(16, 4), 1}};
  std::string detail, skipped;
  for (const auto& c : cases) {
    if (!engine_supported(c.probe)) {
      skipped += std::string(" ") + c.probe;
      continue;
    }
    WorkloadSpec w(t);
    w.threads = c.threads;
    w.warmup_s = 0.5;
    w.with_duration(5.0);
    w.verify = true;
    const auto r = run(w, c.engine);
    const std::uint32_t bound = std::max<std::uint32_t>(c.engine.queue_size, 1);
    if (r.latency.count == 0 || r.diagnostics.blocks_verified != r.diagnostics.requests + r.diagnostics.warmup_requests ||
        r.diagnostics.peak_outstanding > bound || r.diagnostics.partial)
      return {false, fmt("%s: %llu requests, peak outstanding %u", r.label.c_str(),
                         static_cast<unsigned long long>(r.latency.count), r.diagnostics.peak_outstanding)};
    detail += fmt("%s %llu req; ", r.label.c_str(), static_cast<unsigned long long>(r.latency.count));
  }
  if (!skipped.empty()) detail += "unsupported:" + skipped;
  return {true, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"percentile oracle", c1_percentiles},
      {"HDD 256K random read", c2_hdd_single},
      {"HDD whole scan 1 GiB", c3_hdd_scan},
      {"SATA SSD mean and ULL minimum", c4_ssd_ull},
      {"Little's law grid", c5_littles_law},
      {"depth-1 equivalence", c6_depth_one},
      {"cross-engine data equivalence", c7_cross_engine},
      {"scattered multi-block reads", c8_scattered},
      {"label codec", c9_labels},
      {"preset tables", c10_presets},
      {"determinism replay", c11_replay},
      {"warm-up exclusion", c12_warmup},
      {"real-hardware smoke", c13_real_smoke},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %zu: %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
