#include "readbench/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "readbench/errors.hpp"
#include "readbench/kv.hpp"

namespace readbench {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::BlockSize: return "block";
    case SweepAxis::Threads: return "threads";
    case SweepAxis::QueueSize: return "queue";
    case SweepAxis::BatchSize: return "batch";
    case SweepAxis::Offset: return "offset";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(std::string_view s) {
  if (s == "block" || s == "block_size") return SweepAxis::BlockSize;
  if (s == "threads") return SweepAxis::Threads;
  if (s == "queue" || s == "queue_size") return SweepAxis::QueueSize;
  if (s == "batch" || s == "batch_size") return SweepAxis::BatchSize;
  if (s == "offset" || s == "scan") return SweepAxis::Offset;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

void ExperimentPlan::validate() const {
  if (values.empty()) throw ConfigError("plan '" + name + "' has no values");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1])
      throw ConfigError("plan '" + name + "' values must be strictly increasing");
  if (repeat < 1) throw ConfigError("plan repeat must be at least 1");
  if (axis != SweepAxis::Offset && values.front() == 0)
    throw ConfigError("plan '" + name + "' values must be positive");
  if (axis == SweepAxis::Offset && values.back() >= base_workload.target.capacity())
    throw ConfigError("scan offset beyond target capacity");
}

std::pair<WorkloadSpec, EngineConfig> ExperimentPlan::point(std::uint64_t value,
                                                            std::uint32_t repetition) const {
  WorkloadSpec w = base_workload;
  EngineConfig e = base_engine;
  w.seed += repetition;
  switch (axis) {
    case SweepAxis::BlockSize:
      w.block_size = value;
      break;
    case SweepAxis::Threads:
      w.threads = static_cast<std::uint32_t>(value);
      if (w.threads > 1 && (e.kind == EngineKind::SyncRead || e.kind == EngineKind::PolledRead))
        e.kind = EngineKind::ThreadPoolSync;
      break;
    case SweepAxis::QueueSize:
      e.queue_size = static_cast<std::uint32_t>(value);
      e.batch_size = std::min(e.batch_size, e.queue_size);
      break;
    case SweepAxis::BatchSize:
      e.batch_size = static_cast<std::uint32_t>(value);
      break;
    case SweepAxis::Offset:
      w.pattern = AccessPattern::Sequential;
      w.start_offset = value;
      break;
  }
  return {std::move(w), e};
}

PlanResult run_plan(const ExperimentPlan& plan, const RunOptions& options,
                    const std::function<void(const RunRecord&)>& on_record) {
  plan.validate();
  PlanResult out;
  for (std::size_t i = 0; i < plan.values.size(); ++i) {
    for (std::uint32_t r = 0; r < plan.repeat; ++r) {
      try {
        auto [w, e] = plan.point(plan.values[i], r);
        RunRecord rec = run(w, e, options);
        if (on_record) on_record(rec);
        out.records.push_back(std::move(rec));
      } catch (const std::exception& ex) {
        out.errors.push_back({i, plan.values[i], r, ex.what()});
      }
    }
  }
  return out;
}

ScanTimeline whole_scan(const Target& target, std::uint64_t block, double window_s,
                        std::uint64_t seed) {
  if (block < 4096) throw ConfigError("scan block must be at least 4K");
  if (!(window_s > 0.0)) throw ConfigError("scan window must be positive");
  WorkloadSpec w(target);
  w.pattern = AccessPattern::Sequential;
  w.block_size = block;
  w.warmup_s = 0.0;
  w.seed = seed;
  w.with_requests(target.capacity() / block);

  const auto window_ns = static_cast<std::int64_t>(std::llround(window_s * 1e9));
  std::vector<double> bytes_per_window;
  std::int64_t end_ns = 0;
  RunOptions opts;
  opts.observer = [&](const CompletionEvent& ev) {
    end_ns = std::max(end_ns, ev.complete_ns);
    const std::int64_t span = std::max<std::int64_t>(ev.complete_ns - ev.submit_ns, 1);
    const double density = static_cast<double>(ev.bytes) / static_cast<double>(span);
    std::int64_t t = ev.submit_ns;
    const std::int64_t stop = std::max(ev.complete_ns, ev.submit_ns + 1);
    while (t < stop) {
      const auto idx = static_cast<std::size_t>(t / window_ns);
      const std::int64_t boundary = std::min<std::int64_t>((static_cast<std::int64_t>(idx) + 1) * window_ns, stop);
      if (bytes_per_window.size() <= idx) bytes_per_window.resize(idx + 1, 0.0);
      bytes_per_window[idx] += density * static_cast<double>(boundary - t);
      t = boundary;
    }
  };
  const RunRecord rec = run(w, EngineConfig{}, opts);

  ScanTimeline tl;
  tl.window_s = window_s;
  tl.total_bytes = rec.diagnostics.bytes;
  tl.elapsed_s = static_cast<double>(end_ns) / 1e9;
  for (std::size_t i = 0; i < bytes_per_window.size(); ++i) {
    const std::int64_t start = static_cast<std::int64_t>(i) * window_ns;
    const std::int64_t len = std::min(window_ns, std::max<std::int64_t>(end_ns, start + 1) - start);
    tl.mbps.push_back(bytes_per_window[i] / (static_cast<double>(len) / 1e9) / 1e6);
  }
  return tl;
}

const BestConfigRow& BestConfigTable::row(DeviceKind device) const {
  for (const auto& r : rows)
    if (r.device == device) return r;
  throw NoSuchPreset("no preset row for " + std::string(to_string(device)));
}

BestConfigTable paper_best_configs(EngineKind kind, bool kernel_poll) {
  using D = DeviceKind;
  BestConfigTable t;
  t.engine = kind;
  t.kernel_poll = kernel_poll;
  if (kind == EngineKind::KernelAsyncQueue && !kernel_poll) {
    t.rows = {{D::UltraLowLatency, 2, 16, 4}, {D::NvmeSsd, 3, 16, 1}, {D::SataSsd, 1, 16, 2},
              {D::Hdd, 1, 16, 16}};
  } else if (kind == EngineKind::CompletionRing && !kernel_poll) {
    t.rows = {{D::UltraLowLatency, 3, 4, 2}, {D::NvmeSsd, 3, 16, 2}, {D::SataSsd, 1, 32, 8},
              {D::Hdd, 1, 1, 1}};
  } else if (kind == EngineKind::CompletionRing) {
    t.rows = {{D::UltraLowLatency, 2, 16, 2}, {D::NvmeSsd, 2, 32, 8}, {D::SataSsd, 1, 16, 4},
              {D::Hdd, 1, 1, 1}};
  } else {
    throw NoSuchPreset("no published best configurations for engine '" +
                       std::string(to_string(kind)) + (kernel_poll ? "+kernel-poll" : "") + "'");
  }
  return t;
}

EngineConfig preset_engine(const BestConfigTable& table, DeviceKind device) {
  const auto& r = table.row(device);
  EngineConfig e;
  e.kind = table.engine;
  e.queue_size = r.queue_size;
  e.batch_size = r.batch_size;
  e.kernel_poll = table.kernel_poll;
  return e;
}

const RunRecord& select_best(std::span<const RunRecord> records, double budget) {
  if (records.empty()) throw ConfigError("select_best needs at least one record");
  const bool any_ok = std::any_of(records.begin(), records.end(), [&](const RunRecord& r) {
    return static_cast<double>(r.latency.p999_us) <= budget;
  });
  // Strict "a is better than b".
  auto better = [&](const RunRecord& a, const RunRecord& b) {
    auto tie = [](const RunRecord& r) {
      return std::make_tuple(r.cpu.percent_of_core, r.engine.queue_size, std::string_view(r.label));
    };
    if (any_ok) {
      if (a.throughput_mbps != b.throughput_mbps) return a.throughput_mbps > b.throughput_mbps;
    } else {
      if (a.latency.p999_us != b.latency.p999_us) return a.latency.p999_us < b.latency.p999_us;
      if (a.throughput_mbps != b.throughput_mbps) return a.throughput_mbps > b.throughput_mbps;
    }
    return tie(a) < tie(b);
  };
  const RunRecord* best = nullptr;
  for (const auto& r : records) {
    if (any_ok && static_cast<double>(r.latency.p999_us) > budget) continue;
    if (!best || better(r, *best)) best = &r;
  }
  return *best;
}

ExperimentPlan parse_plan(std::istream& in) {
  const auto entries = parse_key_values(in);
  auto find = [&](std::string_view key) -> const std::string* {
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
    return nullptr;
  };

  std::uint64_t fill_seed = 1;
  if (auto v = find("fill_seed")) fill_seed = parse_u64(*v, "fill_seed");
  std::optional<Target> target;
  if (auto v = find("path")) {
    OpenOptions o;
    if (auto d = find("direct")) o.direct = parse_bool(*d, "direct");
    target = Target::open_file(*v, o, fill_seed);
  } else {
    const std::string* m = find("model");
    target = Target::simulated(model_from_name(m ? *m : "nvme"), fill_seed);
  }

  ExperimentPlan plan{WorkloadSpec(*target)};
  auto& w = plan.base_workload;
  auto& e = plan.base_engine;
  for (const auto& [key, value] : entries) {
    if (key == "name") plan.name = value;
    else if (key == "axis") plan.axis = sweep_axis_from_string(value);
    else if (key == "values") plan.values = parse_size_list(value);
    else if (key == "repeat") plan.repeat = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "engine") e.kind = engine_kind_from_string(value);
    else if (key == "queue") e.queue_size = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "batch") e.batch_size = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "fixed_files") e.fixed_files = parse_bool(value, key);
    else if (key == "fixed_buffers") e.fixed_buffers = parse_bool(value, key);
    else if (key == "kernel_poll") e.kernel_poll = parse_bool(value, key);
    else if (key == "pattern") w.pattern = access_pattern_from_string(value);
    else if (key == "block") w.block_size = parse_size(value);
    else if (key == "threads") w.threads = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "warmup") w.warmup_s = parse_double(value, key);
    else if (key == "duration") w.with_duration(parse_double(value, key));
    else if (key == "requests") w.with_requests(parse_u64(value, key));
    else if (key == "seed") w.seed = parse_u64(value, key);
    else if (key == "verify") w.verify = parse_bool(value, key);
    else if (key == "model" || key == "path" || key == "direct" || key == "fill_seed") continue;
    else throw ConfigError("unknown plan key '" + key + "'");
  }
  if (plan.name.empty()) plan.name = std::string(to_string(plan.axis)) + "-sweep";
  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path.string());
  return parse_plan(in);
}

std::vector<std::uint64_t> default_block_sizes() {
  std::vector<std::uint64_t> v;
  for (std::uint64_t b = 4096; b <= (32u << 20); b *= 2) v.push_back(b);
  return v;
}

std::vector<std::uint64_t> default_thread_counts() {
  return {1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 16, 24, 32, 48, 64};
}

std::vector<std::uint64_t> default_queue_sizes() {
  std::vector<std::uint64_t> v;
  for (std::uint64_t q = 1; q <= 256; q *= 2) v.push_back(q);
  return v;
}

std::vector<std::uint64_t> default_batch_sizes(std::uint32_t queue_size) {
  std::vector<std::uint64_t> v;
  for (std::uint64_t b = 1; b <= queue_size; b *= 2) v.push_back(b);
  return v;
}

std::vector<std::string> builtin_plan_names() {
  return {"single-read", "whole-scan", "thread-sweep", "queue-sweep", "batch-sweep", "paper-best"};
}

std::vector<ExperimentPlan> builtin_plans(std::string_view name, const WorkloadSpec& base,
                                          const EngineConfig& engine, DeviceKind device) {
  const std::uint64_t capacity = base.target.capacity();
  auto make = [&](SweepAxis axis, std::vector<std::uint64_t> values) {
    ExperimentPlan p{base};
    p.name = std::string(name);
    p.axis = axis;
    p.values = std::move(values);
    p.base_engine = engine;
    return p;
  };
  auto async_engine = [&] {
    EngineConfig e = engine;
    if (!is_async(e.kind)) e = EngineConfig{.kind = EngineKind::KernelAsyncQueue};
    return e;
  };

  std::vector<ExperimentPlan> plans;
  if (name == "single-read") {
    std::vector<std::uint64_t> blocks;
    for (auto b : default_block_sizes())
      if (b <= capacity) blocks.push_back(b);
    auto p = make(SweepAxis::BlockSize, blocks);
    p.base_workload.threads = 1;
    if (p.base_engine.kind != EngineKind::PolledRead) p.base_engine = EngineConfig{};
    plans.push_back(std::move(p));
  } else if (name == "whole-scan") {
    constexpr std::uint64_t kPoints = 16;
    const std::uint64_t blocks = capacity / base.block_size;
    std::vector<std::uint64_t> offsets;
    for (std::uint64_t i = 0; i < kPoints && i < blocks; ++i)
      offsets.push_back(blocks * i / kPoints * base.block_size);
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    auto p = make(SweepAxis::Offset, offsets);
    p.base_workload.threads = 1;
    p.base_engine = EngineConfig{};
    plans.push_back(std::move(p));
  } else if (name == "thread-sweep") {
    auto p = make(SweepAxis::Threads, default_thread_counts());
    if (!is_async(p.base_engine.kind)) p.base_engine = EngineConfig{.kind = EngineKind::ThreadPoolSync};
    plans.push_back(std::move(p));
  } else if (name == "queue-sweep") {
    auto p = make(SweepAxis::QueueSize, default_queue_sizes());
    p.base_engine = async_engine();
    p.base_engine.batch_size = 1;
    plans.push_back(std::move(p));
  } else if (name == "batch-sweep") {
    auto p = make(SweepAxis::BatchSize, {});
    p.base_engine = async_engine();
    if (p.base_engine.queue_size == 1) p.base_engine.queue_size = 64;
    p.values = default_batch_sizes(p.base_engine.queue_size);
    p.base_engine.batch_size = 1;
    plans.push_back(std::move(p));
  } else if (name == "paper-best") {
    const std::pair<EngineKind, bool> tables[] = {{EngineKind::KernelAsyncQueue, false},
                                                  {EngineKind::CompletionRing, false},
                                                  {EngineKind::CompletionRing, true}};
    for (const auto& [kind, poll] : tables) {
      const auto table = paper_best_configs(kind, poll);
      auto p = make(SweepAxis::Threads, {table.row(device).threads});
      p.base_engine = preset_engine(table, device);
      plans.push_back(std::move(p));
    }
  } else {
    throw ConfigError("unknown plan '" + std::string(name) + "'");
  }
  return plans;
}

std::string scheduler_command(std::string_view device, std::string_view scheduler) {
  return "echo " + std::string(scheduler) + " > /sys/block/" + std::string(device) +
         "/queue/scheduler";
}

}  // namespace readbench
