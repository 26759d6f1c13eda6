// Command-line front end: prepare and verify test files, run single
// experiments or sweeps, and render reports.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "readbench/engines.hpp"
#include "readbench/errors.hpp"
#include "readbench/kv.hpp"
#include "readbench/report.hpp"
#include "readbench/sweep.hpp"

using namespace readbench;

namespace {

enum Exit { kOk = 0, kRunError = 1, kUsage = 2, kUnsupported = 3 };

struct TargetArgs {
  std::string path;
  std::string model;
  std::uint64_t fill_seed = 1;
  bool buffered = false;
  bool direct = false;

  void add(CLI::App* cmd) {
    auto* p = cmd->add_option("--path", path, "file or block device to read");
    auto* m = cmd->add_option("--model", model, "simulated device: hdd, ssd, nvme, ull, or a model file");
    p->excludes(m);
    cmd->add_option("--fill-seed", fill_seed, "seed the file was prepared with")->capture_default_str();
    auto* b = cmd->add_flag("--buffered", buffered, "read through the page cache");
    auto* d = cmd->add_flag("--direct", direct, "bypass the page cache (default)");
    b->excludes(d);
  }

  bool simulated() const { return path.empty(); }

  Target open(bool polled) const {
    if (!path.empty()) return Target::open_file(path, {.direct = !buffered, .polled_hint = polled}, fill_seed);
    return Target::simulated(model_from_name(model.empty() ? "nvme" : model), fill_seed);
  }
};

struct WorkloadArgs {
  std::string pattern = "random";
  std::string block = "4K";
  std::uint32_t threads = 1;
  double warmup = -1;
  double duration = 0;
  std::uint64_t requests = 0;
  std::uint64_t seed = 1;
  bool verify = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--pattern", pattern, "random or sequential")->capture_default_str();
    cmd->add_option("--block", block, "block size, e.g. 4K or 1M")->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads")->capture_default_str();
    cmd->add_option("--warmup", warmup, "warm-up seconds (default 5, or 0 for simulated targets)");
    auto* d = cmd->add_option("--duration", duration, "measured seconds");
    auto* r = cmd->add_option("--requests", requests, "measured request budget");
    d->excludes(r);
    cmd->add_option("--seed", seed, "offset stream seed")->capture_default_str();
    cmd->add_flag("--verify", verify, "check every block against the fill pattern");
  }

  // Desk-scale defaults for simulated targets; the measurement method's
  // defaults (5 s warm-up, 60 s runs) for real ones.
  WorkloadSpec build(Target target, bool simulated) const {
    WorkloadSpec w(std::move(target));
    w.pattern = access_pattern_from_string(pattern);
    w.block_size = parse_size(block);
    w.threads = threads;
    w.seed = seed;
    w.verify = verify;
    w.warmup_s = warmup >= 0 ? warmup : (simulated ? 0.0 : 5.0);
    if (requests > 0) w.with_requests(requests);
    else if (duration > 0) w.with_duration(duration);
    else if (simulated) w.with_requests(10000);
    else w.with_duration(60.0);
    return w;
  }
};

struct EngineArgs {
  std::string engine = "sync";
  std::uint32_t queue = 1;
  std::uint32_t batch = 1;
  bool fixed_files = false;
  bool fixed_buffers = false;
  bool kernel_poll = false;
  bool polled = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--engine", engine, "sync, polled, pool, aio or uring")->capture_default_str();
    cmd->add_option("--queue", queue, "queue size per thread (async engines)")->capture_default_str();
    cmd->add_option("--batch", batch, "completions awaited per harvest (async engines)")->capture_default_str();
    cmd->add_flag("--fixed-files", fixed_files, "register the file with the ring");
    cmd->add_flag("--fixed-buffers", fixed_buffers, "register buffers with the ring");
    cmd->add_flag("--kernel-poll", kernel_poll, "submit through a kernel poll thread");
    cmd->add_flag("--polled", polled, "polled-completion reads (sync engine)");
  }

  EngineConfig build(std::uint32_t threads) const {
    EngineConfig e;
    e.kind = engine_kind_from_string(engine);
    if (polled) {
      if (e.kind != EngineKind::SyncRead && e.kind != EngineKind::PolledRead)
        throw ConfigError("--polled applies to the sync engine");
      e.kind = EngineKind::PolledRead;
    }
    if (e.kind == EngineKind::SyncRead && threads > 1) e.kind = EngineKind::ThreadPoolSync;
    e.queue_size = queue;
    e.batch_size = batch;
    e.fixed_files = fixed_files;
    e.fixed_buffers = fixed_buffers;
    e.kernel_poll = kernel_poll;
    e.validate();
    return e;
  }
};

void print_record(const RunRecord& r) {
  std::printf("%-16s %s block=%s threads=%u requests=%llu\n", r.label.c_str(), r.workload.target.c_str(),
              format_size(r.workload.block_size).c_str(), r.workload.threads,
              static_cast<unsigned long long>(r.latency.count));
  std::printf("  throughput %.2f MB/s  latency us: min %llu mean %.1f p99 %llu p99.9 %llu max %llu  cpu %.1f%%\n",
              r.throughput_mbps, static_cast<unsigned long long>(r.latency.min_us), r.latency.mean_us,
              static_cast<unsigned long long>(r.latency.p99_us),
              static_cast<unsigned long long>(r.latency.p999_us),
              static_cast<unsigned long long>(r.latency.max_us), r.cpu.percent_of_core);
  if (!r.notes.empty()) std::printf("  notes: %s\n", r.notes.c_str());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const EngineUnsupported& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUnsupported;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const LabelParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRunError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"readbench: storage read-path benchmark"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "write a test file filled with the verification pattern");
  std::string prep_path, prep_size;
  std::uint64_t prep_seed = 1;
  prepare->add_option("--path", prep_path, "file to create")->required();
  prepare->add_option("--size", prep_size, "size, a multiple of 4K (e.g. 64M)")->required();
  prepare->add_option("--seed", prep_seed, "fill seed")->capture_default_str();

  // verify
  auto* verify = app.add_subcommand("verify", "check a prepared file against its fill seed");
  std::string ver_path;
  std::uint64_t ver_seed = 1;
  verify->add_option("--path", ver_path, "file to check")->required();
  verify->add_option("--seed", ver_seed, "fill seed")->capture_default_str();

  // run
  auto* runc = app.add_subcommand("run", "run one experiment");
  TargetArgs run_target;
  WorkloadArgs run_work;
  EngineArgs run_engine;
  std::string run_out;
  bool run_fallback = false;
  run_target.add(runc);
  run_work.add(runc);
  run_engine.add(runc);
  runc->add_option("--out", run_out, "append the record to this JSON-lines store");
  runc->add_flag("--fallback-sync", run_fallback, "use the thread pool if the async interface is missing");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a named plan or a plan file");
  TargetArgs sweep_target;
  WorkloadArgs sweep_work;
  EngineArgs sweep_engine;
  std::string plan_name, sweep_out, device_class = "nvme", timeline_out;
  double window = 0.25;
  sweep->add_option("--plan", plan_name, "single-read, whole-scan, thread-sweep, queue-sweep, batch-sweep, "
                                         "paper-best, or a plan file")->required();
  sweep->add_option("--out", sweep_out, "JSON-lines store to append to")->required();
  sweep->add_option("--device-class", device_class, "preset rows for real targets: hdd, ssd, nvme, ull")
      ->capture_default_str();
  sweep->add_option("--timeline", timeline_out, "whole-scan: also write the windowed throughput CSV");
  sweep->add_option("--window", window, "whole-scan timeline window, seconds")->capture_default_str();
  sweep_target.add(sweep);
  sweep_work.add(sweep);
  sweep_engine.add(sweep);

  // report
  auto* report = app.add_subcommand("report", "render tables and plots from a store");
  std::string rep_in, rep_scatter, rep_table, rep_points, rep_device = "<device>";
  double rep_budget = std::numeric_limits<double>::infinity();
  report->add_option("--in", rep_in, "JSON-lines store")->required();
  report->add_option("--scatter", rep_scatter, "SVG scatter summary to write");
  report->add_option("--points", rep_points, "CSV of the plotted points (default: next to the SVG)");
  report->add_option("--table", rep_table, "latency table CSV to write");
  report->add_option("--budget", rep_budget, "p99.9 budget in us for the best points");
  report->add_option("--scheduler-device", rep_device, "block device named in the scheduler hint");

  app.add_subcommand("list-engines", "probe kernel support for each engine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (prepare->parsed())
    return guarded([&] {
      const auto size = parse_size(prep_size);
      prepare_target(prep_path, size, prep_seed);
      std::printf("prepared %s: %s with seed %llu\n", prep_path.c_str(), format_size(size).c_str(),
                  static_cast<unsigned long long>(prep_seed));
      return kOk;
    });

  if (verify->parsed())
    return guarded([&] {
      const auto t = Target::open_file(ver_path, {.direct = false}, ver_seed);
      const auto rep = verify_target(t);
      if (rep.first_bad_offset) {
        std::printf("MISMATCH at byte offset %llu\n", static_cast<unsigned long long>(*rep.first_bad_offset));
        return kRunError;
      }
      std::printf("ok: %llu bytes match seed %llu\n", static_cast<unsigned long long>(rep.bytes_checked),
                  static_cast<unsigned long long>(ver_seed));
      return kOk;
    });

  if (runc->parsed())
    return guarded([&] {
      const auto engine = run_engine.build(run_work.threads);
      const auto w = run_work.build(run_target.open(engine.kind == EngineKind::PolledRead), run_target.simulated());
      RunOptions opts;
      opts.fallback_to_sync = run_fallback;
      const auto rec = readbench::run(w, engine, opts);
      print_record(rec);
      if (!run_out.empty()) write_records(run_out, std::span(&rec, 1));
      return kOk;
    });

  if (sweep->parsed())
    return guarded([&] {
      std::vector<ExperimentPlan> plans;
      const auto names = builtin_plan_names();
      const bool builtin = std::find(names.begin(), names.end(), plan_name) != names.end();
      const bool target_given = !sweep_target.path.empty() || !sweep_target.model.empty();
      if (builtin) {
        const auto w = sweep_work.build(sweep_target.open(false), sweep_target.simulated());
        EngineArgs ea = sweep_engine;
        const auto e = ea.build(1);
        const DeviceKind device = w.target.model() ? w.target.model()->kind : device_kind_from_string(device_class);
        plans = builtin_plans(plan_name, w, e, device);
      } else {
        plans.push_back(load_plan(plan_name));
        if (target_given) plans.back().base_workload.target = sweep_target.open(false);
      }

      std::size_t failures = 0;
      for (const auto& plan : plans) {
        std::printf("plan %s: %zu point(s) over %s\n", plan.name.c_str(), plan.values.size() * plan.repeat,
                    std::string(to_string(plan.axis)).c_str());
        const auto result = run_plan(plan, {}, [&](const RunRecord& r) {
          print_record(r);
          write_records(sweep_out, std::span(&r, 1));
        });
        for (const auto& err : result.errors)
          std::fprintf(stderr, "  %s=%llu (repeat %u) failed: %s\n", std::string(to_string(plan.axis)).c_str(),
                       static_cast<unsigned long long>(err.value), err.repetition, err.message.c_str());
        failures += result.errors.size();
      }

      if (plan_name == "whole-scan" && !timeline_out.empty()) {
        const auto& w = plans.front().base_workload;
        const auto tl = whole_scan(w.target, w.block_size, window, w.seed);
        std::string csv = "window,start_s,mbps\n";
        for (std::size_t i = 0; i < tl.mbps.size(); ++i)
          csv += std::to_string(i) + "," + format_double(static_cast<double>(i) * tl.window_s) + "," +
                 format_double(tl.mbps[i]) + "\n";
        write_text(timeline_out, csv);
        std::printf("whole scan: %llu bytes in %.2f s, %zu windows -> %s\n",
                    static_cast<unsigned long long>(tl.total_bytes), tl.elapsed_s, tl.mbps.size(),
                    timeline_out.c_str());
      }
      return failures == 0 ? kOk : kRunError;
    });

  if (report->parsed())
    return guarded([&] {
      const auto res = read_records(std::filesystem::path(rep_in));
      for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      if (res.skipped) std::fprintf(stderr, "warning: skipped %zu corrupt line(s)\n", res.skipped);
      std::printf("%zu record(s) in %s\n", res.records.size(), rep_in.c_str());
      if (res.records.empty()) return kRunError;
      ScatterOptions so;
      so.p999_budget_us = rep_budget;
      if (!rep_scatter.empty()) {
        write_text(rep_scatter, scatter_summary(res.records, so));
        std::string points = rep_points;
        if (points.empty()) points = std::filesystem::path(rep_scatter).replace_extension(".points.csv").string();
        write_text(points, scatter_points_csv(res.records, so));
        std::printf("scatter: %s (points: %s)\n", rep_scatter.c_str(), points.c_str());
      }
      if (!rep_table.empty()) {
        write_text(rep_table, latency_table(res.records));
        std::printf("table: %s\n", rep_table.c_str());
      }
      if (rep_scatter.empty() && rep_table.empty()) std::fputs(latency_table(res.records).c_str(), stdout);
      std::printf("I/O scheduler (root, whole host): %s\n", scheduler_command(rep_device).c_str());
      return kOk;
    });

  // list-engines
  return guarded([&] {
    for (const auto& s : probe_engines())
      std::printf("%-20s %-11s %s\n", s.name.c_str(), s.supported ? "supported" : "unsupported", s.detail.c_str());
    return kOk;
  });
}
