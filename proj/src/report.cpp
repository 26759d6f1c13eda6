#include "readbench/report.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "readbench/errors.hpp"
#include "readbench/kv.hpp"
#include "readbench/sweep.hpp"

namespace readbench {

using Json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

// --- store -----------------------------------------------------------------

constexpr std::string_view kKnownKeys[] = {"schema",  "label",      "started_at", "notes",
                                           "workload", "engine",    "throughput_mbps",
                                           "latency", "cpu",        "diagnostics"};

Json to_json(const WorkloadInfo& w) {
  Json j;
  j["target"] = w.target;
  j["capacity"] = w.capacity;
  j["direct"] = w.direct;
  j["pattern"] = std::string(to_string(w.pattern));
  j["block_size"] = w.block_size;
  j["threads"] = w.threads;
  j["warmup_s"] = w.warmup_s;
  j["duration_s"] = w.duration_s ? Json(*w.duration_s) : Json(nullptr);
  j["request_budget"] = w.request_budget ? Json(*w.request_budget) : Json(nullptr);
  j["seed"] = w.seed;
  j["verify"] = w.verify;
  j["start_offset"] = w.start_offset;
  return j;
}

Json to_json(const EngineConfig& e) {
  return Json{{"kind", std::string(to_string(e.kind))}, {"queue_size", e.queue_size},
              {"batch_size", e.batch_size},             {"fixed_files", e.fixed_files},
              {"fixed_buffers", e.fixed_buffers},       {"kernel_poll", e.kernel_poll}};
}

template <typename T>
void get(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  j.at(key).get_to(out);
}

template <typename T>
void get_optional(const Json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  if (j.at(key).is_null()) out.reset();
  else out = j.at(key).get<T>();
}

void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("store write: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

// --- scatter ---------------------------------------------------------------

constexpr const char* kShapes[] = {"circle", "square", "triangle", "diamond", "down", "hexagon"};
constexpr double kCpuScaleMax = 400.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string shade(double cpu_percent) {
  // Light to dark blue as CPU use rises.
  const double t = std::clamp(cpu_percent / kCpuScaleMax, 0.0, 1.0);
  auto lerp = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", lerp(0xde, 0x08), lerp(0xeb, 0x30), lerp(0xf7, 0x6b));
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string marker(std::string_view shape, double x, double y, double r, const std::string& fill,
                   bool best) {
  const std::string style = " fill=\"" + fill + "\" stroke=\"" + (best ? "#d62728" : "#333333") +
                            "\" stroke-width=\"" + (best ? "2.00" : "1.00") + "\"";
  auto polygon = [&](std::initializer_list<std::pair<double, double>> pts) {
    std::string p = "<polygon points=\"";
    bool first = true;
    for (auto [dx, dy] : pts) {
      if (!first) p += ' ';
      first = false;
      p += fmt(x + dx * r) + "," + fmt(y + dy * r);
    }
    return p + "\"" + style + "/>";
  };
  if (shape == "circle")
    return "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"" + fmt(r) + "\"" + style + "/>";
  if (shape == "square")
    return "<rect x=\"" + fmt(x - r) + "\" y=\"" + fmt(y - r) + "\" width=\"" + fmt(2 * r) +
           "\" height=\"" + fmt(2 * r) + "\"" + style + "/>";
  if (shape == "triangle") return polygon({{0, -1.2}, {1.1, 0.8}, {-1.1, 0.8}});
  if (shape == "diamond") return polygon({{0, -1.3}, {1.3, 0}, {0, 1.3}, {-1.3, 0}});
  if (shape == "down") return polygon({{0, 1.2}, {1.1, -0.8}, {-1.1, -0.8}});
  return polygon({{1, 0}, {0.5, 0.87}, {-0.5, 0.87}, {-1, 0}, {-0.5, -0.87}, {0.5, -0.87}});
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string record_to_json(const RunRecord& r) {
  Json j;
  j["schema"] = kStoreSchemaVersion;
  j["label"] = r.label;
  j["started_at"] = r.started_at;
  j["notes"] = r.notes;
  j["workload"] = to_json(r.workload);
  j["engine"] = to_json(r.engine);
  j["throughput_mbps"] = r.throughput_mbps;
  j["latency"] = Json{{"count", r.latency.count},     {"min_us", r.latency.min_us},
                      {"max_us", r.latency.max_us},   {"mean_us", r.latency.mean_us},
                      {"p99_us", r.latency.p99_us},   {"p999_us", r.latency.p999_us}};
  j["cpu"] = Json{{"process_cpu", r.cpu.process_cpu}, {"external_cpu", r.cpu.external_cpu},
                  {"wall", r.cpu.wall},               {"percent_of_core", r.cpu.percent_of_core}};
  const auto& d = r.diagnostics;
  j["diagnostics"] = Json{{"requests", d.requests},
                          {"warmup_requests", d.warmup_requests},
                          {"bytes", d.bytes},
                          {"checksum", d.checksum},
                          {"blocks_verified", d.blocks_verified},
                          {"peak_outstanding", d.peak_outstanding},
                          {"harvests", d.harvests},
                          {"min_harvest", d.min_harvest},
                          {"stalls", d.stalls},
                          {"polled_fallbacks", d.polled_fallbacks},
                          {"partial", d.partial}};
  if (!r.extra_json.empty()) {
    const Json extra = Json::parse(r.extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it)
      if (!j.contains(it.key())) j[it.key()] = it.value();
  }
  return j.dump();
}

RunRecord record_from_json(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("record is not an object");
  RunRecord r;
  try {
    int schema = 0;
    get(j, "schema", schema);
    if (schema < 1 || schema > kStoreSchemaVersion)
      throw ConfigError("unsupported schema version " + std::to_string(schema));
    get(j, "label", r.label);
    get(j, "started_at", r.started_at);
    get(j, "notes", r.notes);
    get(j, "throughput_mbps", r.throughput_mbps);

    const Json& w = j.at("workload");
    get(w, "target", r.workload.target);
    get(w, "capacity", r.workload.capacity);
    get(w, "direct", r.workload.direct);
    r.workload.pattern = access_pattern_from_string(w.at("pattern").get<std::string>());
    get(w, "block_size", r.workload.block_size);
    get(w, "threads", r.workload.threads);
    get(w, "warmup_s", r.workload.warmup_s);
    get_optional(w, "duration_s", r.workload.duration_s);
    get_optional(w, "request_budget", r.workload.request_budget);
    get(w, "seed", r.workload.seed);
    get(w, "verify", r.workload.verify);
    get(w, "start_offset", r.workload.start_offset);

    const Json& e = j.at("engine");
    r.engine.kind = engine_kind_from_string(e.at("kind").get<std::string>());
    get(e, "queue_size", r.engine.queue_size);
    get(e, "batch_size", r.engine.batch_size);
    get(e, "fixed_files", r.engine.fixed_files);
    get(e, "fixed_buffers", r.engine.fixed_buffers);
    get(e, "kernel_poll", r.engine.kernel_poll);

    const Json& l = j.at("latency");
    get(l, "count", r.latency.count);
    get(l, "min_us", r.latency.min_us);
    get(l, "max_us", r.latency.max_us);
    get(l, "mean_us", r.latency.mean_us);
    get(l, "p99_us", r.latency.p99_us);
    get(l, "p999_us", r.latency.p999_us);

    const Json& c = j.at("cpu");
    get(c, "process_cpu", r.cpu.process_cpu);
    get(c, "external_cpu", r.cpu.external_cpu);
    get(c, "wall", r.cpu.wall);
    get(c, "percent_of_core", r.cpu.percent_of_core);

    const Json& d = j.at("diagnostics");
    get(d, "requests", r.diagnostics.requests);
    get(d, "warmup_requests", r.diagnostics.warmup_requests);
    get(d, "bytes", r.diagnostics.bytes);
    get(d, "checksum", r.diagnostics.checksum);
    get(d, "blocks_verified", r.diagnostics.blocks_verified);
    get(d, "peak_outstanding", r.diagnostics.peak_outstanding);
    get(d, "harvests", r.diagnostics.harvests);
    get(d, "min_harvest", r.diagnostics.min_harvest);
    get(d, "stalls", r.diagnostics.stalls);
    get(d, "polled_fallbacks", r.diagnostics.polled_fallbacks);
    get(d, "partial", r.diagnostics.partial);
  } catch (const Json::exception& ex) {
    throw ConfigError(std::string("bad record field: ") + ex.what());
  } catch (const Error& ex) {
    throw ConfigError(ex.what());
  }

  Json extra = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), it.key()) == std::end(kKnownKeys))
      extra[it.key()] = it.value();
  if (!extra.empty()) r.extra_json = extra.dump();
  return r;
}

void write_records(const std::filesystem::path& store, std::span<const RunRecord> records) {
  const int fd = ::open(store.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open store " + store.string() + ": " + std::strerror(errno));
  try {
    for (const auto& r : records) write_all(fd, record_to_json(r) + "\n");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

ReadResult read_records(std::istream& in) {
  ReadResult out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.records.push_back(record_from_json(line));
    } catch (const ConfigError& e) {
      ++out.skipped;
      out.warnings.push_back("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

ReadResult read_records(const std::filesystem::path& store) {
  std::ifstream in(store);
  if (!in) {
    if (!std::filesystem::exists(store)) return {};
    throw IoError("cannot read store " + store.string());
  }
  return read_records(in);
}

std::vector<ScatterPoint> scatter_points(std::span<const RunRecord> records,
                                         const ScatterOptions& options) {
  std::vector<std::uint64_t> blocks;
  for (const auto& r : records) blocks.push_back(r.workload.block_size);
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());

  std::vector<ScatterPoint> pts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ScatterPoint p;
    p.record = i;
    p.label = r.label;
    p.block_size = r.workload.block_size;
    p.throughput_mbps = r.throughput_mbps;
    p.p999_us = r.latency.p999_us;
    p.cpu_percent = r.cpu.percent_of_core;
    const auto rank = static_cast<std::size_t>(
        std::lower_bound(blocks.begin(), blocks.end(), p.block_size) - blocks.begin());
    p.shape = kShapes[rank % std::size(kShapes)];
    p.fill = shade(p.cpu_percent);
    pts.push_back(std::move(p));
  }
  for (auto b : blocks) {
    std::vector<RunRecord> group;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].workload.block_size == b) {
        group.push_back(records[i]);
        index.push_back(i);
      }
    const RunRecord& best = select_best(group, options.p999_budget_us);
    pts[index[static_cast<std::size_t>(&best - group.data())]].best = true;
  }
  return pts;
}

std::string scatter_summary(std::span<const RunRecord> records, const ScatterOptions& o) {
  if (records.empty()) throw ConfigError("scatter summary needs at least one record");
  const auto pts = scatter_points(records, o);

  const double left = 80, right = 220, top = 50, bottom = 60;
  const double pw = o.width - left - right, ph = o.height - top - bottom;

  double xmax = 0;
  std::uint64_t ymin = std::numeric_limits<std::uint64_t>::max(), ymax = 1;
  for (const auto& p : pts) {
    xmax = std::max(xmax, p.throughput_mbps);
    ymin = std::min(ymin, std::max<std::uint64_t>(p.p999_us, 1));
    ymax = std::max(ymax, p.p999_us);
  }
  xmax = xmax > 0 ? xmax * 1.05 : 1.0;
  const int dlo = static_cast<int>(std::floor(std::log10(static_cast<double>(ymin))));
  int dhi = static_cast<int>(std::ceil(std::log10(static_cast<double>(ymax))));
  if (dhi <= dlo) dhi = dlo + 1;
  auto sx = [&](double v) { return left + v / xmax * pw; };
  auto sy = [&](std::uint64_t v) {
    const double l = std::log10(static_cast<double>(std::max<std::uint64_t>(v, 1)));
    return top + ph - (l - dlo) / (dhi - dlo) * ph;
  };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
    << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
    << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(o.title) << "</text>\n"
    << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\""
    << fmt(ph) << "\" fill=\"none\" stroke=\"#000000\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double v = xmax * i / 5;
    s << "<line x1=\"" << fmt(sx(v)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(sx(v))
      << "\" y2=\"" << fmt(top + ph + 5) << "\" stroke=\"#000000\"/>"
      << "<text x=\"" << fmt(sx(v)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << fmt(v) << "</text>\n";
  }
  for (int d = dlo; d <= dhi; ++d) {
    const double y = top + ph - static_cast<double>(d - dlo) / (dhi - dlo) * ph;
    s << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
      << fmt(y) << "\" stroke=\"#dddddd\"/>"
      << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">1e" << d
      << "</text>\n";
  }
  s << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(o.height - 18.0)
    << "\" text-anchor=\"middle\">throughput, MB/s</text>\n"
    << "<text transform=\"translate(20," << fmt(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">p99.9 latency, us (log scale)</text>\n";

  // Regular points first so enlarged best points stay on top.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& p : pts) {
      if (p.best != (pass == 1)) continue;
      const double x = sx(p.throughput_mbps), y = sy(p.p999_us);
      s << "<g class=\"point" << (p.best ? " best" : "") << "\" data-label=\"" << xml_escape(p.label)
        << "\" data-block=\"" << p.block_size << "\">" << marker(p.shape, x, y, p.best ? 9.0 : 5.0, p.fill, p.best)
        << "<text x=\"" << fmt(x + 8) << "\" y=\"" << fmt(y - 8) << "\">" << xml_escape(p.label)
        << "</text></g>\n";
    }

  // Legend.
  const double lx = left + pw + 20;
  double ly = top + 10;
  s << "<g class=\"legend\">\n<text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly) << "\" font-weight=\"bold\">block size</text>\n";
  std::vector<std::uint64_t> blocks;
  for (const auto& p : pts) blocks.push_back(p.block_size);
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    ly += 20;
    s << marker(kShapes[i % std::size(kShapes)], lx + 6, ly - 4, 5.0, "#ffffff", false) << "<text x=\""
      << fmt(lx + 18) << "\" y=\"" << fmt(ly) << "\">" << format_size(blocks[i]) << "</text>\n";
  }
  ly += 30;
  s << "<text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly) << "\" font-weight=\"bold\">CPU, % of a core</text>\n";
  for (int i = 0; i <= 4; ++i) {
    ly += 18;
    const double cpu = kCpuScaleMax * i / 4;
    s << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly - 11) << "\" width=\"12\" height=\"12\" fill=\""
      << shade(cpu) << "\" stroke=\"#333333\"/><text x=\"" << fmt(lx + 18) << "\" y=\"" << fmt(ly) << "\">"
      << static_cast<int>(cpu) << (i == 4 ? "+" : "") << "</text>\n";
  }
  ly += 30;
  s << marker("circle", lx + 6, ly - 4, 9.0, "#ffffff", true) << "<text x=\"" << fmt(lx + 20) << "\" y=\""
    << fmt(ly) << "\">best per block size</text>\n</g>\n</svg>\n";
  return s.str();
}

std::string scatter_points_csv(std::span<const RunRecord> records, const ScatterOptions& options) {
  std::string out = "label,block_size,throughput_mbps,p999_us,cpu_percent,shape,fill,best\n";
  for (const auto& p : scatter_points(records, options))
    out += csv_field(p.label) + "," + std::to_string(p.block_size) + "," + format_double(p.throughput_mbps) +
           "," + std::to_string(p.p999_us) + "," + format_double(p.cpu_percent) + "," + p.shape + "," + p.fill +
           "," + (p.best ? "1" : "0") + "\n";
  return out;
}

std::string latency_table(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> rows;
  for (const auto& r : records) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const RunRecord* a, const RunRecord* b) {
    if (a->workload.block_size != b->workload.block_size)
      return a->workload.block_size < b->workload.block_size;
    return a->label < b->label;
  });
  std::string out = "block_size,label,count,min_us,mean_us,p99_us,p999_us,max_us,throughput_mbps\n";
  for (const auto* r : rows) {
    const auto& l = r->latency;
    out += std::to_string(r->workload.block_size) + "," + csv_field(r->label) + "," + std::to_string(l.count) +
           "," + std::to_string(l.min_us) + "," + format_double(l.mean_us) + "," + std::to_string(l.p99_us) +
           "," + std::to_string(l.p999_us) + "," + std::to_string(l.max_us) + "," +
           format_double(r->throughput_mbps) + "\n";
  }
  return out;
}

}  // namespace readbench
