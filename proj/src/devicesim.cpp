#include "readbench/devicesim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "readbench/errors.hpp"
#include "readbench/kv.hpp"

namespace readbench {

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Hdd: return "hdd";
    case DeviceKind::SataSsd: return "ssd";
    case DeviceKind::NvmeSsd: return "nvme";
    case DeviceKind::UltraLowLatency: return "ull";
  }
  return "?";
}

DeviceKind device_kind_from_string(std::string_view name) {
  if (name == "hdd") return DeviceKind::Hdd;
  if (name == "ssd" || name == "sata") return DeviceKind::SataSsd;
  if (name == "nvme") return DeviceKind::NvmeSsd;
  if (name == "ull" || name == "optane") return DeviceKind::UltraLowLatency;
  throw ConfigError("unknown device kind '" + std::string(name) + "'");
}

std::string_view to_string(JitterDistribution d) {
  switch (d) {
    case JitterDistribution::None: return "none";
    case JitterDistribution::Uniform: return "uniform";
    case JitterDistribution::LognormalTail: return "lognormal-tail";
  }
  return "?";
}

void DeviceModel::validate() const {
  auto fail = [&](const std::string& what) {
    throw ConfigError("device model '" + name + "': " + what);
  };
  if (capacity == 0 || capacity % 4096 != 0) fail("capacity must be a positive multiple of 4096");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (spike.probability < 0.0 || spike.probability > 1.0) fail("spike probability outside [0,1]");
  if (jitter.scale_us < 0.0 || spike.duration_us < 0.0) fail("negative jitter or spike");
  if (channel_rate < 0.0 || channel_overhead_us < 0.0) fail("negative channel parameters");
  if (slow_start_factor <= 0.0) fail("slow_start_factor must be positive");
  if (kind == DeviceKind::Hdd) {
    if (seek_min_us < 0.0 || seek_min_us > seek_max_us) fail("need 0 <= seek_min <= seek_max");
    if (rotation_period_us < 0.0) fail("negative rotation period");
    if (!(outer_rate > 0.0) || !(inner_rate > 0.0)) fail("transfer rates must be positive");
  } else {
    if (base_latency_us < 0.0 || per_byte_us < 0.0) fail("negative base latency or per-byte cost");
  }
}

namespace {

constexpr std::uint64_t round_down_4k(double bytes) {
  return static_cast<std::uint64_t>(bytes) / 4096 * 4096;
}

}  // namespace

// Calibrated so single-request statistics land on the published device
// averages; see DeviceModel field docs for what each term contributes.
DeviceModel DeviceModel::preset(DeviceKind kind) {
  DeviceModel m;
  m.kind = kind;
  m.name = std::string(to_string(kind));
  switch (kind) {
    case DeviceKind::Hdd:
      m.capacity = round_down_4k(12e12);
      m.seek_min_us = 2000;
      m.seek_max_us = 16000;
      m.rotation_period_us = 8000;
      m.outer_rate = 250e6;
      m.inner_rate = 150e6;
      m.parallelism = 1;
      break;
    case DeviceKind::SataSsd:
      m.capacity = round_down_4k(1.92e12);
      m.base_latency_us = 117;
      m.per_byte_us = 1e6 / 250e6;
      m.parallelism = 32;
      m.jitter = {JitterDistribution::LognormalTail, 20.0};
      m.spike = {1e-4, 48000};
      m.channel_rate = 530e6;
      m.channel_overhead_us = 5.0;
      break;
    case DeviceKind::NvmeSsd:
      m.capacity = round_down_4k(3.2e12);
      m.base_latency_us = 90;
      m.per_byte_us = 1e6 / 1.4e9;
      m.parallelism = 128;
      m.jitter = {JitterDistribution::LognormalTail, 40.0};
      m.channel_rate = 3.2e9;
      m.channel_overhead_us = 0.358;
      break;
    case DeviceKind::UltraLowLatency:
      m.capacity = round_down_4k(750e9);
      m.base_latency_us = 10;
      m.per_byte_us = 1e6 / 2.3e9;
      m.parallelism = 16;
      m.jitter = {JitterDistribution::LognormalTail, 4.0};
      m.channel_rate = 2.3e9;
      m.channel_overhead_us = 0.081;
      break;
  }
  return m;
}

DeviceModel DeviceModel::fixed_latency(double latency_us, std::uint32_t parallelism,
                                       std::uint64_t capacity) {
  DeviceModel m;
  m.kind = DeviceKind::NvmeSsd;
  m.name = "fixed";
  m.capacity = capacity;
  m.base_latency_us = latency_us;
  m.parallelism = parallelism;
  return m;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double jitter_draw(const Jitter& j, std::mt19937_64& rng) {
  switch (j.distribution) {
    case JitterDistribution::None: return 0.0;
    case JitterDistribution::Uniform: return j.scale_us * uniform01(rng);
    case JitterDistribution::LognormalTail:
      return std::min(j.scale_us * std::exp(j.mu + j.sigma * standard_normal(rng)),
                      10.0 * j.scale_us);
  }
  return 0.0;
}

}  // namespace

double service_time(const DeviceModel& model, SimState& state, std::uint64_t offset,
                    std::uint64_t len, ServiceOptions options) {
  double us = 0.0;
  if (model.kind == DeviceKind::Hdd) {
    const double cap = static_cast<double>(model.capacity);
    const double pos = static_cast<double>(offset) / cap;
    const double rate = model.outer_rate + (model.inner_rate - model.outer_rate) * pos;
    const double transfer = static_cast<double>(len) / rate * 1e6;
    if (offset == state.last_end) {
      us = transfer;
    } else {
      const double distance =
          std::abs(static_cast<double>(offset) - static_cast<double>(state.head_position)) / cap;
      const double seek = model.seek_min_us + (model.seek_max_us - model.seek_min_us) * distance;
      const double rotation = model.rotation_period_us * uniform01(state.rng);
      us = seek + rotation + transfer;
    }
    state.head_position = offset + len;
  } else {
    double jitter = jitter_draw(model.jitter, state.rng);
    if (options.polled) jitter *= model.polled_jitter_factor;
    us = model.base_latency_us + static_cast<double>(len) * model.per_byte_us + jitter;
    if (model.spike.probability > 0.0 && uniform01(state.rng) < model.spike.probability)
      us += model.spike.duration_us;
  }
  state.last_end = offset + len;
  if (options.start_ns < static_cast<std::int64_t>(model.slow_start_us * 1000.0))
    us *= model.slow_start_factor;
  return us;
}

SimulatedDevice::SimulatedDevice(DeviceModel model) : model_(std::move(model)) {
  model_.validate();
  state_.rng.seed(model_.rng_seed);
}

void SimulatedDevice::submit(const SimRequest& request) {
  if (request.submit_ns < state_.clock_ns)
    throw Error("simulated submit before device clock");
  if (in_flight_.size() < model_.parallelism) {
    start(request, request.submit_ns);
    return;
  }
  if (waiting_.size() >= model_.queue_bound)
    throw Backpressure("simulated device wait queue full (" + std::to_string(model_.queue_bound) +
                       ")");
  waiting_.push_back(request);
}

void SimulatedDevice::submit_batch(std::span<const SimRequest> requests) {
  std::vector<SimRequest> sorted(requests.begin(), requests.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SimRequest& a, const SimRequest& b) { return a.offset < b.offset; });
  for (const auto& r : sorted) submit(r);
}

void SimulatedDevice::start(const SimRequest& request, std::int64_t at_ns) {
  const double us = service_time(model_, state_, request.offset, request.len,
                                 {.polled = request.polled, .start_ns = at_ns});
  const std::int64_t media_done = at_ns + static_cast<std::int64_t>(std::llround(us * 1000.0));
  in_flight_.push({media_done, sequence_++, request, at_ns, model_.channel_rate > 0.0});
  peak_in_flight_ = std::max(peak_in_flight_, in_flight_.size());
}

void SimulatedDevice::enter_link() {
  // Requests take the shared link in the order their media work finishes; the
  // transfer overlaps media time when the link is idle.
  Event e = in_flight_.top();
  in_flight_.pop();
  const auto transfer = static_cast<std::int64_t>(std::llround(
      (static_cast<double>(e.request.len) / model_.channel_rate * 1e6 + model_.channel_overhead_us) *
      1000.0));
  e.complete_ns = std::max(e.complete_ns, channel_free_ns_ + transfer);
  channel_free_ns_ = e.complete_ns;
  e.sequence = sequence_++;
  e.on_media = false;
  in_flight_.push(e);
}

std::optional<std::int64_t> SimulatedDevice::next_event_ns() const {
  if (in_flight_.empty()) return std::nullopt;
  return in_flight_.top().complete_ns;
}

std::vector<SimCompletion> SimulatedDevice::advance() {
  std::vector<SimCompletion> done;
  while (!in_flight_.empty() && in_flight_.top().on_media) enter_link();
  if (in_flight_.empty()) return done;
  const std::int64_t now = in_flight_.top().complete_ns;
  while (!in_flight_.empty() && in_flight_.top().complete_ns == now) {
    if (in_flight_.top().on_media) {
      enter_link();
      continue;
    }
    const Event& e = in_flight_.top();
    done.push_back({e.request, e.start_ns, e.complete_ns});
    in_flight_.pop();
  }
  state_.clock_ns = now;
  while (!waiting_.empty() && in_flight_.size() < model_.parallelism) {
    start(waiting_.front(), now);
    waiting_.pop_front();
  }
  return done;
}

DeviceModel parse_model(std::istream& in) {
  const auto entries = parse_key_values(in);
  DeviceModel m;
  auto it = std::find_if(entries.begin(), entries.end(),
                         [](const auto& kv) { return kv.first == "kind"; });
  if (it == entries.end()) throw ConfigError("model file needs a 'kind' line");
  m = DeviceModel::preset(device_kind_from_string(it->second));

  for (const auto& [key, value] : entries) {
    auto num = [&] { return parse_double(value, key); };
    if (key == "kind") continue;
    else if (key == "name") m.name = value;
    else if (key == "capacity") m.capacity = parse_size(value);
    else if (key == "seek_min_us") m.seek_min_us = num();
    else if (key == "seek_max_us") m.seek_max_us = num();
    else if (key == "rotation_period_us") m.rotation_period_us = num();
    else if (key == "outer_rate") m.outer_rate = num();
    else if (key == "inner_rate") m.inner_rate = num();
    else if (key == "base_latency_us") m.base_latency_us = num();
    else if (key == "per_byte_us") m.per_byte_us = num();
    else if (key == "parallelism") m.parallelism = static_cast<std::uint32_t>(parse_u64(value, key));
    else if (key == "jitter") {
      if (value == "none") m.jitter.distribution = JitterDistribution::None;
      else if (value == "uniform") m.jitter.distribution = JitterDistribution::Uniform;
      else if (value == "lognormal-tail") m.jitter.distribution = JitterDistribution::LognormalTail;
      else throw ConfigError("unknown jitter distribution '" + value + "'");
    }
    else if (key == "jitter_scale_us") m.jitter.scale_us = num();
    else if (key == "jitter_mu") m.jitter.mu = num();
    else if (key == "jitter_sigma") m.jitter.sigma = num();
    else if (key == "spike_probability") m.spike.probability = num();
    else if (key == "spike_duration_us") m.spike.duration_us = num();
    else if (key == "polled_jitter_factor") m.polled_jitter_factor = num();
    else if (key == "channel_rate") m.channel_rate = num();
    else if (key == "channel_overhead_us") m.channel_overhead_us = num();
    else if (key == "slow_start_us") m.slow_start_us = num();
    else if (key == "slow_start_factor") m.slow_start_factor = num();
    else if (key == "rng_seed") m.rng_seed = parse_u64(value, key);
    else if (key == "queue_bound") m.queue_bound = parse_u64(value, key);
    else throw ConfigError("unknown model key '" + key + "'");
  }
  m.validate();
  return m;
}

DeviceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  return parse_model(in);
}

std::string format_model(const DeviceModel& m) {
  // Shortest text that reads back to the same double.
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  std::ostringstream out;
  out << "kind = " << to_string(m.kind) << '\n'
      << "name = " << m.name << '\n'
      << "capacity = " << m.capacity << '\n'
      << "seek_min_us = " << num(m.seek_min_us) << '\n'
      << "seek_max_us = " << num(m.seek_max_us) << '\n'
      << "rotation_period_us = " << num(m.rotation_period_us) << '\n'
      << "outer_rate = " << num(m.outer_rate) << '\n'
      << "inner_rate = " << num(m.inner_rate) << '\n'
      << "base_latency_us = " << num(m.base_latency_us) << '\n'
      << "per_byte_us = " << num(m.per_byte_us) << '\n'
      << "parallelism = " << m.parallelism << '\n'
      << "jitter = " << to_string(m.jitter.distribution) << '\n'
      << "jitter_scale_us = " << num(m.jitter.scale_us) << '\n'
      << "jitter_mu = " << num(m.jitter.mu) << '\n'
      << "jitter_sigma = " << num(m.jitter.sigma) << '\n'
      << "spike_probability = " << num(m.spike.probability) << '\n'
      << "spike_duration_us = " << num(m.spike.duration_us) << '\n'
      << "polled_jitter_factor = " << num(m.polled_jitter_factor) << '\n'
      << "channel_rate = " << num(m.channel_rate) << '\n'
      << "channel_overhead_us = " << num(m.channel_overhead_us) << '\n'
      << "slow_start_us = " << num(m.slow_start_us) << '\n'
      << "slow_start_factor = " << num(m.slow_start_factor) << '\n'
      << "rng_seed = " << m.rng_seed << '\n'
      << "queue_bound = " << m.queue_bound << '\n';
  return out.str();
}

DeviceModel model_from_name(std::string_view name_or_path) {
  if (name_or_path == "hdd" || name_or_path == "ssd" || name_or_path == "nvme" ||
      name_or_path == "ull")
    return DeviceModel::preset(device_kind_from_string(name_or_path));
  return load_model(std::filesystem::path(name_or_path));
}

}  // namespace readbench
