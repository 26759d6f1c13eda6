#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace readbench {

enum class DeviceKind { Hdd, SataSsd, NvmeSsd, UltraLowLatency };

std::string_view to_string(DeviceKind kind);
DeviceKind device_kind_from_string(std::string_view name);

enum class JitterDistribution { None, Uniform, LognormalTail };

std::string_view to_string(JitterDistribution d);

/// Additive service-time noise. Uniform draws from [0, scale). LognormalTail
/// draws scale * exp(mu + sigma * Z), truncated at 10 * scale.
struct Jitter {
  JitterDistribution distribution = JitterDistribution::None;
  double scale_us = 0.0;
  double mu = -4.3;
  double sigma = 2.0;

  bool operator==(const Jitter&) const = default;
};

/// Occasional long stall (flash translation layer housekeeping).
struct Spike {
  double probability = 0.0;
  double duration_us = 0.0;

  bool operator==(const Spike&) const = default;
};

/// Parametric latency model of one device. HDD-only fields are ignored by the
/// solid-state kinds and vice versa.
struct DeviceModel {
  DeviceKind kind = DeviceKind::NvmeSsd;
  std::string name;
  std::uint64_t capacity = 0;

  // HDD geometry.
  double seek_min_us = 0.0;
  double seek_max_us = 0.0;
  double rotation_period_us = 0.0;
  double outer_rate = 0.0;  // bytes/s at offset 0
  double inner_rate = 0.0;  // bytes/s at capacity

  // Solid state.
  double base_latency_us = 0.0;
  double per_byte_us = 0.0;

  std::uint32_t parallelism = 1;
  Jitter jitter;
  Spike spike;
  /// Multiplier applied to the jitter draw on the polled path.
  double polled_jitter_factor = 0.2;

  /// Shared link between device and host; 0 disables it. Each request holds
  /// the link for len / channel_rate plus a fixed per-command overhead.
  double channel_rate = 0.0;
  double channel_overhead_us = 0.0;

  /// Service times of requests starting before this instant are multiplied by
  /// the factor. Used to model a device that is slow right after start.
  double slow_start_us = 0.0;
  double slow_start_factor = 1.0;

  std::uint64_t rng_seed = 1;
  std::size_t queue_bound = 1u << 20;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  bool operator==(const DeviceModel&) const = default;

  static DeviceModel preset(DeviceKind kind);
  /// Solid-state device with a fixed service time and no noise.
  static DeviceModel fixed_latency(double latency_us, std::uint32_t parallelism,
                                   std::uint64_t capacity);
};

/// Mutable simulation state of one device.
struct SimState {
  std::uint64_t head_position = 0;
  std::uint64_t last_end = 0;
  std::int64_t clock_ns = 0;
  std::mt19937_64 rng;
};

struct ServiceOptions {
  bool polled = false;
  std::int64_t start_ns = 0;
};

/// Time the device spends on one request, microseconds. Advances the head and
/// consumes model randomness from `state`.
double service_time(const DeviceModel& model, SimState& state, std::uint64_t offset,
                    std::uint64_t len, ServiceOptions options = {});

struct SimRequest {
  std::uint64_t id = 0;
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
  std::int64_t submit_ns = 0;
  bool polled = false;
};

struct SimCompletion {
  SimRequest request;
  std::int64_t start_ns = 0;
  std::int64_t complete_ns = 0;
};

/// Event-driven completion scheduler. At most `parallelism` requests are in
/// service; the rest wait in FIFO order.
class SimulatedDevice {
 public:
  explicit SimulatedDevice(DeviceModel model);

  /// Throws Backpressure when the wait queue is full. submit_ns must not be
  /// earlier than the device clock.
  void submit(const SimRequest& request);

  /// Requests submitted together are dispatched in ascending offset order, the
  /// way the block layer sorts a plugged batch.
  void submit_batch(std::span<const SimRequest> requests);

  /// Completes every request due at the next event time and advances the clock
  /// to it. Empty result when nothing is in flight.
  std::vector<SimCompletion> advance();

  /// Time of the next internal event. No completion happens earlier.
  std::optional<std::int64_t> next_event_ns() const;
  std::int64_t clock_ns() const noexcept { return state_.clock_ns; }
  std::size_t in_flight() const noexcept { return in_flight_.size(); }
  std::size_t waiting() const noexcept { return waiting_.size(); }
  std::size_t peak_in_flight() const noexcept { return peak_in_flight_; }
  bool idle() const noexcept { return in_flight_.empty() && waiting_.empty(); }

  const DeviceModel& model() const noexcept { return model_; }
  const SimState& state() const noexcept { return state_; }

 private:
  struct Event {
    std::int64_t complete_ns;
    std::uint64_t sequence;
    SimRequest request;
    std::int64_t start_ns;
    /// Still in media service; the link stage follows.
    bool on_media;

    bool operator>(const Event& o) const {
      return complete_ns != o.complete_ns ? complete_ns > o.complete_ns : sequence > o.sequence;
    }
  };

  void start(const SimRequest& request, std::int64_t at_ns);
  void enter_link();

  DeviceModel model_;
  SimState state_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> in_flight_;
  std::deque<SimRequest> waiting_;
  std::int64_t channel_free_ns_ = 0;
  std::uint64_t sequence_ = 0;
  std::size_t peak_in_flight_ = 0;
};

/// Key-value model files: one "key = value" per line, '#' comments. A file
/// starts from the preset named by `kind` and overrides individual fields.
DeviceModel parse_model(std::istream& in);
DeviceModel load_model(const std::filesystem::path& path);
std::string format_model(const DeviceModel& model);

/// "hdd", "ssd", "nvme", "ull", or a path to a model file.
DeviceModel model_from_name(std::string_view name_or_path);

}  // namespace readbench
