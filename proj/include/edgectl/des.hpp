#pragma once

// Discrete-event kernel: integer-nanosecond virtual clock, (time, seq) ordered
// event queue and named random streams derived from one master seed.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgectl {

using Duration = std::chrono::nanoseconds;

struct SimClock {
  using rep = std::int64_t;
  using period = std::nano;
  using duration = Duration;
  using time_point = std::chrono::time_point<SimClock, Duration>;
  static constexpr bool is_steady = true;
};

using SimTime = SimClock::time_point;

inline constexpr SimTime kSimStart{};

/// Rounds to the nearest nanosecond.
Duration from_seconds(double s);
Duration from_millis(double ms);
double to_seconds(Duration d);
double to_millis(Duration d);
inline double to_seconds(SimTime t) { return to_seconds(t.time_since_epoch()); }

/// Random stream with a pinned algorithm: the engine seeds a std::mt19937_64
/// with splitmix64(master_seed ^ splitmix64(fnv1a64(label))). Uniforms take the
/// top 53 bits; normals use the cosine branch of Box-Muller, one pair of
/// uniforms per draw. Every draw therefore consumes exactly two words for a
/// normal and one for a uniform on every platform.
class RngStream {
 public:
  RngStream(std::string label, std::uint64_t seed);

  const std::string& label() const { return label_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double lognormal(double mu, double sigma);

 private:
  std::string label_;
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label);

using EventId = std::uint64_t;

/// Raised when a handler throws; wraps the original exception.
class EventError : public std::runtime_error {
 public:
  EventError(const std::string& what, SimTime at, EventId seq, std::string target)
      : std::runtime_error(what), at_(at), seq_(seq), target_(std::move(target)) {}
  SimTime at() const { return at_; }
  EventId seq() const { return seq_; }
  const std::string& target() const { return target_; }

 private:
  SimTime at_;
  EventId seq_;
  std::string target_;
};

class Engine {
 public:
  using Handler = std::function<void()>;
  using TraceSink = std::function<void(SimTime, EventId, const std::string&)>;

  explicit Engine(std::uint64_t master_seed = 0);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  SimTime now() const { return now_; }
  std::uint64_t master_seed() const { return master_seed_; }

  EventId schedule(Duration delay, std::string target, Handler handler);
  EventId schedule_at(SimTime at, std::string target, Handler handler);

  /// Processes every event with fire_at <= t_end in (fire_at, seq) order.
  std::size_t run_until(SimTime t_end);
  /// Stops the current run_until after the handler in progress returns.
  void stop() { stop_requested_ = true; }
  bool stopped() const { return stop_requested_; }

  RngStream& rng_stream(std::string_view label);

  std::uint64_t scheduled_count() const { return scheduled_; }
  std::uint64_t processed_count() const { return processed_; }
  std::size_t pending_count() const { return queue_.size(); }

  void set_trace_sink(TraceSink sink) { trace_ = std::move(sink); }

 private:
  struct Event {
    SimTime fire_at;
    EventId seq;
    std::string target;
    Handler handler;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  std::uint64_t master_seed_;
  SimTime now_{};
  EventId next_seq_ = 0;
  std::uint64_t scheduled_ = 0;
  std::uint64_t processed_ = 0;
  bool stop_requested_ = false;
  std::vector<Event> queue_;  // binary heap under Later
  std::map<std::string, RngStream, std::less<>> streams_;
  TraceSink trace_;
};

}  // namespace edgectl
