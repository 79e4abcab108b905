#include "edgectl/des.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

namespace edgectl {

Duration from_seconds(double s) { return Duration{std::llround(s * 1e9)}; }
Duration from_millis(double ms) { return Duration{std::llround(ms * 1e6)}; }
double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-9; }
double to_millis(Duration d) { return static_cast<double>(d.count()) * 1e-6; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label) {
  return splitmix64(master_seed ^ splitmix64(fnv1a64(label)));
}

RngStream::RngStream(std::string label, std::uint64_t seed)
    : label_(std::move(label)), seed_(seed), gen_(seed) {}

double RngStream::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  // Rejection keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = gen_();
  } while (r >= limit);
  return r % n;
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::lognormal(double mu, double sigma) {
  return std::exp(mu + sigma * normal());
}

Engine::Engine(std::uint64_t master_seed) : master_seed_(master_seed) {}

EventId Engine::schedule(Duration delay, std::string target, Handler handler) {
  if (delay < Duration::zero()) throw std::invalid_argument("schedule: negative delay for " + target);
  return schedule_at(now_ + delay, std::move(target), std::move(handler));
}

EventId Engine::schedule_at(SimTime at, std::string target, Handler handler) {
  if (at < now_) throw std::invalid_argument("schedule_at: time in the past for " + target);
  const EventId id = next_seq_++;
  queue_.push_back(Event{at, id, std::move(target), std::move(handler)});
  std::push_heap(queue_.begin(), queue_.end(), Later{});
  ++scheduled_;
  return id;
}

std::size_t Engine::run_until(SimTime t_end) {
  stop_requested_ = false;
  std::size_t count = 0;
  while (!queue_.empty() && !stop_requested_) {
    if (queue_.front().fire_at > t_end) break;
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Event ev = std::move(queue_.back());
    queue_.pop_back();
    now_ = ev.fire_at;
    ++processed_;
    ++count;
    if (trace_) trace_(ev.fire_at, ev.seq, ev.target);
    try {
      ev.handler();
    } catch (const EventError&) {
      throw;
    } catch (const std::exception& e) {
      throw EventError("event '" + ev.target + "' at t=" + std::to_string(now_.time_since_epoch().count()) +
                           "ns (seq " + std::to_string(ev.seq) + "): " + e.what(),
                       ev.fire_at, ev.seq, ev.target);
    }
  }
  return count;
}

RngStream& Engine::rng_stream(std::string_view label) {
  auto it = streams_.find(label);
  if (it == streams_.end()) {
    it = streams_.emplace(std::string(label), RngStream(std::string(label), derive_stream_seed(master_seed_, label)))
             .first;
  }
  return it->second;
}

}  // namespace edgectl
