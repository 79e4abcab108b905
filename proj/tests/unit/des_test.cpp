#include <doctest.h>

#include "edgectl/des.hpp"

using namespace edgectl;

TEST_CASE("events run in time order, ties in scheduling order") {
  Engine e(1);
  std::vector<int> order;
  e.schedule(std::chrono::milliseconds(5), "b", [&] { order.push_back(2); });
  e.schedule(std::chrono::milliseconds(1), "a", [&] { order.push_back(1); });
  e.schedule(std::chrono::milliseconds(5), "c", [&] { order.push_back(3); });
  e.schedule(std::chrono::milliseconds(9), "d", [&] { order.push_back(4); });
  CHECK(e.run_until(kSimStart + std::chrono::milliseconds(5)) == 3);
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(e.now() == kSimStart + std::chrono::milliseconds(5));
  CHECK(e.pending_count() == 1);
}

TEST_CASE("handlers may schedule at the current instant") {
  Engine e(1);
  std::vector<int> order;
  e.schedule(Duration::zero(), "first", [&] {
    order.push_back(1);
    e.schedule(Duration::zero(), "nested", [&] { order.push_back(3); });
  });
  e.schedule(Duration::zero(), "second", [&] { order.push_back(2); });
  e.run_until(kSimStart);
  CHECK(order == std::vector<int>{1, 2, 3});
}

TEST_CASE("a throwing handler is reported with its event") {
  Engine e(1);
  e.schedule(std::chrono::milliseconds(2), "boom", [] { throw std::runtime_error("bad"); });
  try {
    e.run_until(kSimStart + std::chrono::seconds(1));
    FAIL("expected an EventError");
  } catch (const EventError& err) {
    CHECK(err.target() == "boom");
    CHECK(err.at() == kSimStart + std::chrono::milliseconds(2));
    CHECK(std::string(err.what()).find("bad") != std::string::npos);
  }
}

TEST_CASE("stop ends the run after the current handler") {
  Engine e(1);
  int n = 0;
  e.schedule(std::chrono::milliseconds(1), "x", [&] { ++n; e.stop(); });
  e.schedule(std::chrono::milliseconds(2), "y", [&] { ++n; });
  e.run_until(kSimStart + std::chrono::seconds(1));
  CHECK(n == 1);
  CHECK(e.stopped());
}

TEST_CASE("random streams are pinned to seed and label") {
  CHECK(derive_stream_seed(7, "net.edge") == splitmix64(7 ^ splitmix64(fnv1a64("net.edge"))));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  // splitmix64 reference value for input 0.
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);

  Engine a(3), b(3), c(4);
  RngStream& x = a.rng_stream("s");
  RngStream& y = b.rng_stream("s");
  RngStream& z = c.rng_stream("s");
  RngStream& w = a.rng_stream("t");
  bool all_equal = true, differs_seed = false, differs_label = false;
  for (int i = 0; i < 100; ++i) {
    const auto vx = x.next_u64(), vy = y.next_u64(), vz = z.next_u64(), vw = w.next_u64();
    all_equal = all_equal && vx == vy;
    differs_seed = differs_seed || vx != vz;
    differs_label = differs_label || vx != vw;
  }
  CHECK(all_equal);
  CHECK(differs_seed);
  CHECK(differs_label);
  CHECK(&a.rng_stream("s") == &x);
}

TEST_CASE("uniform and normal draws are in range and roughly right") {
  RngStream r("u", 11);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double g = r.normal();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(r.uniform_index(7) < 7);
}

TEST_CASE("time conversions round to the nearest nanosecond") {
  CHECK(from_millis(1.0000004).count() == 1000000);
  CHECK(from_millis(1.0000006).count() == 1000001);
  CHECK(from_seconds(0.05).count() == 50000000);
  CHECK(to_millis(std::chrono::microseconds(1500)) == 1.5);
}
