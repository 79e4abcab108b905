#include <doctest.h>

#include <numeric>

#include "edgectl/net.hpp"
#include "edgectl/stats.hpp"

using namespace edgectl;

TEST_CASE("box statistics use linear interpolation between order statistics") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const BoxStats b = box_stats(v);
  CHECK(b.median == doctest::Approx(50.5));
  CHECK(b.q1 == doctest::Approx(25.75));
  CHECK(b.q3 == doctest::Approx(75.25));
  CHECK(b.lo_whisker == 1.0);
  CHECK(b.hi_whisker == 100.0);

  const BoxStats c = box_stats({4.0, 4.0, 4.0});
  CHECK(c.median == 4.0);
  CHECK(c.lo_whisker == 4.0);
  CHECK(c.hi_whisker == 4.0);

  std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9, 100};
  const BoxStats d = box_stats(w);
  CHECK(d.hi_whisker == 9.0);  // 100 is beyond 1.5 IQR
  CHECK_THROWS_AS(box_stats({}), std::invalid_argument);
}

TEST_CASE("log-normal fit through the quartiles") {
  const LognormalFit f = fit_lognormal(10.0, 10.0 * std::exp(-kZ75 * 0.2), 10.0 * std::exp(kZ75 * 0.2));
  CHECK(f.median() == doctest::Approx(10.0));
  CHECK(f.sigma == doctest::Approx(0.2));
  CHECK(f.quantile(0.25) == doctest::Approx(10.0 * std::exp(-kZ75 * 0.2)));
  CHECK_THROWS_AS(fit_lognormal(5.0, 6.0, 7.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_lognormal(5.0, 0.0, 7.0), std::invalid_argument);
}

TEST_CASE("sampled round trips reproduce the table quartiles within 5 percent") {
  const auto rows = check_links(default_profiles(), 10000, 1, 0.05);
  REQUIRE(rows.size() == 4);
  for (const LinkCheck& r : rows) {
    CAPTURE(node_name(r.node));
    CHECK(r.pass);
  }
  CHECK(rows[0].sampled.hi_whisker == 0.0);
  CHECK(rows[0].worst_rel_error == 0.0);
}

TEST_CASE("a table with q1 above the median is refused") {
  std::string csv = profiles_to_csv(default_profiles());
  const std::string from = "rtt.edge,q1,9.35";
  REQUIRE(csv.find(from) != std::string::npos);
  csv.replace(csv.find(from), from.size(), "rtt.edge,q1,12");
  CHECK_THROWS_AS(parse_profiles(csv), std::invalid_argument);
  CHECK_THROWS_AS(parse_profiles("entity,stat,value_ms\nrtt.mars,median,1\n"), std::invalid_argument);
}

TEST_CASE("profile table round-trips through CSV and matches the shipped file") {
  const Profiles d = default_profiles();
  const Profiles back = parse_profiles(profiles_to_csv(d));
  CHECK(profiles_to_csv(back) == profiles_to_csv(d));
  const Profiles file = load_profiles(std::filesystem::path(EDGECTL_DATA_DIR) / "profiles.csv");
  CHECK(profiles_to_csv(file) == profiles_to_csv(d));
}

TEST_CASE("solver cost anchors") {
  const Profiles p = default_profiles();
  const int cap = 2000;
  CHECK(to_millis(cap * p.node(Node::Edge).iter_cost) == doctest::Approx(80.0));
  CHECK(to_millis(cap * p.node(Node::Aws).iter_cost) == doctest::Approx(40.0).epsilon(0.1));
  const double plant = to_millis(cap * p.node(Node::Plant).iter_cost);
  CHECK(plant > 4.5 * 80.0);
  CHECK(plant < 5.5 * 80.0);

  RngStream r("x", 1);
  const Duration t = mpc_exec_time(p.node(Node::Edge), 10, p, r);
  CHECK(t > 10 * p.node(Node::Edge).iter_cost);
  CHECK_THROWS(mpc_exec_time(p.node(Node::Edge), 0, p, r));
}

TEST_CASE("node names parse case-insensitively") {
  CHECK(parse_node("AWS") == Node::Aws);
  CHECK(parse_node("erdc") == Node::Erdc);
  CHECK_FALSE(parse_node("mars").has_value());
  const Profiles p = default_profiles();
  CHECK(p.link(Node::Edge, Node::Aws).far == Node::Aws);
  CHECK(p.link(Node::Edge, Node::Edge).zero);
}
