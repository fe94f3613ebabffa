#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "wvsn/routing.hpp"

using namespace wvsn;
using namespace wvsn::routing;

namespace {

DelayBeacon beacon(uint32_t id, Vec2 pos, double t, double re = 10.0, double abs_free = 100) {
  DelayBeacon b;
  b.sender = id;
  b.position = pos;
  b.abs_packets = {abs_free, abs_free};
  b.residual_energy_j = re;
  b.timestamp_s = t;
  return b;
}

ProtocolParams table_i_params(Protocol variant) {
  ScenarioConfig cfg;
  return ProtocolParams::from_config(cfg, variant);
}

/// Loss value giving RP = target for a one-extra-hop neighbor ((1-e)^2 = rp).
double loss_for_rp2(double rp) { return 1.0 - std::sqrt(rp); }

}  // namespace

TEST_CASE("neighbor table update and eviction") {
  NeighborTable t;
  t.update(beacon(3, {1, 2}, 0.0), 0.0, 1.0, 0.006);
  CHECK(t.size() == 1);

  // Repeated beacon refreshes fields in place.
  t.update(beacon(3, {1, 2}, 0.5, 5.0), 0.5, 1.0, 0.006);
  CHECK(t.size() == 1);
  CHECK(t.find(3)->residual_energy_j == doctest::Approx(5.0));

  t.update(beacon(7, {4, 4}, 0.5), 0.5, 1.0, 0.006);
  CHECK(t.size() == 2);

  // Silent for more than 3 beacon periods: evicted before the next decision.
  t.evict_stale(3.5, 1.0);  // id 3 last heard at 0.5, id 7 at 0.5
  CHECK(t.size() == 2);
  t.evict_stale(3.6, 1.0);
  CHECK(t.find(3) == nullptr);
  CHECK(t.find(7) == nullptr);

  // Exactly 3 periods of silence is still alive (strict inequality).
  t.update(beacon(9, {0, 0}, 10.0), 10.0, 1.0, 0.006);
  t.evict_stale(13.0, 1.0);
  CHECK(t.find(9) != nullptr);
}

TEST_CASE("link stats survive beacon refresh but not eviction") {
  NeighborTable t;
  t.update(beacon(1, {5, 5}, 0.0), 0.0, 1.0, 0.02);
  t.on_ack(1, true, 0.1);
  const double learned = t.find(1)->delay_est_s;
  CHECK(learned == doctest::Approx(0.7 * 0.02 + 0.3 * 0.1));

  t.update(beacon(1, {5, 5}, 1.0), 1.0, 1.0, 0.02);
  CHECK(t.find(1)->delay_est_s == doctest::Approx(learned));  // kept

  t.evict_stale(10.0, 1.0);
  t.update(beacon(1, {5, 5}, 10.0), 10.0, 1.0, 0.02);
  CHECK(t.find(1)->delay_est_s == doctest::Approx(0.02));  // cold prior again
  CHECK(t.find(1)->loss_est == doctest::Approx(kColdStartLoss));
}

TEST_CASE("EWMA link estimators") {
  NeighborTable t;
  t.update(beacon(1, {0, 0}, 0.0), 0.0, 1.0, 0.01);

  SUBCASE("all acks succeed: loss estimate decays monotonically to 0") {
    double prev = t.find(1)->loss_est;
    for (int i = 0; i < 100; ++i) {
      t.on_ack(1, true, 0.01);
      const double e = t.find(1)->loss_est;
      CHECK(e <= prev);
      prev = e;
    }
    CHECK(prev < 1e-10);
  }

  SUBCASE("alternating success/failure oscillates around 0.5") {
    // EWMA(0.3) fixed points: e_fail = 0.3/(1-0.49) = 0.588, e_succ = 0.412.
    for (int i = 0; i < 100; ++i) t.on_ack(1, i % 2 == 0, 0.01);
    double prev_e = t.find(1)->loss_est;
    t.on_ack(1, true, 0.01);
    const double e_succ = t.find(1)->loss_est;
    CHECK((prev_e + e_succ) / 2 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(e_succ - 0.5) < 0.09 + 1e-6);
    CHECK(e_succ == doctest::Approx(0.7 * 0.588235).epsilon(1e-3));
  }

  SUBCASE("constant measured delay converges to it") {
    for (int i = 0; i < 100; ++i) t.on_ack(1, true, 0.25);
    CHECK(t.find(1)->delay_est_s == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("progression and required speed") {
  // dist(i,D)=100, dist(j,D)=60, delay=0.2 s -> 200 m/s.
  CHECK(progression_speed({100, 0}, {60, 0}, {0, 0}, 0.2) == doctest::Approx(200.0));
  // j at the destination.
  CHECK(progression_speed({100, 0}, {0, 0}, {0, 0}, 1.0) == doctest::Approx(100.0));
  // No progress: equal distances to the destination.
  CHECK(progression_speed({100, 0}, {0, 100}, {0, 0}, 1.0) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(progression_speed({1, 0}, {0, 0}, {0, 0}, 0.0), SimError);

  CHECK(required_speed({100, 0}, {0, 0}, 1.0) == doctest::Approx(100.0));
  CHECK(required_speed({100, 0}, {0, 0}, 2.0) == doctest::Approx(50.0));  // BKGD deadline
  CHECK_THROWS_AS(required_speed({100, 0}, {0, 0}, 0.0), SimError);
}

TEST_CASE("reaching probability follows Eq. 3 with the floor rule") {
  CHECK(reaching_probability({100, 0}, {60, 0}, {0, 0}, 0.0) == doctest::Approx(1.0));
  // e=0.1, dist(j,D)=80, dist(i,j)=40 -> 0.9 * 0.9^floor(2) = 0.729.
  CHECK(reaching_probability({120, 0}, {80, 0}, {0, 0}, 0.1) == doctest::Approx(0.729));
  CHECK(reaching_probability({100, 0}, {60, 0}, {0, 0}, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(reaching_probability({1, 1}, {1, 1}, {0, 0}, 0.1), SimError);

  // Floor boundary: ratio just below 2 uses exponent 1.
  CHECK(reaching_probability({120.1, 0}, {80.05, 0}, {0, 0}, 0.1) ==
        doctest::Approx(0.9 * 0.9));
}

TEST_CASE("TRP accumulation") {
  CHECK(accumulate_trp(0.0, 0.5) == doctest::Approx(0.5));
  CHECK(accumulate_trp(0.5, 0.5) == doctest::Approx(0.75));
  CHECK(accumulate_trp(0.42, 0.0) == doctest::Approx(0.42));

  // Matches the brute-force product over random sets, commutatively.
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rps;
    const int n = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) rps.push_back(rng.uniform());
    double acc = 0, prod = 1;
    for (double rp : rps) {
      acc = accumulate_trp(acc, rp);
      prod *= 1.0 - rp;
    }
    CHECK(acc == doctest::Approx(1.0 - prod).epsilon(1e-12));
  }
}

TEST_CASE("node score is the Eq. 5 convex combination") {
  CHECK(node_score(1, 1, 1, 0.3, 0.2) == doctest::Approx(1.0));
  CHECK(node_score(0.77, 0.1, 0.2, 1.0, 0.0) == doctest::Approx(0.77));
  CHECK(node_score(0.5, 0.8, 0.4, 0.3, 0.2) == doctest::Approx(0.51));
}

TEST_CASE("forwarding set matches brute-force distance filtering") {
  const Vec2 self{100, 100}, sink{0, 0};
  NeighborTable t;
  Rng rng(31);
  for (uint32_t id = 1; id <= 10; ++id)
    t.update(beacon(id, {rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)}, 0.0), 0.0, 1.0,
             0.01);

  const auto fs = forwarding_set(self, sink, t);
  std::set<uint32_t> got;
  for (const auto* e : fs) got.insert(e->id);
  for (const auto& e : t.entries()) {
    const bool closer = dist(self, sink) - dist(e.position, sink) > 0;
    CHECK(got.count(e.id) == static_cast<size_t>(closer));
  }

  // Boundary: equal distance is excluded, collinear-but-closer included.
  NeighborTable b;
  b.update(beacon(1, {-100, 0}, 0.0), 0.0, 1.0, 0.01);  // mirror image: equal distance
  b.update(beacon(2, {-20, 0}, 0.0), 0.0, 1.0, 0.01);   // beyond D but closer
  const auto fsb = forwarding_set({100, 0}, {0, 0}, b);
  REQUIRE(fsb.size() == 1);
  CHECK(fsb[0]->id == 2);
}

TEST_CASE("select_forwarders greedy TRP accumulation") {
  const Vec2 self{100, 0}, sink{0, 0};
  const auto params = table_i_params(Protocol::Mmspeed);
  Rng rng(1);

  SUBCASE("one high neighbor meeting DR stops the greedy walk") {
    NeighborTable t;
    t.update(beacon(4, {60, 0}, 0.0), 0.0, 1.0, 0.01);
    t.find(4)->loss_est = loss_for_rp2(0.8);  // RP = 0.8 >= DR_ROI 0.7
    const auto d = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, t, params, 0.1,
                                     rng);
    CHECK_FALSE(d.drop);
    REQUIRE(d.forwarders.size() == 1);
    CHECK(d.forwarders[0] == 4);
    CHECK(d.trp == doctest::Approx(0.8));
  }

  SUBCASE("two 0.5-RP neighbors accumulate to 0.75") {
    NeighborTable t;
    t.update(beacon(4, {60, 0}, 0.0), 0.0, 1.0, 0.01);
    t.update(beacon(5, {60, 0.5}, 0.0), 0.0, 1.0, 0.01);
    t.find(4)->loss_est = loss_for_rp2(0.5);
    t.find(5)->loss_est = loss_for_rp2(0.5);
    const auto d = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, t, params, 0.1,
                                     rng);
    CHECK_FALSE(d.drop);
    CHECK(d.forwarders.size() == 2);
    CHECK(d.trp == doctest::Approx(0.75));
  }

  SUBCASE("empty FS drops with void-region") {
    NeighborTable t;
    t.update(beacon(4, {140, 0}, 0.0), 0.0, 1.0, 0.01);  // farther than self
    const auto d = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, t, params, 0.1,
                                     rng);
    CHECK(d.drop);
    CHECK(d.reason == DropReason::VoidRegion);
  }

  SUBCASE("expired packets are dropped before any forwarding work") {
    NeighborTable t;
    t.update(beacon(4, {60, 0}, 0.0), 0.0, 1.0, 0.01);
    const auto d = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, t, params, 2.0,
                                     rng);
    CHECK(d.drop);
    CHECK(d.reason == DropReason::Expired);
  }
}

TEST_CASE("probabilistic fallback") {
  NeighborEntry e1, e2;
  e1.id = 1;
  e2.id = 2;
  std::vector<Candidate> fs_low = {{&e1, 50.0, 0.6, 0.6}, {&e2, 80.0, 0.4, 0.4}};

  SUBCASE("best PS at least the required speed always forwards") {
    Rng rng(3);
    int drops = 0;
    for (int i = 0; i < 1000; ++i) {
      ForwardingDecision d;
      probabilistic_fallback(fs_low, 80.0, rng, d);
      drops += d.drop;
      if (!d.drop) CHECK(d.forwarders == std::vector<uint32_t>{2});  // argmax PS
    }
    CHECK(drops == 0);
  }

  SUBCASE("best PS at half the required speed drops half the time") {
    Rng rng(4);
    int drops = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
      ForwardingDecision d;
      probabilistic_fallback(fs_low, 160.0, rng, d);
      drops += d.drop;
    }
    CHECK(std::abs(drops / static_cast<double>(trials) - 0.5) < 0.02);
  }

  SUBCASE("empty fs_low drops") {
    Rng rng(5);
    ForwardingDecision d;
    probabilistic_fallback({}, 100.0, rng, d);
    CHECK(d.drop);
    CHECK(d.reason == DropReason::VoidRegion);
  }
}

TEST_CASE("last chance procedure") {
  NeighborEntry e1, e2, e3;
  e1.id = 1;
  e2.id = 2;
  e3.id = 3;

  SUBCASE("mean split: PS {10,20,30} puts {20,30} in the last-chance set") {
    std::vector<Candidate> fs_low = {
        {&e1, 10.0, 0.9, 0.9}, {&e2, 20.0, 0.2, 0.2}, {&e3, 30.0, 0.3, 0.3}};
    ForwardingDecision d;
    last_chance(fs_low, 0.44, d);  // 0.3 then 0.2: trp = 1-0.7*0.8 = 0.44
    CHECK_FALSE(d.drop);
    CHECK(d.forwarders == std::vector<uint32_t>{3, 2});  // scores 0.3 > 0.2
    CHECK(d.trp == doctest::Approx(0.44));
    CHECK_FALSE(d.used_rescue);
  }

  SUBCASE("rescue nodes append by descending RP when the LC set falls short") {
    std::vector<Candidate> fs_low = {
        {&e1, 10.0, 0.9, 0.9}, {&e2, 20.0, 0.2, 0.2}, {&e3, 30.0, 0.3, 0.3}};
    ForwardingDecision d;
    last_chance(fs_low, 0.9, d);
    CHECK(d.used_rescue);
    CHECK(d.forwarders == std::vector<uint32_t>{3, 2, 1});
    CHECK(d.trp == doctest::Approx(1.0 - 0.7 * 0.8 * 0.1));
  }

  SUBCASE("singleton fs_low is its own last-chance set") {
    std::vector<Candidate> fs_low = {{&e1, 5.0, 0.1, 0.1}};
    ForwardingDecision d;
    last_chance(fs_low, 0.99, d);
    CHECK_FALSE(d.drop);
    CHECK(d.forwarders == std::vector<uint32_t>{1});
  }

  SUBCASE("empty fs_low is a void region") {
    ForwardingDecision d;
    last_chance({}, 0.5, d);
    CHECK(d.drop);
    CHECK(d.reason == DropReason::VoidRegion);
  }
}

TEST_CASE("variant properties over random tables") {
  Rng rng(77);
  const Vec2 sink{0, 0};
  int nonempty_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Vec2 self{rng.uniform(20.0, 150.0), rng.uniform(20.0, 150.0)};
    NeighborTable t;
    const int n = static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      const uint32_t id = static_cast<uint32_t>(i + 1);
      t.update(beacon(id,
                      {self.x() + rng.uniform(-40.0, 40.0),
                       self.y() + rng.uniform(-40.0, 40.0)},
                      0.0, rng.uniform(0.1, 10.0), rng.uniform(0.0, 100.0)),
               0.0, 1.0, 0.01);
      t.find(id)->loss_est = rng.uniform(0.0, 0.6);
      t.find(id)->delay_est_s = rng.uniform(0.001, 0.5);
    }
    const PacketView pkt{rng.bernoulli(0.5) ? TrafficClass::Roi : TrafficClass::Bkgd, 0.0};
    const double now = rng.uniform(0.0, 0.5);

    for (Protocol variant : {Protocol::Mmspeed, Protocol::Qbsa, Protocol::Eqbsa}) {
      const auto params = table_i_params(variant);
      Rng drops(trial * 10 + static_cast<int>(variant));
      const auto d = select_forwarders(pkt, self, sink, t, params, now, drops);

      // Forwarders are always a subset of the Eq. 1 forwarding set.
      const auto fs = forwarding_set(self, sink, t);
      std::set<uint32_t> fs_ids;
      for (const auto* e : fs) fs_ids.insert(e->id);
      for (uint32_t f : d.forwarders) CHECK(fs_ids.count(f) == 1);
      std::set<uint32_t> unique(d.forwarders.begin(), d.forwarders.end());
      CHECK(unique.size() == d.forwarders.size());

      // EQBSA never drops a routable packet when the FS is nonempty.
      if (variant == Protocol::Eqbsa && !fs.empty()) {
        CHECK_FALSE(d.drop);
        ++nonempty_cases;
      }

      // Decision TRP equals the brute-force accumulation over chosen nodes.
      if (!d.drop) {
        double prod = 1.0;
        for (uint32_t f : d.forwarders) {
          const auto* e = t.find(f);
          prod *= 1.0 - reaching_probability(self, e->position, sink, e->loss_est);
        }
        CHECK(d.trp == doctest::Approx(1.0 - prod).epsilon(1e-12));
      }

      // Determinism for a fixed RNG stream state.
      Rng drops2(trial * 10 + static_cast<int>(variant));
      const auto d2 = select_forwarders(pkt, self, sink, t, params, now, drops2);
      CHECK(d2.forwarders == d.forwarders);
      CHECK(d2.drop == d.drop);
    }
  }
  CHECK(nonempty_cases > 50);
}

TEST_CASE("greedy picks are exactly the top-score prefix of FS_high") {
  Rng rng(123);
  const Vec2 self{120, 120}, sink{0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    NeighborTable t;
    const int n = 2 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      const uint32_t id = static_cast<uint32_t>(i + 1);
      t.update(beacon(id, {rng.uniform(40.0, 119.0), rng.uniform(40.0, 119.0)}, 0.0,
                      rng.uniform(0.5, 10.0), rng.uniform(0.0, 100.0)),
               0.0, 1.0, 0.01);
      t.find(id)->loss_est = rng.uniform(0.0, 0.4);
      t.find(id)->delay_est_s = rng.uniform(0.001, 0.05);
    }
    const auto params = table_i_params(Protocol::Eqbsa);
    Rng drops(trial);
    const auto d = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, t, params, 0.2,
                                     drops);
    if (d.drop || d.used_last_chance) continue;

    // Recompute the candidate ordering independently.
    const double req = required_speed(self, sink, 1.0 - 0.2);
    struct Scored {
      uint32_t id;
      double score, rp;
    };
    std::vector<Scored> high;
    for (const auto& e : t.entries()) {
      if (dist(self, sink) - dist(e.position, sink) <= 0) continue;
      if (progression_speed(self, e.position, sink, e.delay_est_s) < req) continue;
      const double rp = reaching_probability(self, e.position, sink, e.loss_est);
      const double score = node_score(rp, e.abs_packets[0] / params.queue_capacity,
                                      std::clamp(e.residual_energy_j / 10.0, 0.0, 1.0),
                                      params.alpha, params.beta);
      high.push_back({e.id, score, rp});
    }
    std::sort(high.begin(), high.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.rp != b.rp) return a.rp > b.rp;
      return a.id < b.id;
    });
    REQUIRE(d.forwarders.size() <= high.size());
    for (size_t i = 0; i < d.forwarders.size(); ++i) CHECK(d.forwarders[i] == high[i].id);
  }
}

TEST_CASE("EQBSA selection is invariant to a joint energy rescale") {
  Rng rng(9);
  const Vec2 self{100, 100}, sink{0, 0};
  for (double scale : {3.0, 0.25, 1000.0}) {
    NeighborTable a, b;
    for (int i = 0; i < 8; ++i) {
      const uint32_t id = static_cast<uint32_t>(i + 1);
      const Vec2 pos{rng.uniform(30.0, 99.0), rng.uniform(30.0, 99.0)};
      const double re = rng.uniform(0.5, 10.0);
      const double loss = rng.uniform(0.0, 0.5);
      const double delay = rng.uniform(0.001, 0.1);
      a.update(beacon(id, pos, 0.0, re), 0.0, 1.0, 0.01);
      b.update(beacon(id, pos, 0.0, re * scale), 0.0, 1.0, 0.01);
      a.find(id)->loss_est = b.find(id)->loss_est = loss;
      a.find(id)->delay_est_s = b.find(id)->delay_est_s = delay;
    }
    ScenarioConfig cfg;
    auto pa = ProtocolParams::from_config(cfg, Protocol::Eqbsa);
    auto pb = pa;
    pb.initial_energy_j = pa.initial_energy_j * scale;
    Rng r1(1), r2(1);
    const auto da = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, a, pa, 0.1, r1);
    const auto db = select_forwarders({TrafficClass::Roi, 0.0}, self, sink, b, pb, 0.1, r2);
    CHECK(da.forwarders == db.forwarders);
    CHECK(da.drop == db.drop);
  }
}
