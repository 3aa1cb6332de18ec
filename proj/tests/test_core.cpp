#include <doctest.h>

#include <cmath>

#include "ernf/core.hpp"
#include "ernf/random.hpp"
#include "ernf/scenes.hpp"
#include "ernf/simulator.hpp"
#include "support.hpp"

using namespace ernf;
using ernf::test::Gen;

namespace {

EventStream stream_of(std::vector<Event> events, int w = 4, int h = 4, double t0 = 0.0, double t1 = 1.0) {
  EventStream s;
  s.geometry = test::mono(w, h);
  s.events = std::move(events);
  s.t_start = t0;
  s.t_end = t1;
  return s;
}

}  // namespace

TEST_SUITE("core_model") {
  TEST_CASE("empty stream validates") { CHECK(validate_stream(stream_of({})).ok()); }

  TEST_CASE("decreasing timestamps at one pixel are one monotonicity violation") {
    const auto r = validate_stream(stream_of({{{0, 0}, Polarity::Positive, 0.0, 0.2}, {{0, 0}, Polarity::Positive, 0.2, 0.1}}));
    CHECK(r.violations.size() == 1);
    CHECK(r.count(ViolationKind::NonMonotone) == 1);
  }

  TEST_CASE("t_prev that skips back is one linkage violation") {
    const auto r = validate_stream(stream_of({{{0, 0}, Polarity::Positive, 0.0, 0.2}, {{0, 0}, Polarity::Negative, 0.1, 0.3}}));
    CHECK(r.violations.size() == 1);
    CHECK(r.count(ViolationKind::BrokenLinkage) == 1);
  }

  TEST_CASE("first event must link to the stream start") {
    const auto r = validate_stream(stream_of({{{1, 2}, Polarity::Positive, 0.05, 0.2}}));
    CHECK(r.count(ViolationKind::BrokenLinkage) == 1);
  }

  TEST_CASE("out-of-bounds pixel and out-of-window time are reported") {
    const auto r = validate_stream(stream_of({{{4, 0}, Polarity::Positive, 0.0, 0.2}, {{1, 1}, Polarity::Positive, 0.0, 1.5}}));
    CHECK(r.count(ViolationKind::OutOfBounds) == 1);
    CHECK(r.count(ViolationKind::OutsideWindow) == 1);
  }

  TEST_CASE("derive_t_ref adds the refractory period") {
    CHECK(derive_t_ref({{0, 0}, Polarity::Positive, 1.0, 2.0}, 0.5) == 1.5);
    CHECK(derive_t_ref({{0, 0}, Polarity::Positive, 2.0, 3.0}, 0.0) == 2.0);
    try {
      derive_t_ref({{0, 0}, Polarity::Positive, 1.0, 1.2}, 0.3);
      FAIL("expected RefractoryExceedsInterval");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RefractoryExceedsInterval);
    }
  }

  TEST_CASE("equivalent views use 47 bits per event against 8 bits per pixel channel") {
    EventStream s;
    s.geometry = test::mono(100, 100);
    s.geometry.channels = 3;
    s.t_end = 1.0;
    for (int i = 0; i < 1000; ++i) s.events.push_back({{i % 100, i / 100}, Polarity::Positive, 0.0, 0.5});
    const auto st = stream_stats(s);
    CHECK(st.event_count == 1000);
    CHECK(st.equivalent_views == doctest::Approx(47000.0 / 240000.0).epsilon(1e-12));
    CHECK(st.equivalent_views == doctest::Approx(0.1958).epsilon(1e-3));
  }

  TEST_CASE("sparsity ratio against a reference") {
    Gen g(3);
    const auto s = test::random_stream(g, test::mono(8, 8), 0.0, 1.0, 5);
    CHECK(*stream_stats(s, &s).sparsity == 1.0);

    EventStream big = stream_of({}, 100, 100), small = stream_of({}, 100, 100);
    for (int i = 0; i < 4176; ++i) big.events.push_back({{i % 100, (i / 100) % 100}, Polarity::Positive, 0.0, 0.5});
    for (int i = 0; i < 1000; ++i) small.events.push_back({{i % 100, i / 100}, Polarity::Positive, 0.0, 0.5});
    CHECK(*stream_stats(small, &big).sparsity == doctest::Approx(4.176).epsilon(1e-12));

    const EventStream other = stream_of({}, 5, 5);
    CHECK_THROWS_AS(stream_stats(small, &other), Error);
  }

  TEST_CASE("mean interval is averaged per pixel over consecutive pairs") {
    const auto s = stream_of({{{0, 0}, Polarity::Positive, 0.0, 0.1},
                              {{1, 0}, Polarity::Positive, 0.0, 0.1},
                              {{0, 0}, Polarity::Positive, 0.1, 0.3},
                              {{1, 0}, Polarity::Positive, 0.1, 0.5},
                              {{0, 0}, Polarity::Positive, 0.3, 0.35}});
    // pixel (0,0): mean(0.2, 0.05) = 0.125; pixel (1,0): 0.4.
    CHECK(stream_stats(s).mean_interval == doctest::Approx(0.5 * (0.125 + 0.4)).epsilon(1e-12));
  }

  TEST_CASE("threshold params derived quantities") {
    const ThresholdParams th{0.25, 2.5};
    CHECK(th.mean() == doctest::Approx(1.375));
    CHECK(th.half_difference() == doctest::Approx(1.125));
    CHECK(std::abs(th.half_difference()) < th.mean());
    CHECK_THROWS_AS((ThresholdParams{0.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((ThresholdParams{0.2, -1.0}.validate()), Error);
  }

  TEST_CASE("threshold map: positive draws and per-polarity mean within 4 sigma / sqrt(N)") {
    const SensorGeometry g = test::mono(1000, 1000);
    const ThresholdParams nominal{0.25, 0.5};
    const double sigma = 0.06;
    const auto map = ThresholdMap::sample(g, nominal, sigma, 42);
    const double n = static_cast<double>(map.size());
    double sp = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
      REQUIRE(map.positive()[i] > 0.0);
      REQUIRE(map.negative()[i] > 0.0);
      sp += map.positive()[i];
      sn += map.negative()[i];
    }
    CHECK(std::abs(sp / n - nominal.c_pos) < 4.0 * sigma / std::sqrt(n));
    CHECK(std::abs(sn / n - nominal.c_neg) < 4.0 * sigma / std::sqrt(n));
  }

  TEST_CASE("threshold map: heavy noise is truncated above the floor") {
    const auto map = ThresholdMap::sample(test::mono(64, 64), {0.25, 0.25}, 0.5, 1);
    for (std::size_t i = 0; i < map.size(); ++i) {
      CHECK(map.positive()[i] >= ThresholdMap::kFloorFraction * 0.25);
      CHECK(map.negative()[i] >= ThresholdMap::kFloorFraction * 0.25);
    }
  }

  TEST_CASE("threshold map is a pure function of (seed, pixel)") {
    const auto a = ThresholdMap::sample(test::mono(16, 16), {0.2, 0.3}, 0.03, 9);
    for (std::size_t i = 0; i < a.size(); i += 7) {
      const auto th = ThresholdMap::sample_pixel({0.2, 0.3}, 0.03, 9, i);
      CHECK(th.c_pos == a.positive()[i]);
      CHECK(th.c_neg == a.negative()[i]);
    }
    CHECK(ThresholdMap::sample_pixel({0.2, 0.3}, 0.0, 9, 3).c_pos == 0.3);
  }

  TEST_CASE("random streams from the generator validate") {
    Gen g(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = test::random_stream(g, test::mono(g.integer(1, 9), g.integer(1, 9)), 0.0, 2.0, 6);
      CHECK(validate_stream(s).ok());
    }
  }

  TEST_CASE("simulated streams validate and respect the refractory period") {
    Gen g(5);
    for (int trial = 0; trial < 10; ++trial) {
      SimulationParams p;
      p.thresholds = g.thresholds(0.5, 2.0);
      p.sigma = 0.1 * p.thresholds.mean() * g.uniform();
      p.tau = trial % 2 ? 0.0 : g.uniform(0.0, 0.05);
      p.t1 = 2.0;
      p.seed = g.seed();
      const auto s = simulate(random_smooth_source(g.seed(), 3, 1.5, 2.0), test::mono(6, 5), p);
      CHECK(validate_stream(s).ok());
      // A pixel's first event has no dead time before it.
      for (const Event& e : s.events)
        if (e.t_prev > p.t0) CHECK(e.t_curr - e.t_prev > p.tau);
    }
  }

  TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(7, 1), b(7, 1), c(7, 2);
    for (int i = 0; i < 10; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      CHECK(x != c.next_u64());
    }
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
      const double u = r.uniform_open();
      CHECK(u > 0.0);
      CHECK(u < 1.0);
    }
  }
}
