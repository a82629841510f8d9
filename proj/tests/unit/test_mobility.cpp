#include <doctest.h>

#include <random>

#include "aerobeam/errors.hpp"
#include "aerobeam/mobility.hpp"
#include "oracles.hpp"

using namespace aerobeam;
using namespace aerobeam::mobility;

namespace {
const Box2 kArea{Vec2(100, -100), Vec2(300, 100)};
}

TEST_CASE("full memory keeps speed and heading") {
  GaussMarkovParams p{5.0, 1.0, 1.0};
  MoverState s{Vec2(200, 0), 3.0, 0.7, 0.2};
  const auto n = gauss_markov_step(s, p, 1.0, {2.5, -1.5}, kArea);
  CHECK(n.speed == 3.0);
  CHECK(n.heading == 0.7);
}

TEST_CASE("mean speed is a fixed point without noise") {
  GaussMarkovParams p{5.0, 0.1, 1.0};
  MoverState s{Vec2(200, 0), 5.0, 0.0, 0.0};
  CHECK(gauss_markov_step(s, p, 1.0, {0.0, 0.0}, kArea).speed == 5.0);
}

TEST_CASE("memoryless update") {
  GaussMarkovParams p{5.0, 0.0, 1.0};
  MoverState s{Vec2(200, 0), 2.0, 0.0, 0.0};
  CHECK(gauss_markov_step(s, p, 1.0, {1.0, 0.0}, kArea).speed == 6.0);
}

TEST_CASE("heading noise scale is pi/8 per unit sigma") {
  GaussMarkovParams p{5.0, 0.0, 2.0};
  MoverState s{Vec2(200, 0), 5.0, 0.0, 0.0};
  const auto n = gauss_markov_step(s, p, 1.0, {0.0, 1.0}, kArea);
  CHECK(n.heading == doctest::Approx(kPi / 4).epsilon(1e-15));
}

TEST_CASE("position advances along the new heading") {
  GaussMarkovParams p{5.0, 0.5, 1.0};
  MoverState s{Vec2(200, 0), 4.0, 0.3, 0.1};
  const auto n = gauss_markov_step(s, p, 0.5, {0.4, -0.2}, kArea);
  const Vec2 want = s.position + n.speed * 0.5 * Vec2(std::cos(n.heading), std::sin(n.heading));
  CHECK((n.position - want).norm() < 1e-12);
}

TEST_CASE("reflection keeps the eavesdropper inside its area") {
  GaussMarkovParams p{5.0, 0.1, 1.0};
  std::mt19937_64 g(4);
  std::normal_distribution<double> nd;
  MoverState s{Vec2(299, 99), 5.0, 0.5, 0.5};
  for (int i = 0; i < 20000; ++i) {
    s = gauss_markov_step(s, p, 1.0, {nd(g), nd(g)}, kArea);
    REQUIRE(kArea.contains(s.position));
    CHECK(s.heading >= -kPi);
    CHECK(s.heading < kPi);
    CHECK(s.speed >= 0.0);
  }
}

TEST_CASE("reflection off the east wall mirrors the heading") {
  GaussMarkovParams p{10.0, 1.0, 0.0};
  MoverState s{Vec2(295, 0), 10.0, 0.0, 0.0};
  const auto n = gauss_markov_step(s, p, 1.0, {0.0, 0.0}, kArea);
  CHECK(n.position.x() == doctest::Approx(295.0));
  CHECK(std::abs(std::abs(n.heading) - kPi) < 1e-12);
  CHECK(std::abs(std::abs(n.mean_heading) - kPi) < 1e-12);
}

TEST_CASE("Gauss-Markov stationarity at the reference parameters") {
  GaussMarkovParams p{5.0, 0.1, 1.0};
  std::mt19937_64 g(2024);
  std::normal_distribution<double> nd;
  MoverState s{Vec2(200, 0), 5.0, 0.0, 0.0};
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  int clamped = 0;
  for (int i = 0; i < n; ++i) {
    s = gauss_markov_step(s, p, 1.0, {nd(g), nd(g)}, kArea);
    sum += s.speed;
    sq += s.speed * s.speed;
    clamped += s.speed == 0.0;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean >= 4.8);
  CHECK(mean <= 5.2);
  CHECK(var >= 0.8);
  CHECK(var <= 1.2);
  CHECK(clamped < n / 1000);
}

TEST_CASE("Gauss-Markov argument checks") {
  MoverState s;
  CHECK_THROWS_AS(gauss_markov_step(s, {}, 0.0, {0, 0}, kArea), DomainError);
  CHECK_THROWS_AS(gauss_markov_step(s, {5.0, 1.5, 1.0}, 1.0, {0, 0}, kArea), DomainError);
  CHECK_THROWS_AS(gauss_markov_step(s, {5.0, 0.1, -1.0}, 1.0, {0, 0}, kArea), DomainError);
}

TEST_CASE("move_uav examples") {
  const Box3 box{Vec3(0, 0, 100), Vec3(40, 40, 100)};
  SUBCASE("zero displacement") {
    const auto r = move_uav(Vec3(10, 10, 100), Vec3::Zero(), box, 10.0, 1.0);
    CHECK(r.position == Vec3(10, 10, 100));
    CHECK_FALSE(r.speed_violation);
    CHECK_FALSE(r.boundary_violation);
    CHECK(r.speed == 0.0);
  }
  SUBCASE("twice the limit is rescaled by one half") {
    const auto r = move_uav(Vec3(20, 20, 100), Vec3(12, 16, 0), box, 10.0, 1.0);
    CHECK(r.speed_violation);
    CHECK(r.applied.norm() == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(r.applied == Vec3(6, 8, 0));
  }
  SUBCASE("pushing past a bound clamps to it") {
    const auto r = move_uav(Vec3(35, 20, 100), Vec3(8, 0, 0), box, 10.0, 1.0);
    CHECK(r.position.x() == 40.0);
    CHECK(r.boundary_violation);
    CHECK_FALSE(r.speed_violation);
    CHECK(r.speed == doctest::Approx(5.0));
  }
  CHECK_THROWS_AS(move_uav(Vec3(1, 1, 100), Vec3(NAN, 0, 0), box, 10.0, 1.0), DomainError);
  CHECK_THROWS_AS(move_uav(Vec3(1, 1, 100), Vec3(1, 0, 0), box, 0.0, 1.0), DomainError);
}

TEST_CASE("move_uav stays in bounds and under the speed limit") {
  const Box3 box{Vec3(0, 0, 100), Vec3(40, 40, 100)};
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> up(0.0, 40.0), ud(-30.0, 30.0), udt(0.1, 2.0);
  for (int i = 0; i < 100000; ++i) {
    const double dt = udt(g);
    const auto r = move_uav(Vec3(up(g), up(g), 100), Vec3(ud(g), ud(g), 0), box, 10.0, dt);
    REQUIRE(box.contains(r.position));
    REQUIRE(r.speed <= 10.0);
  }
}

TEST_CASE("propulsion power") {
  const EnergyModel m;
  CHECK(propulsion_power(0.0, m) == doctest::Approx(168.49).epsilon(1e-15));
  CHECK(m.hover_power() == doctest::Approx(168.49).epsilon(1e-15));
  for (double v : {m.v0, 1.0, 7.5, 12.0, 30.0}) {
    const double want = static_cast<double>(oracle::propulsion(v));
    CHECK(std::abs(propulsion_power(v, m) - want) <= 1e-12 * want);
  }
  // Parasite term dominates the profile term at 30 m/s.
  const double v = 30.0;
  const double parasite = 0.5 * m.d0 * m.rho * m.s * m.a_disc * v * v * v;
  const double profile = m.p0 * (1.0 + 3.0 * v * v / (m.u_tip * m.u_tip));
  CHECK(parasite > profile);
  CHECK_THROWS_AS(propulsion_power(-0.1, m), DomainError);
}

TEST_CASE("power curve has an interior minimum below hover") {
  const EnergyModel m;
  double best_v = 0.0, best = propulsion_power(0.0, m);
  for (int i = 1; i <= 4000; ++i) {
    const double v = i * 0.01;
    const double p = propulsion_power(v, m);
    if (p < best) best = p, best_v = v;
  }
  CHECK(best_v > 0.0);
  CHECK(best < m.hover_power());
}

TEST_CASE("step energy") {
  const EnergyModel m;
  const std::vector<double> hover(4, 0.0);
  CHECK(step_energy(hover, m, 1.0) == doctest::Approx(673.96).epsilon(1e-15));
  const std::vector<double> one{6.5};
  CHECK(step_energy(one, m, 1.0) == propulsion_power(6.5, m));
  const std::vector<double> mixed{0.0, 2.0, 9.5, 4.25, 10.0};
  oracle::Real want = 0;
  for (double v : mixed) want += oracle::propulsion(v) * 0.5L;
  CHECK(std::abs(step_energy(mixed, m, 0.5) - static_cast<double>(want)) < 1e-10);
  // Additive over disjoint subsets.
  const std::vector<double> a{0.0, 2.0}, b{9.5, 4.25, 10.0};
  CHECK(step_energy(mixed, m, 0.5) ==
        doctest::Approx(step_energy(a, m, 0.5) + step_energy(b, m, 0.5)).epsilon(1e-14));
}

TEST_CASE("energy model validation") {
  EnergyModel m;
  m.rho = 0.0;
  CHECK_THROWS_AS(m.validate(), DomainError);
}
