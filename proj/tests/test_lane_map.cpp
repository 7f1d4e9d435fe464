#include "spoofshield/lane_map.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace spoofshield;

namespace {

// Independent brute-force oracle: walk every segment at a fine step and
// keep the smallest point distance. Never touches project().
double dense_min_distance(const Vec2& p, const LaneMap& map, double step = 1e-4) {
  double best = std::numeric_limits<double>::infinity();
  for (const LaneSegment& s : map.segments()) {
    const double len = s.length();
    const Vec2 dir = (s.end - s.start) / len;
    // coarse pass, then refine around the best offset
    double coarse_best = std::numeric_limits<double>::infinity();
    double coarse_at = 0.0;
    const double coarse = 1e-2;
    for (double u = 0.0; u <= len; u += coarse) {
      const double d = (p - (s.start + u * dir)).norm();
      if (d < coarse_best) {
        coarse_best = d;
        coarse_at = u;
      }
    }
    {
      const double d = (p - s.end).norm();
      if (d < coarse_best) {
        coarse_best = d;
        coarse_at = len;
      }
    }
    for (double u = std::max(0.0, coarse_at - 2 * coarse); u <= std::min(len, coarse_at + 2 * coarse);
         u += step) {
      best = std::min(best, (p - (s.start + u * dir)).norm());
    }
  }
  return best;
}

LaneMap straight_x_axis() {
  LaneMap::Lane lane;
  lane.id = "l";
  for (int i = 0; i <= 20; ++i) lane.points.emplace_back(double(i), 0.0);
  return LaneMap({lane}, 1.0);
}

}  // namespace

TEST_CASE("build_map straight lane") {
  LaneMap::Lane lane{"a", {{0, 0}, {10, 0}, {20, 0}}};
  LaneMap map({lane}, 10.0);
  REQUIRE(map.segments().size() == 2);
  CHECK(map.segments()[0].heading == doctest::Approx(0.0));
  CHECK(map.segments()[1].heading == doctest::Approx(0.0));
}

TEST_CASE("build_map rejects degenerate lanes") {
  CHECK_THROWS_AS(LaneMap({LaneMap::Lane{"a", {{0, 0}}}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(LaneMap({LaneMap::Lane{"a", {{0, 0}, {0, 0}}}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(LaneMap({LaneMap::Lane{"a", {{0, 0}, {std::nan(""), 1}}}}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("build_map circle headings advance by arc over radius") {
  const double R = 50.0;
  LaneMap::Lane lane{"c", {}};
  for (int i = 0; i <= 100; ++i) {
    const double phi = i * 1.0 / R;  // 1 m arc steps
    lane.points.emplace_back(R * std::sin(phi), R * (1.0 - std::cos(phi)));
  }
  LaneMap map({lane}, 1.0);
  for (size_t i = 0; i < map.segments().size(); ++i) {
    // chord heading of an arc = tangent heading at the midpoint
    const double expected = (i + 0.5) / R;
    CHECK(map.segments()[i].heading == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("project axis-aligned examples") {
  LaneSegment seg{{0, 0}, {10, 0}, 0, 0.0};
  const Projection a = project({3, 4}, seg);
  CHECK(a.foot.x() == doctest::Approx(3.0));
  CHECK(a.foot.y() == doctest::Approx(0.0));
  CHECK(a.distance == doctest::Approx(4.0));
  CHECK(a.on_segment);
  const Projection b = project({-2, 5}, seg);
  CHECK(b.foot.x() == doctest::Approx(-2.0));
  CHECK_FALSE(b.on_segment);
}

TEST_CASE("project vertical segment") {
  LaneSegment seg{{2, 0}, {2, 10}, 0, kPi / 2};
  const Projection p = project({5, 3}, seg);
  CHECK(p.foot.x() == doctest::Approx(2.0));
  CHECK(p.foot.y() == doctest::Approx(3.0));
  CHECK(p.distance == doctest::Approx(3.0));
  CHECK(p.on_segment);
}

TEST_CASE("projection idempotence") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 200; ++i) {
    LaneSegment seg{{u(rng), u(rng)}, {u(rng), u(rng)}, 0, 0.0};
    if (seg.length() < 1e-6) continue;
    seg.heading = std::atan2(seg.end.y() - seg.start.y(), seg.end.x() - seg.start.x());
    const Projection p = project({u(rng), u(rng)}, seg);
    const Projection q = project(p.foot, seg);
    CHECK((q.foot - p.foot).norm() <= 1e-9);
    CHECK(q.distance <= 1e-9);
  }
}

TEST_CASE("project random point matches dense sampling") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 50; ++i) {
    LaneMap::Lane lane{"r", {{u(rng), u(rng)}, {u(rng), u(rng)}}};
    if ((Vec2(lane.points[0].x(), lane.points[0].y()) -
         Vec2(lane.points[1].x(), lane.points[1].y()))
            .norm() < 0.5)
      continue;
    LaneMap map({lane}, 1.0);
    const Vec2 p(u(rng), u(rng));
    const Projection proj = project(p, map.segments()[0]);
    const double oracle = dense_min_distance(p, map);
    if (proj.on_segment) CHECK(proj.distance == doctest::Approx(oracle).epsilon(1e-3));
  }
}

TEST_CASE("match_lateral sign and heading correction") {
  const LaneMap map = straight_x_axis();
  SUBCASE("lane to the right gives negative d_map") {
    const LateralFix fix = map.match_lateral({5, 2}, 0.0);
    REQUIRE(fix.usable());
    CHECK(fix.d0 == doctest::Approx(2.0));
    CHECK(fix.d_map == doctest::Approx(-2.0));
  }
  SUBCASE("lane to the left gives positive d_map") {
    const LateralFix fix = map.match_lateral({5, -2}, 0.0);
    REQUIRE(fix.usable());
    CHECK(fix.d_map == doctest::Approx(2.0));
  }
  SUBCASE("60 degree offset doubles the magnitude and flags the fix") {
    const LateralFix fix = map.match_lateral({5, 2}, deg2rad(60.0));
    CHECK(fix.status == MatchStatus::heading_singular);
    CHECK(std::abs(fix.d_map) == doctest::Approx(4.0));
  }
  SUBCASE("just under the cap stays usable") {
    const LateralFix fix = map.match_lateral({5, 2}, deg2rad(59.0));
    CHECK(fix.usable());
    CHECK(std::abs(fix.d_map) == doctest::Approx(2.0 / std::cos(deg2rad(59.0))));
  }
  SUBCASE("no match outside the search radius") {
    const LateralFix fix = map.match_lateral({5, 100}, 0.0);
    CHECK(fix.status == MatchStatus::no_match);
  }
}

TEST_CASE("match_lateral picks the nearer of two lanes") {
  LaneMap map({LaneMap::Lane{"near", {{0, 1.5}, {10, 1.5}}},
               LaneMap::Lane{"far", {{0, -2.0}, {10, -2.0}}}},
              1.0);
  const LateralFix fix = map.match_lateral({5, 0}, 0.0);
  REQUIRE(fix.usable());
  CHECK(fix.d0 == doctest::Approx(1.5));
  CHECK(map.segments()[fix.segment_index].lane == 0);
}

TEST_CASE("match_lateral oracle equivalence on random maps") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int trial = 0; trial < 20; ++trial) {
    // random short polyline
    LaneMap::Lane lane{"r", {}};
    Vec2 p(u(rng), u(rng));
    lane.points.push_back(p);
    for (int i = 0; i < 8; ++i) {
      const double ang = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
      p += 3.0 * Vec2(std::cos(ang), std::sin(ang));
      lane.points.push_back(p);
    }
    LaneMap map({lane}, 1.0);
    for (int q = 0; q < 25; ++q) {
      const Vec2 query(u(rng), u(rng));
      const LateralFix fix = map.match_lateral(query, 0.0, {100.0, kPi});  // cap off
      const double oracle = dense_min_distance(query, map);
      if (fix.segment_index >= 0) {
        // oracle includes endpoint distances; d0 only on-segment feet, so
        // d0 >= oracle always and equality when the nearest foot projects
        CHECK(fix.d0 >= oracle - 1e-3);
        const Projection pr = project(query, map.segments()[fix.segment_index]);
        CHECK(pr.on_segment);
      }
    }
  }
}

TEST_CASE("match_lateral d0 equals dense minimum when feet project onto segments") {
  const LaneMap map = straight_x_axis();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(1.0, 19.0), uy(-8.0, 8.0);
  for (int i = 0; i < 200; ++i) {
    const Vec2 q(ux(rng), uy(rng));
    const LateralFix fix = map.match_lateral(q, 0.0, {50.0, kPi});
    REQUIRE(fix.segment_index >= 0);
    CHECK(fix.d0 == doctest::Approx(dense_min_distance(q, map)).epsilon(1e-3));
  }
}

TEST_CASE("rigid motion invariance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20, 20);
  const LaneMap base = straight_x_axis();
  for (int trial = 0; trial < 20; ++trial) {
    const double ang = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
    const Vec2 shift(u(rng), u(rng));
    Eigen::Rotation2D<double> rot(ang);
    LaneMap::Lane lane{"t", {}};
    for (const Vec2& p : base.lanes()[0].points) lane.points.push_back(rot * p + shift);
    LaneMap moved({lane}, 1.0);

    const Vec2 q(u(rng) * 0.4 + 10.0, u(rng) * 0.2);
    const double heading = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    const LateralFix a = base.match_lateral(q, heading);
    const LateralFix b = moved.match_lateral(rot * q + shift, wrap_angle(heading + ang));
    REQUIRE(a.segment_index >= 0);
    REQUIRE(b.segment_index >= 0);
    CHECK(a.d0 == doctest::Approx(b.d0).epsilon(1e-9));
    CHECK(std::abs(a.d_map) == doctest::Approx(std::abs(b.d_map)).epsilon(1e-9));
  }
}

TEST_CASE("monotone heading correction") {
  const LaneMap map = straight_x_axis();
  double prev = 0.0;
  for (double deg = 0.0; deg < 60.0; deg += 1.0) {
    const LateralFix fix = map.match_lateral({5, 2}, deg2rad(deg), {30.0, deg2rad(60.0)});
    CHECK(std::abs(fix.d_map) >= prev - 1e-12);
    prev = std::abs(fix.d_map);
  }
}

TEST_CASE("reported feet satisfy the endpoint bound") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-25, 25);
  const LaneMap map = straight_x_axis();
  for (int i = 0; i < 500; ++i) {
    const Vec2 q(u(rng), u(rng));
    const LateralFix fix = map.match_lateral(q, 0.0, {100.0, kPi});
    if (fix.segment_index < 0) continue;
    const LaneSegment& s = map.segments()[fix.segment_index];
    const Projection pr = project(q, s);
    REQUIRE(pr.on_segment);
    const double lo = std::min(s.start.x(), s.end.x()), hi = std::max(s.start.x(), s.end.x());
    CHECK(pr.foot.x() >= lo - 1e-12);
    CHECK(pr.foot.x() <= hi + 1e-12);
  }
}

TEST_CASE("json round trip and validation") {
  nlohmann::json j = nlohmann::json::parse(R"([
    {"lane_id": "a", "points": [[0,0],[10,0],[20,0]]},
    {"lane_id": "b", "points": [[0,3.5],[10,3.5]]}
  ])");
  const LaneMap map = LaneMap::from_json(j, 10.0);
  CHECK(map.lanes().size() == 2);
  CHECK(map.segments().size() == 3);
  CHECK(map.to_json() == j);

  nlohmann::json bad = nlohmann::json::parse(R"([{"lane_id":"x","points":[[0,0]]}])");
  CHECK_THROWS_AS(LaneMap::from_json(bad, 1.0), std::invalid_argument);
}
