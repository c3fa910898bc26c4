#include <doctest.h>

#include <algorithm>
#include <set>

#include "mcd/error.hpp"
#include "mcd/phantom.hpp"

using namespace mcd;

TEST_SUITE("phantom") {
  TEST_CASE("moons cloud: count, unit cube, uniform third axis") {
    PointCloudSpec s;
    s.kind = CloudKind::moons;
    s.seed = 7;
    s.n_points = 1000;
    const auto pts = generate_point_cloud(s);
    REQUIRE(pts.size() == 1000);
    double zsum = 0;
    std::size_t low = 0;
    for (const auto& p : pts) {
      CHECK(p.x >= 0.0);
      CHECK(p.x < 1.0);
      CHECK(p.y >= 0.0);
      CHECK(p.y < 1.0);
      CHECK(p.z >= 0.0);
      CHECK(p.z < 1.0);
      zsum += p.z;
      low += p.z < 0.5;
    }
    // Uniform[0,1): mean 0.5 with sd 0.289/sqrt(1000) ~ 0.009
    CHECK(zsum / 1000.0 == doctest::Approx(0.5).epsilon(0.06));
    CHECK(low > 440);
    CHECK(low < 560);
  }

  TEST_CASE("determinism and preconditions") {
    PointCloudSpec s;
    s.seed = 3;
    const auto a = generate_point_cloud(s), b = generate_point_cloud(s);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].x == b[i].x && a[i].y == b[i].y && a[i].z == b[i].z));
    s.n_points = 0;
    CHECK_THROWS_AS(generate_point_cloud(s), ConfigError);
    CHECK_THROWS_AS(parse_cloud_kind("torus"), ConfigError);
  }

  TEST_CASE("priority resolves overlaps independent of order") {
    PointCloudSpec a;
    a.kind = CloudKind::s_curve;
    a.n_points = 3000;
    a.priority = 1;
    a.material_id = 3;
    a.seed = 1;
    PointCloudSpec b = a;
    b.priority = 2;
    b.material_id = 4;  // same seed: identical footprint
    std::vector<PointCloudSpec> ab{a, b}, ba{b, a};
    const auto v1 = rasterize(ab, {16, 16, 16}, 0.1);
    const auto v2 = rasterize(ba, {16, 16, 16}, 0.1);
    CHECK(v1.labels == v2.labels);
    std::size_t n4 = 0;
    for (auto l : v1.labels.storage()) {
      CHECK((l == 0 || l == 4));
      n4 += l == 4;
    }
    CHECK(n4 > 0);
  }

  TEST_CASE("empty cloud list gives background only") {
    const auto v = rasterize({}, {8, 8, 8}, 1.0);
    CHECK(std::all_of(v.labels.storage().begin(), v.labels.storage().end(), [](auto l) { return l == 0; }));
  }

  TEST_CASE("default five-material phantom at 64^3 contains every label") {
    const auto clouds = default_phantom_clouds(42);
    const auto v = rasterize(clouds, {64, 64, 64}, 0.1);
    std::vector<std::size_t> hist(6, 0);
    for (auto l : v.labels.storage()) {
      REQUIRE(l <= 5);
      ++hist[l];
    }
    for (int m = 1; m <= 5; ++m) CHECK(hist[static_cast<std::size_t>(m)] > 0);
    const auto again = rasterize(default_phantom_clouds(42), {64, 64, 64}, 0.1);
    CHECK(again.labels == v.labels);
  }

  TEST_CASE("motion series") {
    MotionSeriesSpec s;
    s.n_frames = 3;
    s.origin_x = 20;
    s.origin_y = 24;
    SUBCASE("no motion -> identical frames") {
      const auto f = generate_motion_series(s, {48, 48});
      for (std::size_t i = 0; i < 48 * 48; ++i) {
        CHECK(f[i] == f[48 * 48 + i]);
        CHECK(f[i] == f[2 * 48 * 48 + i]);
      }
    }
    SUBCASE("velocity (1,0): frame 2 is frame 0 shifted by 2 px") {
      s.velocity_px_per_frame = {1.0, 0.0};
      const auto f = generate_motion_series(s, {48, 48});
      for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 2; x < 48; ++x) CHECK(f(2, y, x) == f(0, y, x - 2));
    }
    SUBCASE("one frame is rejected") {
      s.n_frames = 1;
      CHECK_THROWS_AS(generate_motion_series(s, {48, 48}), ConfigError);
    }
  }
}
