#include <doctest.h>

#include <cmath>
#include <random>

#include "condforge/raster.hpp"
#include "oracles.hpp"

using namespace condforge;

namespace {

int count_set(const GrayImage& img, std::uint8_t v) {
  int n = 0;
  for (auto p : img.pixels) n += p == v;
  return n;
}

// Pixel-center coordinates of a half-unit point.
double px(long long q, int n) { return (static_cast<double>(q) + (n - 1)) / 2.0; }

}  // namespace

TEST_SUITE("raster") {
  TEST_CASE("snap_half is odd and rounds to the nearest half pixel") {
    CHECK(snap_half(0.0) == 0);
    CHECK(snap_half(0.25) == 1);
    CHECK(snap_half(-0.25) == -1);
    CHECK(snap_half(0.74) == 1);
    CHECK(snap_half(0.76) == 2);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-600, 600);
    for (int i = 0; i < 1000; ++i) {
      const double v = u(rng);
      CHECK(snap_half(-v) == -snap_half(v));
    }
    CHECK(snap_half(1e300) == snap_half(1e12));
    CHECK(snap_half(-1e300) == -snap_half(1e300));
  }

  TEST_CASE("to_half maps pixel centers onto the lattice") {
    CHECK(to_half({0, 0}, 4, 3) == HalfPoint{-3, -2});
    CHECK(to_half({3, 2}, 4, 3) == HalfPoint{3, 2});
  }

  TEST_CASE("strokes match the floating-point scanline reference") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const int W = 64 + static_cast<int>(rng() % 40), H = 64 + static_cast<int>(rng() % 40);
      std::uniform_int_distribution<long long> qx(-W - 20, W + 20), qy(-H - 20, H + 20);
      const HalfPoint a{qx(rng), qy(rng)}, b{qx(rng), qy(rng)};
      const int w = 1 + static_cast<int>(rng() % 6);
      GrayImage img(W, H, 0);
      draw_stroke(img, a, b, w, 255);
      std::vector<std::uint8_t> ref(static_cast<std::size_t>(W) * H, 0);
      if (a == b) {
        // a point is a w x w square (|offset| <= w / 2 on both axes)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x)
            if (2.0 * std::abs(x - px(a.x, W)) <= w && 2.0 * std::abs(y - px(a.y, H)) <= w) ref[y * W + x] = 255;
      } else {
        oracle::scanline_segment(ref, W, H, px(a.x, W), px(a.y, H), px(b.x, W), px(b.y, H), w, 255);
      }
      REQUIRE(img.pixels == ref);
    }
  }

  TEST_CASE("pixel count of a single line stays within [0.8, 1.5] L w") {
    // Widths 2..8 on generic lines; width 1 at exactly 45 degrees covers
    // only ~0.71 L under the inclusive-distance rule.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(-180, 180);
    for (int trial = 0; trial < 300; ++trial) {
      const int w = 2 + static_cast<int>(rng() % 7);
      const HalfPoint a{snap_half(pos(rng)), snap_half(pos(rng))}, b{snap_half(pos(rng)), snap_half(pos(rng))};
      const double L = std::hypot(static_cast<double>(b.x - a.x), static_cast<double>(b.y - a.y)) / 2.0;
      if (L < 20) continue;
      GrayImage img(400, 400, 0);
      draw_stroke(img, a, b, w, 255);
      const int n = count_set(img, 255);
      CHECK(n >= 0.8 * L * w);
      CHECK(n <= 1.5 * L * w);
    }
    // Axis-aligned: odd widths centered on a pixel row, even widths on the
    // boundary between two rows (the other placements cover w + 1 rows).
    for (int w : {1, 2, 3, 4, 5}) {
      const long long off = w % 2 == 0 ? 1 : 0;  // half units from a pixel center
      GrayImage h(301, 301, 0), v(301, 301, 0);  // odd: half unit 0 is a pixel center
      draw_stroke(h, HalfPoint{-200, off}, HalfPoint{200, off}, w, 255);
      draw_stroke(v, HalfPoint{off, -200}, HalfPoint{off, 200}, w, 255);
      CHECK(count_set(h, 255) >= 0.8 * 200 * w);
      CHECK(count_set(h, 255) <= 1.5 * 200 * w);
      CHECK(count_set(v, 255) == count_set(h, 255));
    }
  }

  TEST_CASE("strokes are symmetric under mirroring") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<long long> q(-150, 150);
    for (int trial = 0; trial < 100; ++trial) {
      const int W = 100 + static_cast<int>(rng() % 2);  // odd and even widths
      const HalfPoint a{q(rng), q(rng) % 90}, b{q(rng), q(rng) % 90};
      const int w = 1 + static_cast<int>(rng() % 5);
      GrayImage img(W, 100, 0), mir(W, 100, 0);
      draw_stroke(img, a, b, w, 255);
      draw_stroke(mir, HalfPoint{-a.x, a.y}, HalfPoint{-b.x, b.y}, w, 255);
      for (int y = 0; y < 100; ++y)
        for (int x = 0; x < W; ++x) REQUIRE(img.at(x, y) == mir.at(W - 1 - x, y));
    }
  }

  TEST_CASE("clip_parametric") {
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto t = clip_parametric({0, 0}, {1, 0}, -inf, inf, 10, 5);
    REQUIRE(t);
    CHECK((*t)[0] == -10.0);
    CHECK((*t)[1] == 10.0);
    t = clip_parametric({0, 0}, {1, 1}, 0.0, 1.0, 10, 5);
    REQUIRE(t);
    CHECK((*t)[0] == 0.0);
    CHECK((*t)[1] == 1.0);
    CHECK_FALSE(clip_parametric({0, 20}, {1, 0}, -inf, inf, 10, 5));
    CHECK_FALSE(clip_parametric({20, 0}, {1, 0}, 0.0, 1.0, 10, 5));
    // symmetric under x -> -x
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int i = 0; i < 200; ++i) {
      const std::array<double, 2> p{u(rng), u(rng)}, d{u(rng), u(rng)};
      const auto a = clip_parametric(p, d, -inf, inf, 12, 7);
      const auto b = clip_parametric({-p[0], p[1]}, {-d[0], d[1]}, -inf, inf, 12, 7);
      REQUIRE(a.has_value() == b.has_value());
      if (a) {
        CHECK((*a)[0] == (*b)[0]);
        CHECK((*a)[1] == (*b)[1]);
      }
    }
  }
}
