#include <doctest.h>

#include <algorithm>
#include <random>

#include "fas/core.hpp"
#include "fas/error.hpp"
#include "support.hpp"

using namespace fas;

namespace {

// Point-in-triangle via barycentric coordinates, boundary inclusive.
bool in_triangle(double px, double py, const Point2& a, const Point2& b, const Point2& c) {
  const double det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
  const double l1 = ((b.y - c.y) * (px - c.x) + (c.x - b.x) * (py - c.y)) / det;
  const double l2 = ((c.y - a.y) * (px - c.x) + (a.x - c.x) * (py - c.y)) / det;
  const double l3 = 1.0 - l1 - l2;
  const double eps = 1e-9;
  return l1 >= -eps && l2 >= -eps && l3 >= -eps;
}

double signed_area(const Polygon& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return s / 2;
}

}  // namespace

TEST_CASE("fill of an axis-aligned square includes boundary pixel centres") {
  const Polygon sq{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  const Bitmap m = fill_convex_polygon(sq, 5, 5);
  CHECK(count_set(m) == 9);
  CHECK(m.at(1, 1) == 1);
  CHECK(m.at(3, 3) == 1);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(4, 2) == 0);
}

TEST_CASE("polygon fill matches a barycentric oracle on random triangles in both windings") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-3.0, 20.0);
  int checked = 0;
  while (checked < 200) {
    const Point2 a{d(rng), d(rng)}, b{d(rng), d(rng)}, c{d(rng), d(rng)};
    const double area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if (std::abs(area) < 1.0) continue;
    ++checked;
    const Bitmap fwd = fill_convex_polygon({a, b, c}, 17, 19);
    const Bitmap rev = fill_convex_polygon({c, b, a}, 17, 19);
    REQUIRE(fwd == rev);
    for (int v = 0; v < 17; ++v)
      for (int u = 0; u < 19; ++u) REQUIRE((fwd.at(u, v) != 0) == in_triangle(u, v, a, b, c));
  }
}

TEST_CASE("convex hull contains every input point and uses only input vertices") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> pts(3 + trial % 20);
    for (auto& p : pts) p = {d(rng), d(rng)};
    const Polygon hull = convex_hull(pts);
    REQUIRE(hull.size() >= 3);
    CHECK(signed_area(hull) > 0.0);
    for (const auto& v : hull) CHECK(std::find(pts.begin(), pts.end(), v) != pts.end());
    for (const auto& p : pts)
      for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        CHECK((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-9);
      }
  }
}

TEST_CASE("convex hull rejects degenerate inputs") {
  const std::vector<Point2> collinear{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(convex_hull(collinear), ValidationError);
  const std::vector<Point2> two{{0, 0}, {1, 1}};
  CHECK_THROWS_AS(convex_hull(two), ValidationError);
  const std::vector<Point2> repeated{{1, 1}, {1, 1}, {1, 1}};
  CHECK_THROWS_AS(convex_hull(repeated), ValidationError);
}

TEST_CASE("mask algebra agrees with per-pixel boolean logic") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    RegionMask a{testing::random_bitmap(rng, 9, 7)}, b{testing::random_bitmap(rng, 9, 7)};
    const auto u = mask_union(a, b), in = mask_intersect(a, b), s = mask_subtract(a, b),
               inv = mask_invert(a);
    for (std::size_t i = 0; i < a.bitmap.size(); ++i) {
      const bool x = a.bitmap.data[i], y = b.bitmap.data[i];
      CHECK(u.bitmap.data[i] == (x || y));
      CHECK(in.bitmap.data[i] == (x && y));
      CHECK(s.bitmap.data[i] == (x && !y));
      CHECK(inv.bitmap.data[i] == !x);
    }
  }
  RegionMask small{Bitmap(3, 3)}, big{Bitmap(4, 3)};
  CHECK_THROWS_AS(mask_union(small, big), ValidationError);
  const auto empty = mask_union(std::span<const RegionMask>{}, 2, 5);
  CHECK(empty.bitmap.height == 2);
  CHECK(count_set(empty.bitmap) == 0);
}

TEST_CASE("depth normalization rescales inside the support and zeroes the rest") {
  FloatPlane raw(2, 3);
  raw.data = {2.0f, 4.0f, 6.0f, 100.0f, 3.0f, 5.0f};
  Bitmap support(2, 3);
  support.data = {1, 1, 1, 0, 1, 1};
  const auto d = normalize_depth(raw, support);
  CHECK(d.values.data[0] == doctest::Approx(0.0));
  CHECK(d.values.data[1] == doctest::Approx(0.5));
  CHECK(d.values.data[2] == doctest::Approx(1.0));
  CHECK(d.values.data[3] == 0.0f);
  CHECK(d.values.data[4] == doctest::Approx(0.25));

  FloatPlane flat(2, 2, 7.0f);
  Bitmap all(2, 2, 1);
  for (float x : normalize_depth(flat, all).values.data) CHECK(x == 1.0f);
  CHECK_THROWS_AS(normalize_depth(flat, Bitmap(2, 2)), ValidationError);
}

TEST_CASE("dilation grows a pixel into a Euclidean disk") {
  Bitmap m(9, 9);
  m.at(4, 4) = 1;
  CHECK(dilate(m, 0) == m);
  int expect = 0;
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) expect += dx * dx + dy * dy <= 4;
  CHECK(count_set(dilate(m, 2)) == static_cast<std::size_t>(expect));
}

TEST_CASE("sample validation enforces label, frame and region invariants") {
  Sample s;
  s.id = "x";
  s.image = ColorImage(8, 8);
  s.landmarks.points = {{1, 1}, {6, 1}, {3, 6}};
  s.landmarks.region_index["nose"] = {0, 1, 2};
  CHECK_NOTHROW(s.validate());

  Sample attack = s;
  attack.truth_label = TruthLabel::attack;
  CHECK_THROWS_AS(attack.validate(), ValidationError);
  attack.attack_type = "print";
  CHECK_NOTHROW(attack.validate());

  Sample outside = s;
  outside.landmarks.points[0] = {8.0, 1.0};
  CHECK_THROWS_AS(outside.validate(), ValidationError);

  Sample unknown = s;
  unknown.landmarks.region_index["tattoo"] = {0};
  CHECK_THROWS_AS(unknown.validate(), ValidationError);
  unknown.pai_regions.push_back({"tattoo", std::nullopt});
  CHECK_NOTHROW(unknown.validate());

  Sample bad_depth = s;
  bad_depth.depth = DepthMap{FloatPlane(4, 8)};
  CHECK_THROWS_AS(bad_depth.validate(), ValidationError);
}

TEST_CASE("region points come back in index order") {
  LandmarkSet lm;
  lm.points = {{0, 0}, {1, 0}, {2, 0}};
  lm.region_index["eyes"] = {2, 0};
  const auto pts = lm.region_points("eyes");
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].x == 2.0);
  CHECK(pts[1].x == 0.0);
  CHECK_THROWS_AS(lm.region_points("mouth"), ValidationError);
}
