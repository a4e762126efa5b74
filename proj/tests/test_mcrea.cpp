#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

#include "fas/error.hpp"
#include "fas/mcrea.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace fas;
using namespace fas::mcrea;

namespace {

Eigen::Matrix3d as_matrix(const SimilarityTransform& t) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const double c = std::cos(t.rotation) * t.scale, s = std::sin(t.rotation) * t.scale;
  m << c, -s, t.tx, s, c, t.ty, 0, 0, 1;
  return m;
}

Eigen::Matrix3d umeyama(const std::vector<Point2>& src, const std::vector<Point2>& dst) {
  Eigen::Matrix2Xd a(2, src.size()), b(2, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    a.col(i) << src[i].x, src[i].y;
    b.col(i) << dst[i].x, dst[i].y;
  }
  return Eigen::umeyama(a, b, true);
}

bool background_consistent(const BatchItem& it) {
  for (std::size_t i = 0; i < it.label.background.size(); ++i) {
    const bool fg = it.attack_region.data[i] || it.living_region.data[i];
    if (it.label.background.data[i] != (fg ? 0.0f : 1.0f)) return false;
    if (!it.attack_region.data[i] && it.label.attack.data[i] != 0.0f) return false;
    if (!it.living_region.data[i] && it.label.living.data[i] != 0.0f) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("similarity fit agrees with Eigen's Umeyama estimator") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(0.0, 60.0), ang(-3.1, 3.1), sc(0.5, 2.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityTransform truth{sc(rng), ang(rng), d(rng) - 30, d(rng) - 30};
    std::vector<Point2> src(3 + trial % 10), dst;
    for (auto& p : src) p = {d(rng), d(rng)};
    for (const auto& p : src) {
      const auto q = truth.apply(p);
      dst.push_back({q.x + noise(rng), q.y + noise(rng)});
    }
    const auto fit = fit_similarity(src, dst);
    const Eigen::Matrix3d diff = as_matrix(fit) - umeyama(src, dst);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("similarity fit recovers an exact transform and inverts") {
  const SimilarityTransform truth{1.5, 0.4, 3.0, -2.0};
  const std::vector<Point2> src{{0, 0}, {10, 0}, {3, 7}, {9, 4}};
  std::vector<Point2> dst;
  for (const auto& p : src) dst.push_back(truth.apply(p));
  const auto fit = fit_similarity(src, dst);
  CHECK(fit.scale == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(fit.rotation == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(fit.tx == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.ty == doctest::Approx(-2.0).epsilon(1e-12));
  const auto back = fit.apply_inverse(fit.apply({5.5, -1.25}));
  CHECK(back.x == doctest::Approx(5.5));
  CHECK(back.y == doctest::Approx(-1.25));

  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(fit_similarity(line, line), SingularFitError);
  const std::vector<Point2> pair{{0, 0}, {1, 0}};
  CHECK_THROWS_AS(fit_similarity(pair, pair), SingularFitError);
}

TEST_CASE("aligning a region onto itself copies the hull pixels") {
  std::mt19937_64 rng(2);
  const auto img = testing::random_image(rng, 12, 12);
  const std::vector<Point2> pts{{2, 2}, {9, 3}, {5, 9}};
  const auto a = align_region(img, pts, pts, 12, 12);
  CHECK(a.mask == fill_convex_polygon(convex_hull(pts), 12, 12));
  for (int v = 0; v < 12; ++v)
    for (int u = 0; u < 12; ++u)
      if (a.mask.at(u, v)) {
        CHECK(a.source_index[v * 12 + u] == v * 12 + u);
        CHECK(std::equal(img.px(u, v), img.px(u, v) + 3, a.warped.px(u, v)));
      }
}

TEST_CASE("overlay keeps image and labels in lockstep pixel by pixel") {
  const auto batch = testing::synthetic_batch(5, 0, 2);
  auto target = batch.items[0];
  auto donor = batch.items[1];
  const auto out = apply_scheme(target, donor, "mouth", "mouth", Scheme::overlay, 1.0);
  CHECK(donor == batch.items[1]);
  REQUIRE(count_set(out.target_written) > 0);
  const auto& orig = batch.items[0];
  for (int v = 0; v < 64; ++v)
    for (int u = 0; u < 64; ++u) {
      const std::size_t t = static_cast<std::size_t>(v) * 64 + u;
      if (!out.target_written.at(u, v)) {
        CHECK(std::equal(orig.image.px(u, v), orig.image.px(u, v) + 3, target.image.px(u, v)));
        CHECK(target.label.attack.data[t] == orig.label.attack.data[t]);
        CHECK(target.label.living.data[t] == orig.label.living.data[t]);
        continue;
      }
      const auto q = out.transform.apply_inverse({double(u), double(v)});
      const int su = static_cast<int>(std::lround(q.x)), sv = static_cast<int>(std::lround(q.y));
      const std::size_t s = static_cast<std::size_t>(sv) * 64 + su;
      CHECK(std::equal(donor.image.px(su, sv), donor.image.px(su, sv) + 3, target.image.px(u, v)));
      CHECK(target.label.attack.data[t] == donor.label.attack.data[s]);
      CHECK(target.label.living.data[t] == donor.label.living.data[s]);
    }
  CHECK(background_consistent(target));
  // Region landmarks follow the transplanted content.
  const auto moved = target.landmarks.region_points("mouth");
  const auto donor_pts = donor.landmarks.region_points("mouth");
  for (std::size_t k = 0; k < moved.size(); ++k) {
    const auto p = out.transform.apply(donor_pts[k]);
    CHECK(moved[k].x == doctest::Approx(std::clamp(p.x, 0.0, 63.999)));
  }
}

TEST_CASE("weak overlay blends colour without touching labels") {
  const auto batch = testing::synthetic_batch(5, 0, 2);
  auto target = batch.items[0];
  auto donor = batch.items[1];
  const auto out = apply_scheme(target, donor, "nose", "nose", Scheme::overlay, 0.3);
  CHECK(count_set(out.target_written) > 0);
  CHECK(target.label == batch.items[0].label);
  CHECK(target.landmarks == batch.items[0].landmarks);
  CHECK(target.image != batch.items[0].image);
}

TEST_CASE("integrated attack transplants only donor attack pixels") {
  pipeline::SynthConfig cfg;
  cfg.count = 64;
  cfg.seed = 5;
  int bona = -1, partial = -1;
  for (int i = 0; i < cfg.count && (bona < 0 || partial < 0); ++i) {
    const auto s = pipeline::render_synthetic(cfg, i);
    if (s.truth_label == TruthLabel::bona_fide && bona < 0) bona = i;
    if (s.attack_type == "rigidmask" && partial < 0) partial = i;
  }
  REQUIRE(bona >= 0);
  REQUIRE(partial >= 0);
  auto target = testing::annotated_item(pipeline::render_synthetic(cfg, bona));
  auto donor = testing::annotated_item(pipeline::render_synthetic(cfg, partial));
  const auto before = target;
  const auto out = apply_scheme(target, donor, "mouth", "mouth", Scheme::integrated_attack);
  REQUIRE(count_set(out.target_written) > 0);
  for (std::size_t t = 0; t < target.attack_region.size(); ++t)
    if (out.target_written.data[t]) CHECK(target.attack_region.data[t] == 1);
  CHECK(background_consistent(target));

  // A bona fide donor has no attack pixels to give.
  auto target2 = donor;
  auto bona_donor = before;
  const auto none = apply_scheme(target2, bona_donor, "mouth", "mouth", Scheme::integrated_attack);
  CHECK(count_set(none.target_written) == 0);
  CHECK(target2.image == donor.image);
}

TEST_CASE("clipping exchange applied twice restores both items") {
  const auto batch = testing::synthetic_batch(9, 0, 4);
  for (const char* region : {"eyes", "mouth", "nose", "face_skin"}) {
    auto a = batch.items[0];
    auto b = batch.items[3];
    const auto out = apply_scheme(a, b, region, region, Scheme::clipping_exchange);
    CHECK(a != batch.items[0]);
    CHECK(background_consistent(a));
    CHECK(background_consistent(b));
    clipping_exchange(a, b, out.target_box, out.donor_box, region);
    a.rebuild_background();
    b.rebuild_background();
    CHECK(a == batch.items[0]);
    CHECK(b == batch.items[3]);
  }
  auto a = batch.items[0];
  auto b = batch.items[1];
  CHECK_THROWS_AS(clipping_exchange(a, b, {0, 0, 3, 3}, {0, 0, 4, 3}, "eyes"), ValidationError);
  CHECK_THROWS_AS(clipping_exchange(a, b, {62, 0, 3, 3}, {0, 0, 3, 3}, "eyes"), ValidationError);
}

TEST_CASE("batch augmentation touches exactly floor(gamma * N) items") {
  const auto batch = testing::synthetic_batch(13, 4, 4);
  for (Scheme scheme : {Scheme::overlay, Scheme::integrated_attack}) {
    AugmentConfig cfg;
    cfg.scheme = scheme;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      cfg.seed = seed;
      AugmentLog log;
      const auto out = mcrea_augment(batch, cfg, &log);
      CHECK(log.steps.size() == 2);
      for (std::size_t i = 2; i < 4; ++i) CHECK(out.items[i] == batch.items[i]);
      for (const auto& it : out.items) CHECK(background_consistent(it));
      if (scheme == Scheme::overlay)
        for (std::size_t i = 0; i < 2; ++i) CHECK(out.items[i] != batch.items[i]);
      CHECK(mcrea_augment(batch, cfg) == out);
    }
  }
}

TEST_CASE("augmentation parameters are validated") {
  const auto batch = testing::synthetic_batch(13, 0, 2);
  AugmentConfig cfg;
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(mcrea_augment(batch, cfg), ValidationError);
  cfg.gamma = 0.5;
  cfg.rho = 0;
  CHECK_THROWS_AS(mcrea_augment(batch, cfg), ValidationError);
  cfg.rho = 1;
  cfg.gamma = 0.0;
  CHECK(mcrea_augment(batch, cfg) == batch);
  cfg.gamma = 1.0;
  Batch single;
  single.items.push_back(batch.items[0]);
  CHECK_THROWS_AS(mcrea_augment(single, cfg), ValidationError);
  CHECK(parse_scheme("clipping_exchange") == Scheme::clipping_exchange);
  CHECK_THROWS_AS(parse_scheme("cutmix"), ValidationError);
}

TEST_CASE("from_map derives supports from the label planes") {
  ThreeChannelMap m(1, 4);
  m.attack.data = {0.6f, 0.0f, 0.0f, 0.0f};
  m.living.data = {0.0f, 0.7f, 0.0f, 0.0f};
  m.background.data = {0.0f, 0.0f, 0.0f, 1.0f};
  const auto it = BatchItem::from_map(ColorImage(1, 4), m, LandmarkSet{});
  CHECK(it.attack_region.data == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(it.living_region.data == std::vector<std::uint8_t>{0, 1, 1, 0});
}
