#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <random>
#include <thread>

#include "fas/error.hpp"
#include "fas/segmenter.hpp"
#include "support.hpp"

using namespace fas;
using namespace fas::segmenter;

namespace {

// Row-major run lengths written out by hand, starting with zeros.
std::vector<std::int64_t> naive_runs(const Bitmap& m) {
  std::vector<std::int64_t> runs{0};
  std::uint8_t current = 0;
  for (auto x : m.data) {
    const std::uint8_t bit = x ? 1 : 0;
    if (bit != current) {
      runs.push_back(0);
      current = bit;
    }
    ++runs.back();
  }
  return runs;
}

class FixedBackend final : public SegmenterBackend {
 public:
  explicit FixedBackend(SegmentationResult r) : r_(std::move(r)) {}
  SegmentationResult run(const ColorImage&, const PointPrompt&) override { return r_; }

 private:
  SegmentationResult r_;
};

PointPrompt triangle_prompt() {
  PointPrompt p;
  p.target_region = "nose";
  p.points = {{2, 2}, {12, 3}, {6, 10}};
  return p;
}

}  // namespace

TEST_CASE("RLE matches hand-counted runs") {
  Bitmap m(2, 3);
  m.data = {0, 1, 1, 0, 0, 1};
  CHECK(rle_encode(m) == std::vector<std::int64_t>{1, 2, 2, 1});
  Bitmap lead(1, 2);
  lead.data = {1, 0};
  CHECK(rle_encode(lead) == std::vector<std::int64_t>{0, 1, 1});
  CHECK(rle_decode(std::vector<std::int64_t>{0, 1, 1}, 1, 2) == lead);
  CHECK_THROWS_AS(rle_decode(std::vector<std::int64_t>{1, 2}, 2, 3), FormatError);
  CHECK_THROWS_AS(rle_decode(std::vector<std::int64_t>{-1, 7}, 2, 3), FormatError);
}

TEST_CASE("RLE agrees with the naive run counter and round-trips random masks") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto m = testing::random_bitmap(rng, 1 + i % 13, 1 + (i * 7) % 17, (i % 10) / 10.0);
    const auto runs = rle_encode(m);
    CHECK(runs == naive_runs(m));
    CHECK(rle_decode(runs, m.height, m.width) == m);
  }
}

TEST_CASE("request and response bodies round-trip") {
  std::mt19937_64 rng(4);
  const auto img = testing::random_image(rng, 9, 11);
  PointPrompt p = triangle_prompt();
  p.points.push_back({1, 7, Polarity::background_hint});
  const auto req = decode_segment_request(encode_segment_request(img, p, false));
  CHECK(req.image == img);
  CHECK(req.prompt.points == p.points);
  CHECK_FALSE(req.multimask);

  // Points travel as whole pixels.
  PointPrompt frac;
  frac.points = {{1.4, 7.6, Polarity::foreground}};
  const auto rounded = decode_segment_request(encode_segment_request(img, frac, true));
  CHECK(rounded.prompt.points.front().x == 1.0);
  CHECK(rounded.prompt.points.front().y == 8.0);
  CHECK(rounded.multimask);

  SegmentationResult r;
  r.masks = {testing::random_bitmap(rng, 9, 11), testing::random_bitmap(rng, 9, 11)};
  r.scores = {0.25, 0.875};
  const auto back = decode_segment_response(encode_segment_response(r));
  CHECK(back.masks == r.masks);
  CHECK(back.scores == r.scores);
  CHECK_THROWS_AS(decode_segment_response("{\"masks\": 1}"), FormatError);
  CHECK_THROWS_AS(decode_segment_response("not json"), FormatError);
}

TEST_CASE("mock segmenter fills the foreground hull with score 1") {
  MockSegmenter mock;
  const ColorImage img(16, 16);
  const auto p = triangle_prompt();
  const auto r = segment(img, p, mock);
  REQUIRE(r.masks.size() == 1);
  CHECK(r.scores[0] == 1.0);
  CHECK(r.masks[0] == fill_convex_polygon(convex_hull(p.foreground()), 16, 16));
  MockSegmenter wide(1);
  CHECK(count_set(segment(img, p, wide).masks[0]) > count_set(r.masks[0]));
}

TEST_CASE("segment rejects invalid prompts and malformed backend output") {
  MockSegmenter mock;
  const ColorImage img(16, 16);
  PointPrompt outside = triangle_prompt();
  outside.points[0].x = 16.0;
  CHECK_THROWS_AS(segment(img, outside, mock), ValidationError);
  PointPrompt hints_only;
  hints_only.points = {{1, 1, Polarity::background_hint}};
  CHECK_THROWS_AS(segment(img, hints_only, mock), ValidationError);

  FixedBackend empty(SegmentationResult{});
  CHECK_THROWS_AS(segment(img, triangle_prompt(), empty), IntegrityError);
  FixedBackend wrong_size(SegmentationResult{{Bitmap(8, 8)}, {0.5}});
  CHECK_THROWS_AS(segment(img, triangle_prompt(), wrong_size), IntegrityError);
  FixedBackend bad_score(SegmentationResult{{Bitmap(16, 16)}, {1.5}});
  CHECK_THROWS_AS(segment(img, triangle_prompt(), bad_score), IntegrityError);
  FixedBackend count_mismatch(SegmentationResult{{Bitmap(16, 16)}, {0.5, 0.2}});
  CHECK_THROWS_AS(segment(img, triangle_prompt(), count_mismatch), IntegrityError);
}

TEST_CASE("mask selection by score and by hull overlap, ties to the lowest index") {
  Bitmap a(4, 4), b(4, 4), c(4, 4);
  a.at(0, 0) = 1;
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 3; ++u) b.at(u, v) = 1;
  c = b;
  SegmentationResult r{{a, b, c}, {0.9, 0.4, 0.9}};
  CHECK(select_mask(r, SelectionPolicy::max_score).bitmap == a);
  const Polygon hull{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const auto picked = select_mask(r, SelectionPolicy::max_overlap_with_hull, hull);
  CHECK(picked.bitmap == b);
}

TEST_CASE("point prompts use region landmarks as foreground and others as hints") {
  LandmarkSet lm;
  lm.points = {{1, 1}, {5, 1}, {3, 4}, {8, 8}, {9, 9}};
  lm.region_index["nose"] = {0, 1, 2};
  lm.region_index["mouth"] = {2, 3, 4};
  const std::string regions[] = {"nose"};
  const auto prompts = build_point_prompts(lm, regions);
  REQUIRE(prompts.size() == 1);
  std::size_t fg = 0, bg = 0;
  for (const auto& p : prompts[0].points) {
    if (p.polarity == Polarity::foreground) ++fg;
    else ++bg;
    if (p.polarity == Polarity::background_hint)
      CHECK(p.x >= 8.0);  // the shared point stays foreground
  }
  CHECK(fg == 3);
  CHECK(bg == 2);
  const std::string missing[] = {"ears"};
  CHECK_THROWS_AS(build_point_prompts(lm, missing), ValidationError);
}

TEST_CASE("service backend talks to an HTTP segmenter") {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::atomic<int> mode{0};  // 0 ok, 1 HTTP 500, 2 garbage body
  server.Post("/segment", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    if (mode == 1) {
      res.status = 500;
      return;
    }
    if (mode == 2) {
      res.set_content("{\"masks\": \"nope\"}", "application/json");
      return;
    }
    const auto decoded = decode_segment_request(req.body);
    SegmentationResult r;
    r.masks.push_back(fill_convex_polygon(convex_hull(decoded.prompt.foreground()),
                                          decoded.image.height, decoded.image.width));
    r.scores.push_back(0.75);
    res.set_content(encode_segment_response(r), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string url = "http://127.0.0.1:" + std::to_string(port);
  ServiceSegmenter service(url);
  const ColorImage img(16, 16);
  const auto r = segment(img, triangle_prompt(), service);
  CHECK(calls.load() == 1);
  REQUIRE(r.masks.size() == 1);
  CHECK(r.scores[0] == 0.75);
  CHECK(r.masks[0] == fill_convex_polygon(convex_hull(triangle_prompt().foreground()), 16, 16));

  mode = 1;
  CHECK_THROWS_AS(segment(img, triangle_prompt(), service), TransportError);
  mode = 2;
  CHECK_THROWS_AS(segment(img, triangle_prompt(), service), TransportError);
  server.stop();
  worker.join();

  ServiceSegmenter unreachable(url, ServiceOptions{1, 1, true});
  CHECK_THROWS_AS(segment(img, triangle_prompt(), unreachable), TransportError);
}
