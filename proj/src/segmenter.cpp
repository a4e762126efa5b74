#include "fas/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fas::segmenter {

using nlohmann::json;

std::vector<Point2> PointPrompt::foreground() const {
  std::vector<Point2> out;
  for (const auto& p : points)
    if (p.polarity == Polarity::foreground) out.push_back({p.x, p.y});
  return out;
}

void PointPrompt::validate(int height, int width) const {
  bool any_fg = false;
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < width && p.y < height))
      throw ValidationError("prompt point (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ") for '" + target_region +
                            "' lies outside the image");
    any_fg = any_fg || p.polarity == Polarity::foreground;
  }
  if (!any_fg)
    throw ValidationError("prompt for '" + target_region + "' has no foreground point");
}

SegmentationResult MockSegmenter::run(const ColorImage& image, const PointPrompt& prompt) {
  const auto fg = prompt.foreground();
  Bitmap mask(image.height, image.width);
  try {
    mask = fill_convex_polygon(convex_hull(fg), image.height, image.width);
  } catch (const ValidationError&) {
    // Fewer than three non-collinear points: mark the points themselves.
    for (const auto& p : fg) {
      const int u = static_cast<int>(std::lround(p.x));
      const int v = static_cast<int>(std::lround(p.y));
      if (mask.contains(u, v)) mask.at(u, v) = 1;
    }
  }
  SegmentationResult out;
  out.masks.push_back(dilate(mask, radius_));
  out.scores.push_back(1.0);
  return out;
}

ServiceSegmenter::ServiceSegmenter(std::string base_url, ServiceOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      in_flight_(std::clamp(options.max_in_flight, 1, 64)) {}

SegmentationResult ServiceSegmenter::run(const ColorImage& image,
                                         const PointPrompt& prompt) {
  const std::string body = encode_segment_request(image, prompt, options_.multimask);
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(base_url_);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  client.set_write_timeout(options_.timeout_seconds, 0);
  auto res = client.Post("/segment", body, "application/json");
  if (!res)
    throw TransportError("segmenter request to " + base_url_ +
                         " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("segmenter returned HTTP " + std::to_string(res->status));
  try {
    return decode_segment_response(res->body);
  } catch (const FormatError& e) {
    throw TransportError(std::string("segmenter protocol violation: ") + e.what());
  }
}

std::unique_ptr<SegmenterBackend> backend_from_environment(int mock_dilation) {
  if (const char* url = std::getenv("FAS_SEGMENTER_URL"); url && *url)
    return std::make_unique<ServiceSegmenter>(url);
  return std::make_unique<MockSegmenter>(mock_dilation);
}

std::vector<PointPrompt> build_point_prompts(const LandmarkSet& landmarks,
                                             std::span<const std::string> regions) {
  for (const auto& r : regions)
    if (!landmarks.has_region(r))
      throw ValidationError("unknown landmark region '" + r + "'");

  std::vector<PointPrompt> prompts;
  for (const auto& r : regions) {
    PointPrompt prompt;
    prompt.target_region = r;
    const auto& own = landmarks.region_index.at(r);
    const std::set<std::size_t> own_set(own.begin(), own.end());
    for (auto i : own)
      prompt.points.push_back({landmarks.points.at(i).x, landmarks.points.at(i).y,
                               Polarity::foreground});
    std::set<std::size_t> hints;
    for (const auto& [name, idx] : landmarks.region_index) {
      if (name == r) continue;
      for (auto i : idx)
        if (!own_set.contains(i)) hints.insert(i);
    }
    for (auto i : hints)
      prompt.points.push_back({landmarks.points.at(i).x, landmarks.points.at(i).y,
                               Polarity::background_hint});
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

PointPrompt build_polygon_prompt(const Polygon& polygon, std::string name) {
  PointPrompt prompt;
  prompt.target_region = std::move(name);
  for (const auto& p : polygon) prompt.points.push_back({p.x, p.y, Polarity::foreground});
  return prompt;
}

SegmentationResult segment(const ColorImage& image, const PointPrompt& prompt,
                           SegmenterBackend& backend) {
  prompt.validate(image.height, image.width);
  auto result = backend.run(image, prompt);
  if (result.masks.empty()) throw IntegrityError("segmenter returned no masks");
  if (result.masks.size() != result.scores.size())
    throw IntegrityError("segmenter returned mismatched mask and score counts");
  for (const auto& m : result.masks)
    if (m.height != image.height || m.width != image.width)
      throw IntegrityError("segmenter mask is " + std::to_string(m.height) + "x" +
                           std::to_string(m.width) + ", image is " +
                           std::to_string(image.height) + "x" +
                           std::to_string(image.width));
  for (double s : result.scores)
    if (!(s >= 0.0 && s <= 1.0)) throw IntegrityError("segmenter score outside [0, 1]");
  return result;
}

RegionMask select_mask(const SegmentationResult& result, SelectionPolicy policy,
                       const Polygon& hull) {
  if (result.masks.empty()) throw ValidationError("cannot select from an empty result");
  std::size_t best = 0;
  if (policy == SelectionPolicy::max_score) {
    for (std::size_t i = 1; i < result.scores.size(); ++i)
      if (result.scores[i] > result.scores[best]) best = i;
  } else {
    const auto& first = result.masks.front();
    const Bitmap target = fill_convex_polygon(hull, first.height, first.width);
    double best_iou = -1.0;
    for (std::size_t i = 0; i < result.masks.size(); ++i) {
      const auto& m = result.masks[i];
      std::size_t inter = 0, uni = 0;
      for (std::size_t k = 0; k < m.size(); ++k) {
        const bool a = m.data[k] != 0, b = target.data[k] != 0;
        inter += a && b;
        uni += a || b;
      }
      const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
      if (iou > best_iou) {
        best_iou = iou;
        best = i;
      }
    }
  }
  RegionMask out;
  out.bitmap = result.masks[best];
  return out;
}

std::vector<std::int64_t> rle_encode(const Bitmap& mask) {
  std::vector<std::int64_t> counts;
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (auto px : mask.data) {
    const std::uint8_t bit = px ? 1 : 0;
    if (bit != current) {
      counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

Bitmap rle_decode(std::span<const std::int64_t> counts, int height, int width) {
  if (height <= 0 || width <= 0) throw FormatError("RLE mask has empty dimensions");
  Bitmap out(height, width);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (auto c : counts) {
    if (c < 0) throw FormatError("negative RLE run");
    if (pos + static_cast<std::size_t>(c) > out.size())
      throw FormatError("RLE runs exceed the mask size");
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(pos), c, bit);
    pos += static_cast<std::size_t>(c);
    bit ^= 1;
  }
  if (pos != out.size()) throw FormatError("RLE runs do not cover the mask");
  return out;
}

std::string encode_segment_request(const ColorImage& image, const PointPrompt& prompt,
                                   bool multimask) {
  json j;
  j["image_png_b64"] = io::base64_encode(io::encode_png(image));
  j["points"] = json::array();
  for (const auto& p : prompt.points)
    j["points"].push_back({{"x", static_cast<int>(std::lround(p.x))},
                           {"y", static_cast<int>(std::lround(p.y))},
                           {"label", p.polarity == Polarity::foreground ? 1 : 0}});
  j["multimask"] = multimask;
  return j.dump();
}

DecodedRequest decode_segment_request(std::string_view body) {
  DecodedRequest out;
  try {
    const json j = json::parse(body);
    const auto bytes = io::base64_decode(j.at("image_png_b64").get<std::string>());
    out.image = io::decode_png(bytes);
    for (const auto& p : j.at("points")) {
      const int label = p.at("label").get<int>();
      if (label != 0 && label != 1) throw FormatError("point label must be 0 or 1");
      out.prompt.points.push_back({static_cast<double>(p.at("x").get<int>()),
                                   static_cast<double>(p.at("y").get<int>()),
                                   label ? Polarity::foreground : Polarity::background_hint});
    }
    out.multimask = j.value("multimask", true);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed segment request: ") + e.what());
  }
  return out;
}

std::string encode_segment_response(const SegmentationResult& result) {
  json j;
  j["masks"] = json::array();
  for (const auto& m : result.masks)
    j["masks"].push_back(
        {{"rle_counts", rle_encode(m)}, {"height", m.height}, {"width", m.width}});
  j["scores"] = result.scores;
  return j.dump();
}

SegmentationResult decode_segment_response(std::string_view body) {
  SegmentationResult out;
  try {
    const json j = json::parse(body);
    for (const auto& m : j.at("masks")) {
      const auto counts = m.at("rle_counts").get<std::vector<std::int64_t>>();
      out.masks.push_back(
          rle_decode(counts, m.at("height").get<int>(), m.at("width").get<int>()));
    }
    out.scores = j.at("scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed segment response: ") + e.what());
  }
  return out;
}

}  // namespace fas::segmenter
