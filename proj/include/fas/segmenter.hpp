#ifndef FAS_SEGMENTER_HPP_
#define FAS_SEGMENTER_HPP_

#include <cstdint>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fas/core.hpp"

namespace fas::segmenter {

enum class Polarity { foreground, background_hint };

struct PromptPoint {
  double x = 0.0;
  double y = 0.0;
  Polarity polarity = Polarity::foreground;
  bool operator==(const PromptPoint&) const = default;
};

struct PointPrompt {
  std::vector<PromptPoint> points;
  std::string target_region;

  std::vector<Point2> foreground() const;
  /// At least one foreground point, all points inside the frame.
  void validate(int height, int width) const;
};

struct SegmentationResult {
  std::vector<Bitmap> masks;
  std::vector<double> scores;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual SegmentationResult run(const ColorImage& image, const PointPrompt& prompt) = 0;
};

/// Deterministic stand-in: the filled convex hull of the foreground points,
/// dilated by `dilation_radius`, with score 1.
class MockSegmenter final : public SegmenterBackend {
 public:
  explicit MockSegmenter(int dilation_radius = 0) : radius_(dilation_radius) {}
  SegmentationResult run(const ColorImage& image, const PointPrompt& prompt) override;

 private:
  int radius_;
};

struct ServiceOptions {
  int max_in_flight = 4;
  int timeout_seconds = 30;
  bool multimask = true;
};

/// HTTP client for a promptable-segmentation service (POST /segment).
/// Stateless apart from the in-flight limit; safe for concurrent use.
class ServiceSegmenter final : public SegmenterBackend {
 public:
  explicit ServiceSegmenter(std::string base_url, ServiceOptions options = {});
  SegmentationResult run(const ColorImage& image, const PointPrompt& prompt) override;

 private:
  std::string base_url_;
  ServiceOptions options_;
  std::counting_semaphore<64> in_flight_;
};

/// Service backend when FAS_SEGMENTER_URL is set, otherwise the mock.
std::unique_ptr<SegmenterBackend> backend_from_environment(int mock_dilation = 0);

/// One prompt per requested region. Foreground points are the region's
/// landmarks; landmarks of every other region (not shared with the target)
/// become background hints.
std::vector<PointPrompt> build_point_prompts(const LandmarkSet& landmarks,
                                             std::span<const std::string> regions);

/// Prompt whose foreground points are the polygon vertices.
PointPrompt build_polygon_prompt(const Polygon& polygon, std::string name);

/// Validates the prompt against the image, runs the backend and checks the
/// returned masks. Throws ValidationError, TransportError or IntegrityError.
SegmentationResult segment(const ColorImage& image, const PointPrompt& prompt,
                           SegmenterBackend& backend);

enum class SelectionPolicy { max_score, max_overlap_with_hull };

/// Picks one candidate; ties go to the lowest index. `hull` is only used by
/// max_overlap_with_hull, which scores candidates by IoU with the filled hull.
RegionMask select_mask(const SegmentationResult& result, SelectionPolicy policy,
                       const Polygon& hull = {});

// Wire format ----------------------------------------------------------------

/// Run lengths alternating 0s and 1s in row-major order, starting with 0s.
std::vector<std::int64_t> rle_encode(const Bitmap& mask);
Bitmap rle_decode(std::span<const std::int64_t> counts, int height, int width);

std::string encode_segment_request(const ColorImage& image, const PointPrompt& prompt,
                                   bool multimask);
struct DecodedRequest {
  ColorImage image;
  PointPrompt prompt;
  bool multimask = true;
};
DecodedRequest decode_segment_request(std::string_view body);

std::string encode_segment_response(const SegmentationResult& result);
SegmentationResult decode_segment_response(std::string_view body);

}  // namespace fas::segmenter

#endif  // FAS_SEGMENTER_HPP_
