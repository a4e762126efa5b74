#ifndef FAS_MCREA_HPP_
#define FAS_MCREA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fas/core.hpp"

namespace fas::mcrea {

enum class Scheme { integrated_attack, overlay, clipping_exchange };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

struct AugmentConfig {
  double gamma = 0.5;  // fraction of the batch that receives exchanges
  int rho = 1;         // exchange steps per augmented sample
  Scheme scheme = Scheme::overlay;
  std::uint64_t seed = 0;
  double overlay_alpha = 1.0;

  void validate() const;
};

/// One training sample as seen by the augmenter. The region supports travel
/// with the label planes so background can be rebuilt after every edit.
struct BatchItem {
  ColorImage image;
  ThreeChannelMap label;
  LandmarkSet landmarks;
  Bitmap attack_region;
  Bitmap living_region;

  /// Derives supports from a stored map: non-background pixels are attack
  /// where attack > living, living otherwise.
  static BatchItem from_map(ColorImage image, ThreeChannelMap label, LandmarkSet landmarks);
  static BatchItem from_annotation(ColorImage image, ThreeChannelMap label,
                                   LandmarkSet landmarks, Bitmap attack, Bitmap living);
  /// background = NOT(attack_region OR living_region)
  void rebuild_background();
  bool operator==(const BatchItem&) const = default;
};

struct Batch {
  std::vector<BatchItem> items;
  void validate() const;
  bool operator==(const Batch&) const = default;
};

/// x' = scale * R(rotation) * x + (tx, ty)
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(const Point2& p) const;
  Point2 apply_inverse(const Point2& p) const;
};

/// Least-squares similarity mapping `source` onto `target` (paired by index).
/// Throws SingularFitError on fewer than 3 pairs or collinear sources.
SimilarityTransform fit_similarity(std::span<const Point2> source,
                                   std::span<const Point2> target);

struct AlignedRegion {
  SimilarityTransform transform;
  /// Target pixels that receive a donor pixel.
  Bitmap mask;
  /// Donor linear pixel index per target pixel, -1 where `mask` is 0.
  std::vector<std::int64_t> source_index;
  /// Donor colours warped into the target frame (zero outside `mask`).
  ColorImage warped;
};

/// Fits donor->target landmarks and resamples the donor region (nearest
/// neighbour) into the target region's hull.
AlignedRegion align_region(const ColorImage& donor_pixels,
                           std::span<const Point2> donor_landmarks,
                           std::span<const Point2> target_landmarks,
                           int target_height, int target_width);

struct Box {
  int u0 = 0;
  int v0 = 0;
  int width = 0;
  int height = 0;
  bool operator==(const Box&) const = default;
};

struct SchemeOutcome {
  Bitmap target_written;  // pixels rewritten in the target item
  Bitmap donor_written;   // only non-empty for clipping_exchange
  SimilarityTransform transform;
  Box target_box;
  Box donor_box;
};

/// Applies one exchange of `region_target` (in target) with `region_donor`
/// (in donor). Only clipping_exchange modifies the donor.
SchemeOutcome apply_scheme(BatchItem& target, BatchItem& donor,
                           const std::string& region_target,
                           const std::string& region_donor, Scheme scheme,
                           double overlay_alpha = 1.0);

/// Swaps two equally sized boxes between items, including label planes,
/// supports, and the named region's landmarks. Applying it twice restores
/// both items.
void clipping_exchange(BatchItem& a, BatchItem& b, const Box& box_a, const Box& box_b,
                       const std::string& region);

struct ExchangeStep {
  std::size_t target = 0;
  std::size_t donor = 0;
  std::string region_target;
  std::string region_donor;
  int retries = 0;
  bool skipped = false;
  std::size_t pixels_written = 0;
  SimilarityTransform transform;
};

struct AugmentLog {
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::overlay;
  std::vector<ExchangeStep> steps;
  std::string to_json() const;
};

/// Multi-channel region exchange over a batch. Items 0..floor(gamma*N)-1
/// each receive `rho` exchanges from randomly drawn donors; everything else
/// is returned untouched. Deterministic in (batch, cfg.seed).
Batch mcrea_augment(const Batch& batch, const AugmentConfig& cfg, AugmentLog* log = nullptr);

}  // namespace fas::mcrea

#endif  // FAS_MCREA_HPP_
