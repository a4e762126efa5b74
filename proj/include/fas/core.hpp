#ifndef FAS_CORE_HPP_
#define FAS_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fas {

// Rasters are row-major; (u, v) = (column, row) with the origin top-left.

template <typename T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return data.size(); }
  bool same_shape(const Plane& o) const {
    return height == o.height && width == o.width;
  }
  T& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const {
    return data[static_cast<std::size_t>(v) * width + u];
  }
  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height;
  }
  bool operator==(const Plane&) const = default;
};

using Bitmap = Plane<std::uint8_t>;
using FloatPlane = Plane<float>;

std::size_t count_set(const Bitmap& b);

/// 8-bit RGB raster, interleaved HWC.
struct ColorImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  ColorImage() = default;
  ColorImage(int h, int w)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t* px(int u, int v) {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * 3;
  }
  const std::uint8_t* px(int u, int v) const {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * 3;
  }
  bool operator==(const ColorImage&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Polygon = std::vector<Point2>;

enum class RegionLabel { attack, living, background };

std::string_view to_string(RegionLabel l);

/// Face-region vocabulary shared by landmark files, prompts and policies.
inline constexpr std::string_view kFaceRegions[] = {
    "eyes", "mouth", "eyebrows", "forehead", "nose", "ears", "hair", "face_skin"};

bool is_face_region(std::string_view name);

struct LandmarkSet {
  std::vector<Point2> points;
  std::map<std::string, std::vector<std::size_t>> region_index;

  bool has_region(const std::string& name) const;
  /// Points of a region in index order. Throws ValidationError if unknown.
  std::vector<Point2> region_points(const std::string& name) const;
  /// Checks bounds, non-empty regions and index validity. `extra_names`
  /// lists PAI region names accepted on top of the face vocabulary.
  void validate(int height, int width,
                std::span<const std::string> extra_names = {}) const;
  bool operator==(const LandmarkSet&) const = default;
};

struct RegionMask {
  Bitmap bitmap;
  RegionLabel label = RegionLabel::background;
  std::string source_region;
};

struct DepthMap {
  FloatPlane values;
  bool operator==(const DepthMap&) const = default;
};

struct ThreeChannelMap {
  FloatPlane attack;
  FloatPlane living;
  FloatPlane background;

  ThreeChannelMap() = default;
  ThreeChannelMap(int h, int w)
      : attack(h, w), living(h, w), background(h, w) {}

  int height() const { return attack.height; }
  int width() const { return attack.width; }
  bool operator==(const ThreeChannelMap&) const = default;
};

enum class TruthLabel { bona_fide, attack };

std::string_view to_string(TruthLabel t);
TruthLabel parse_truth_label(std::string_view s);

/// A presentation-attack-instrument region: a named landmark region, or an
/// explicit polygon when `polygon` is set.
struct PaiRegion {
  std::string name;
  std::optional<Polygon> polygon;
  bool operator==(const PaiRegion&) const = default;
};

struct Sample {
  std::string id;
  ColorImage image;
  LandmarkSet landmarks;
  std::optional<DepthMap> depth;
  TruthLabel truth_label = TruthLabel::bona_fide;
  std::optional<std::string> attack_type;
  std::vector<PaiRegion> pai_regions;
  std::string split = "train";

  /// Enforces the attack-type and shared-frame invariants.
  void validate() const;
  bool operator==(const Sample&) const = default;
};

// Mask algebra -------------------------------------------------------------

/// Per-pixel OR. An empty list yields an all-zero mask of `height`x`width`.
RegionMask mask_union(std::span<const RegionMask> masks, int height, int width);
RegionMask mask_union(const RegionMask& a, const RegionMask& b);
RegionMask mask_intersect(const RegionMask& a, const RegionMask& b);
/// a AND NOT b
RegionMask mask_subtract(const RegionMask& a, const RegionMask& b);
RegionMask mask_invert(const RegionMask& mask);

/// Affine rescale of `raw` to [0, 1] inside `face_support`, exact zero outside.
/// A flat face (max == min) maps to 1.0 on the support.
DepthMap normalize_depth(const FloatPlane& raw, const Bitmap& face_support);

// Polygons -----------------------------------------------------------------

/// Convex hull, counter-clockwise in the (x, y) frame (positive signed area),
/// without collinear vertices. Throws ValidationError for fewer than 3 non-collinear
/// points.
Polygon convex_hull(std::span<const Point2> points);

Polygon landmark_region_polygon(const LandmarkSet& landmarks,
                                const std::string& region);

/// Pixels whose integer centre lies inside or on the convex polygon.
Bitmap fill_convex_polygon(const Polygon& poly, int height, int width);

/// Bitmap of pixels within Euclidean `radius` of a set pixel.
Bitmap dilate(const Bitmap& mask, int radius);

}  // namespace fas

#endif  // FAS_CORE_HPP_
