#include "fas/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fas/error.hpp"

namespace fas {

std::size_t count_set(const Bitmap& b) {
  return static_cast<std::size_t>(
      std::count_if(b.data.begin(), b.data.end(), [](auto x) { return x != 0; }));
}

std::string_view to_string(RegionLabel l) {
  switch (l) {
    case RegionLabel::attack: return "attack";
    case RegionLabel::living: return "living";
    case RegionLabel::background: return "background";
  }
  return "background";
}

std::string_view to_string(TruthLabel t) {
  return t == TruthLabel::attack ? "attack" : "bona_fide";
}

TruthLabel parse_truth_label(std::string_view s) {
  if (s == "attack") return TruthLabel::attack;
  if (s == "bona_fide") return TruthLabel::bona_fide;
  throw ValidationError("unknown truth label '" + std::string(s) + "'");
}

bool is_face_region(std::string_view name) {
  return std::find(std::begin(kFaceRegions), std::end(kFaceRegions), name) !=
         std::end(kFaceRegions);
}

bool LandmarkSet::has_region(const std::string& name) const {
  return region_index.contains(name);
}

std::vector<Point2> LandmarkSet::region_points(const std::string& name) const {
  auto it = region_index.find(name);
  if (it == region_index.end())
    throw ValidationError("unknown landmark region '" + name + "'");
  std::vector<Point2> out;
  out.reserve(it->second.size());
  for (auto idx : it->second) {
    if (idx >= points.size())
      throw ValidationError("region '" + name + "' references point " +
                            std::to_string(idx) + " out of range");
    out.push_back(points[idx]);
  }
  return out;
}

void LandmarkSet::validate(int height, int width,
                           std::span<const std::string> extra_names) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < width && p.y < height))
      throw ValidationError("landmark " + std::to_string(i) +
                            " lies outside the image frame");
  }
  for (const auto& [name, idx] : region_index) {
    bool known = is_face_region(name) ||
                 std::find(extra_names.begin(), extra_names.end(), name) !=
                     extra_names.end();
    if (!known) throw ValidationError("undeclared region name '" + name + "'");
    if (idx.empty()) throw ValidationError("region '" + name + "' has no points");
    for (auto i : idx)
      if (i >= points.size())
        throw ValidationError("region '" + name + "' index out of range");
  }
}

void Sample::validate() const {
  if (truth_label == TruthLabel::attack && !attack_type)
    throw ValidationError("attack sample '" + id + "' has no attack_type");
  if (image.height <= 0 || image.width <= 0)
    throw ValidationError("sample '" + id + "' has an empty image");
  if (depth && (depth->values.height != image.height ||
                depth->values.width != image.width))
    throw ValidationError("sample '" + id + "' depth frame differs from image");
  std::vector<std::string> pai_names;
  for (const auto& r : pai_regions) pai_names.push_back(r.name);
  landmarks.validate(image.height, image.width, pai_names);
}

namespace {

void require_same_shape(const Bitmap& a, const Bitmap& b) {
  if (!a.same_shape(b))
    throw ValidationError("mask dimension mismatch: " + std::to_string(a.height) +
                          "x" + std::to_string(a.width) + " vs " +
                          std::to_string(b.height) + "x" +
                          std::to_string(b.width));
}

template <typename Op>
RegionMask combine(const RegionMask& a, const RegionMask& b, Op op) {
  require_same_shape(a.bitmap, b.bitmap);
  RegionMask out;
  out.bitmap = Bitmap(a.bitmap.height, a.bitmap.width);
  for (std::size_t i = 0; i < out.bitmap.size(); ++i)
    out.bitmap.data[i] = op(a.bitmap.data[i] != 0, b.bitmap.data[i] != 0) ? 1 : 0;
  return out;
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

RegionMask mask_union(std::span<const RegionMask> masks, int height, int width) {
  RegionMask out;
  out.bitmap = Bitmap(height, width);
  for (const auto& m : masks) {
    require_same_shape(out.bitmap, m.bitmap);
    for (std::size_t i = 0; i < out.bitmap.size(); ++i)
      out.bitmap.data[i] |= (m.bitmap.data[i] != 0);
  }
  return out;
}

RegionMask mask_union(const RegionMask& a, const RegionMask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}

RegionMask mask_intersect(const RegionMask& a, const RegionMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}

RegionMask mask_subtract(const RegionMask& a, const RegionMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && !y; });
}

RegionMask mask_invert(const RegionMask& mask) {
  RegionMask out = mask;
  for (auto& px : out.bitmap.data) px = px ? 0 : 1;
  return out;
}

DepthMap normalize_depth(const FloatPlane& raw, const Bitmap& face_support) {
  if (raw.height != face_support.height || raw.width != face_support.width)
    throw ValidationError("depth and face support differ in size");
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!face_support.data[i]) continue;
    if (!std::isfinite(raw.data[i]))
      throw ValidationError("non-finite depth inside the face support");
    lo = std::min(lo, raw.data[i]);
    hi = std::max(hi, raw.data[i]);
  }
  if (lo > hi) throw ValidationError("face support is empty");

  DepthMap out{FloatPlane(raw.height, raw.width, 0.0f)};
  const float range = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!face_support.data[i]) continue;
    out.values.data[i] = range > 0.0f
                             ? std::clamp((raw.data[i] - lo) / range, 0.0f, 1.0f)
                             : 1.0f;
  }
  return out;
}

// Andrew's monotone chain. Positive signed area in the (x, y) frame.
Polygon convex_hull(std::span<const Point2> points) {
  std::vector<Point2> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) throw ValidationError("convex hull needs 3 distinct points");

  Polygon hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw ValidationError("points are collinear");
  return hull;
}

Polygon landmark_region_polygon(const LandmarkSet& landmarks,
                                const std::string& region) {
  auto pts = landmarks.region_points(region);
  if (pts.size() < 3)
    throw ValidationError("region '" + region + "' has fewer than 3 points");
  return convex_hull(pts);
}

Bitmap fill_convex_polygon(const Polygon& poly, int height, int width) {
  Bitmap out(height, width);
  if (poly.size() < 3) return out;
  double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
  for (const auto& p : poly) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  // Accept either winding.
  double area2 = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    area2 += a.x * b.y - b.x * a.y;
  }
  const double sign = area2 >= 0.0 ? 1.0 : -1.0;
  constexpr double kEps = 1e-9;

  const int u0 = std::max(0, static_cast<int>(std::ceil(min_x)));
  const int u1 = std::min(width - 1, static_cast<int>(std::floor(max_x)));
  const int v0 = std::max(0, static_cast<int>(std::ceil(min_y)));
  const int v1 = std::min(height - 1, static_cast<int>(std::floor(max_y)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Point2 q{static_cast<double>(u), static_cast<double>(v)};
      bool inside = true;
      for (std::size_t i = 0; i < poly.size() && inside; ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        inside = sign * cross(a, b, q) >= -kEps;
      }
      if (inside) out.at(u, v) = 1;
    }
  }
  return out;
}

Bitmap dilate(const Bitmap& mask, int radius) {
  if (radius <= 0) return mask;
  Bitmap out(mask.height, mask.width);
  const int r2 = radius * radius;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du)
          if (du * du + dv * dv <= r2 && out.contains(u + du, v + dv))
            out.at(u + du, v + dv) = 1;
    }
  return out;
}

}  // namespace fas
