#include "fas/mcrea.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fas/error.hpp"
#include "json.hpp"

namespace fas::mcrea {

using nlohmann::json;

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::integrated_attack: return "integrated_attack";
    case Scheme::overlay: return "overlay";
    case Scheme::clipping_exchange: return "clipping_exchange";
  }
  return "overlay";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "integrated_attack") return Scheme::integrated_attack;
  if (s == "overlay") return Scheme::overlay;
  if (s == "clipping_exchange") return Scheme::clipping_exchange;
  throw ValidationError("unknown augmentation scheme '" + std::string(s) + "'");
}

void AugmentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (rho < 1) throw ValidationError("rho must be at least 1");
  if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0))
    throw ValidationError("overlay alpha must lie in [0, 1]");
}

BatchItem BatchItem::from_map(ColorImage image, ThreeChannelMap label, LandmarkSet landmarks) {
  BatchItem item;
  const int h = label.height(), w = label.width();
  item.attack_region = Bitmap(h, w);
  item.living_region = Bitmap(h, w);
  for (std::size_t i = 0; i < label.attack.size(); ++i) {
    if (label.background.data[i] >= 0.5f) continue;
    const bool attack = label.attack.data[i] > label.living.data[i];
    item.attack_region.data[i] = attack;
    item.living_region.data[i] = !attack;
  }
  item.image = std::move(image);
  item.label = std::move(label);
  item.landmarks = std::move(landmarks);
  return item;
}

BatchItem BatchItem::from_annotation(ColorImage image, ThreeChannelMap label,
                                     LandmarkSet landmarks, Bitmap attack, Bitmap living) {
  return BatchItem{std::move(image), std::move(label), std::move(landmarks),
                   std::move(attack), std::move(living)};
}

void BatchItem::rebuild_background() {
  for (std::size_t i = 0; i < label.background.size(); ++i)
    label.background.data[i] = (attack_region.data[i] || living_region.data[i]) ? 0.0f : 1.0f;
}

void Batch::validate() const {
  if (items.empty()) return;
  const int h = items.front().image.height, w = items.front().image.width;
  for (const auto& it : items) {
    if (it.image.height != h || it.image.width != w || it.label.height() != h ||
        it.label.width() != w || it.attack_region.height != h || it.living_region.height != h ||
        it.attack_region.width != w || it.living_region.width != w)
      throw ValidationError("batch items differ in dimensions");
  }
}

Point2 SimilarityTransform::apply(const Point2& p) const {
  const double c = std::cos(rotation), s = std::sin(rotation);
  return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

Point2 SimilarityTransform::apply_inverse(const Point2& p) const {
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double x = p.x - tx, y = p.y - ty;
  return {(c * x + s * y) / scale, (-s * x + c * y) / scale};
}

// Closed-form 2-D Procrustes with uniform scale, no reflection.
SimilarityTransform fit_similarity(std::span<const Point2> source,
                                   std::span<const Point2> target) {
  if (source.size() != target.size())
    throw SingularFitError("landmark correspondences differ in count");
  if (source.size() < 3) throw SingularFitError("similarity fit needs 3 correspondences");
  const double n = static_cast<double>(source.size());
  Point2 ms{}, mt{};
  for (std::size_t i = 0; i < source.size(); ++i) {
    ms.x += source[i].x / n;
    ms.y += source[i].y / n;
    mt.x += target[i].x / n;
    mt.y += target[i].y / n;
  }
  double sxx = 0, syy = 0, sxy = 0, dot = 0, crs = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double x = source[i].x - ms.x, y = source[i].y - ms.y;
    const double u = target[i].x - mt.x, v = target[i].y - mt.y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    dot += x * u + y * v;
    crs += x * v - y * u;
  }
  const double trace = sxx + syy;
  if (trace <= 1e-12 || (sxx * syy - sxy * sxy) <= 1e-9 * trace * trace)
    throw SingularFitError("source landmarks are collinear");
  const double a = dot / trace, b = crs / trace;
  SimilarityTransform t;
  t.scale = std::hypot(a, b);
  if (t.scale <= 1e-12) throw SingularFitError("target landmarks collapse to a point");
  t.rotation = std::atan2(b, a);
  t.tx = mt.x - (a * ms.x - b * ms.y);
  t.ty = mt.y - (b * ms.x + a * ms.y);
  return t;
}

AlignedRegion align_region(const ColorImage& donor_pixels,
                           std::span<const Point2> donor_landmarks,
                           std::span<const Point2> target_landmarks,
                           int target_height, int target_width) {
  AlignedRegion out;
  out.transform = fit_similarity(donor_landmarks, target_landmarks);
  Polygon target_hull, donor_hull;
  try {
    target_hull = convex_hull(target_landmarks);
    donor_hull = convex_hull(donor_landmarks);
  } catch (const ValidationError& e) {
    throw SingularFitError(e.what());
  }
  const Bitmap target_fill = fill_convex_polygon(target_hull, target_height, target_width);
  const Bitmap donor_fill =
      fill_convex_polygon(donor_hull, donor_pixels.height, donor_pixels.width);

  out.mask = Bitmap(target_height, target_width);
  out.source_index.assign(out.mask.size(), -1);
  out.warped = ColorImage(target_height, target_width);
  for (int v = 0; v < target_height; ++v)
    for (int u = 0; u < target_width; ++u) {
      if (!target_fill.at(u, v)) continue;
      const Point2 q =
          out.transform.apply_inverse({static_cast<double>(u), static_cast<double>(v)});
      const int du = static_cast<int>(std::lround(q.x));
      const int dv = static_cast<int>(std::lround(q.y));
      if (!donor_fill.contains(du, dv) || !donor_fill.at(du, dv)) continue;
      const std::size_t t = static_cast<std::size_t>(v) * target_width + u;
      out.mask.data[t] = 1;
      out.source_index[t] = static_cast<std::int64_t>(dv) * donor_pixels.width + du;
      std::copy_n(donor_pixels.px(du, dv), 3, out.warped.px(u, v));
    }
  return out;
}

namespace {

void copy_label_pixel(BatchItem& dst, std::size_t t, const BatchItem& src, std::size_t s) {
  dst.label.attack.data[t] = src.label.attack.data[s];
  dst.label.living.data[t] = src.label.living.data[s];
  dst.attack_region.data[t] = src.attack_region.data[s];
  dst.living_region.data[t] = src.living_region.data[s];
}

Box region_box(const BatchItem& item, const std::string& region) {
  Polygon hull;
  try {
    hull = landmark_region_polygon(item.landmarks, region);
  } catch (const ValidationError& e) {
    throw SingularFitError(e.what());
  }
  const Bitmap fill = fill_convex_polygon(hull, item.image.height, item.image.width);
  int u0 = fill.width, v0 = fill.height, u1 = -1, v1 = -1;
  for (int v = 0; v < fill.height; ++v)
    for (int u = 0; u < fill.width; ++u)
      if (fill.at(u, v)) {
        u0 = std::min(u0, u);
        v0 = std::min(v0, v);
        u1 = std::max(u1, u);
        v1 = std::max(v1, v);
      }
  if (u1 < 0) return {};
  return {u0, v0, u1 - u0 + 1, v1 - v0 + 1};
}

void update_landmarks(BatchItem& target, const std::string& region,
                      std::span<const Point2> donor_points, const SimilarityTransform& t) {
  const auto& idx = target.landmarks.region_index.at(region);
  const double max_x = std::nextafter(static_cast<double>(target.image.width), 0.0);
  const double max_y = std::nextafter(static_cast<double>(target.image.height), 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Point2 p = t.apply(donor_points[k]);
    target.landmarks.points[idx[k]] = {std::clamp(p.x, 0.0, max_x), std::clamp(p.y, 0.0, max_y)};
  }
}

}  // namespace

void clipping_exchange(BatchItem& a, BatchItem& b, const Box& box_a, const Box& box_b,
                       const std::string& region) {
  if (box_a.width != box_b.width || box_a.height != box_b.height)
    throw ValidationError("clipping boxes differ in size");
  auto inside = [](const BatchItem& it, const Box& bx) {
    return bx.u0 >= 0 && bx.v0 >= 0 && bx.u0 + bx.width <= it.image.width &&
           bx.v0 + bx.height <= it.image.height;
  };
  if (!inside(a, box_a) || !inside(b, box_b))
    throw ValidationError("clipping box exceeds the image");

  for (int dv = 0; dv < box_a.height; ++dv)
    for (int du = 0; du < box_a.width; ++du) {
      const int ua = box_a.u0 + du, va = box_a.v0 + dv;
      const int ub = box_b.u0 + du, vb = box_b.v0 + dv;
      std::swap_ranges(a.image.px(ua, va), a.image.px(ua, va) + 3, b.image.px(ub, vb));
      const std::size_t ta = static_cast<std::size_t>(va) * a.image.width + ua;
      const std::size_t tb = static_cast<std::size_t>(vb) * b.image.width + ub;
      std::swap(a.label.attack.data[ta], b.label.attack.data[tb]);
      std::swap(a.label.living.data[ta], b.label.living.data[tb]);
      std::swap(a.label.background.data[ta], b.label.background.data[tb]);
      std::swap(a.attack_region.data[ta], b.attack_region.data[tb]);
      std::swap(a.living_region.data[ta], b.living_region.data[tb]);
    }

  if (!a.landmarks.has_region(region) || !b.landmarks.has_region(region)) return;
  const auto& ia = a.landmarks.region_index.at(region);
  const auto& ib = b.landmarks.region_index.at(region);
  if (ia.size() != ib.size()) return;
  const double ox = box_a.u0 - box_b.u0, oy = box_a.v0 - box_b.v0;
  std::vector<Point2> to_a, to_b;
  for (std::size_t k = 0; k < ia.size(); ++k) {
    const auto& pa = a.landmarks.points[ia[k]];
    const auto& pb = b.landmarks.points[ib[k]];
    to_a.push_back({pb.x + ox, pb.y + oy});
    to_b.push_back({pa.x - ox, pa.y - oy});
  }
  auto in_frame = [](const std::vector<Point2>& pts, const BatchItem& it) {
    return std::all_of(pts.begin(), pts.end(), [&](const Point2& p) {
      return p.x >= 0 && p.y >= 0 && p.x < it.image.width && p.y < it.image.height;
    });
  };
  // Landmarks move only when both translated sets stay in frame, so a second
  // swap of the same boxes takes the same branch.
  if (!in_frame(to_a, a) || !in_frame(to_b, b)) return;
  for (std::size_t k = 0; k < ia.size(); ++k) {
    a.landmarks.points[ia[k]] = to_a[k];
    b.landmarks.points[ib[k]] = to_b[k];
  }
}

SchemeOutcome apply_scheme(BatchItem& target, BatchItem& donor,
                           const std::string& region_target,
                           const std::string& region_donor, Scheme scheme,
                           double overlay_alpha) {
  SchemeOutcome out;
  const int h = target.image.height, w = target.image.width;
  out.target_written = Bitmap(h, w);
  out.donor_written = Bitmap(donor.image.height, donor.image.width);

  if (scheme == Scheme::clipping_exchange) {
    const Box bt = region_box(target, region_target);
    const Box bd_anchor = region_box(donor, region_donor);
    if (bt.width == 0 || bd_anchor.width == 0) return out;
    Box bd{bd_anchor.u0, bd_anchor.v0, bt.width, bt.height};
    bd.u0 = std::clamp(bd.u0, 0, donor.image.width - bd.width);
    bd.v0 = std::clamp(bd.v0, 0, donor.image.height - bd.height);
    clipping_exchange(target, donor, bt, bd, region_target == region_donor ? region_target : "");
    target.rebuild_background();
    donor.rebuild_background();
    for (int dv = 0; dv < bt.height; ++dv)
      for (int du = 0; du < bt.width; ++du) {
        out.target_written.at(bt.u0 + du, bt.v0 + dv) = 1;
        out.donor_written.at(bd.u0 + du, bd.v0 + dv) = 1;
      }
    out.target_box = bt;
    out.donor_box = bd;
    return out;
  }

  const auto donor_points = donor.landmarks.region_points(region_donor);
  const auto target_points = target.landmarks.region_points(region_target);
  const AlignedRegion aligned = align_region(donor.image, donor_points, target_points, h, w);
  out.transform = aligned.transform;

  const bool labels = scheme == Scheme::integrated_attack || overlay_alpha >= 0.5;
  for (std::size_t t = 0; t < aligned.mask.size(); ++t) {
    if (!aligned.mask.data[t]) continue;
    const auto s = static_cast<std::size_t>(aligned.source_index[t]);
    if (scheme == Scheme::integrated_attack && !donor.attack_region.data[s]) continue;
    const std::uint8_t* src = donor.image.data.data() + 3 * s;
    std::uint8_t* dst = target.image.data.data() + 3 * t;
    if (scheme == Scheme::overlay && overlay_alpha < 1.0) {
      for (int c = 0; c < 3; ++c)
        dst[c] = static_cast<std::uint8_t>(
            std::lround(overlay_alpha * src[c] + (1.0 - overlay_alpha) * dst[c]));
    } else {
      std::copy_n(src, 3, dst);
    }
    if (labels) copy_label_pixel(target, t, donor, s);
    out.target_written.data[t] = 1;
  }
  if (scheme == Scheme::overlay && labels)
    update_landmarks(target, region_target, donor_points, aligned.transform);
  target.rebuild_background();
  return out;
}

std::string AugmentLog::to_json() const {
  json j;
  j["seed"] = seed;
  j["scheme"] = std::string(mcrea::to_string(scheme));
  j["steps"] = json::array();
  for (const auto& s : steps)
    j["steps"].push_back({{"i", s.target},
                          {"j", s.donor},
                          {"region_i", s.region_target},
                          {"region_j", s.region_donor},
                          {"retries", s.retries},
                          {"skipped", s.skipped},
                          {"pixels_written", s.pixels_written},
                          {"transform",
                           {{"scale", s.transform.scale},
                            {"rotation", s.transform.rotation},
                            {"tx", s.transform.tx},
                            {"ty", s.transform.ty}}}});
  return j.dump(2);
}

namespace {

std::vector<std::string> usable_regions(const LandmarkSet& lm) {
  std::vector<std::string> out;
  for (const auto& [name, idx] : lm.region_index)
    if (idx.size() >= 3) out.push_back(name);
  return out;
}

constexpr int kMaxDonorRetries = 8;

}  // namespace

Batch mcrea_augment(const Batch& batch, const AugmentConfig& cfg, AugmentLog* log) {
  cfg.validate();
  batch.validate();
  const std::size_t n = batch.items.size();
  const auto augmented = static_cast<std::size_t>(std::floor(cfg.gamma * static_cast<double>(n)));
  if (augmented >= 1 && n < 2)
    throw ValidationError("region exchange needs a batch of at least 2 samples");

  Batch out = batch;
  std::mt19937_64 rng(cfg.seed);
  if (log) {
    log->seed = cfg.seed;
    log->scheme = cfg.scheme;
    log->steps.clear();
  }

  for (std::size_t i = 0; i < augmented; ++i) {
    for (int step = 0; step < cfg.rho; ++step) {
      ExchangeStep rec;
      rec.target = i;
      const auto regions = usable_regions(out.items[i].landmarks);
      if (regions.empty()) {
        spdlog::warn("mcrea: sample {} has no region with 3 landmarks; step skipped", i);
        rec.skipped = true;
        if (log) log->steps.push_back(rec);
        continue;
      }
      rec.region_target =
          regions[std::uniform_int_distribution<std::size_t>(0, regions.size() - 1)(rng)];
      const std::size_t want = out.items[i].landmarks.region_index.at(rec.region_target).size();

      bool done = false;
      for (int attempt = 0; attempt <= kMaxDonorRetries && !done; ++attempt) {
        rec.retries = attempt;
        std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
        if (j >= i) ++j;
        rec.donor = j;
        // Donor regions must carry the same semantics and point count so the
        // landmarks pair up for alignment.
        std::vector<std::string> candidates;
        for (const auto& r : usable_regions(out.items[j].landmarks))
          if (r == rec.region_target &&
              out.items[j].landmarks.region_index.at(r).size() == want)
            candidates.push_back(r);
        if (candidates.empty()) continue;
        rec.region_donor = candidates[std::uniform_int_distribution<std::size_t>(
            0, candidates.size() - 1)(rng)];
        try {
          const auto res = apply_scheme(out.items[i], out.items[j], rec.region_target,
                                        rec.region_donor, cfg.scheme, cfg.overlay_alpha);
          rec.transform = res.transform;
          rec.pixels_written = count_set(res.target_written);
          done = true;
        } catch (const SingularFitError&) {
        }
      }
      if (!done) {
        spdlog::warn("mcrea: no alignable donor for sample {} region '{}'; step skipped", i,
                     rec.region_target);
        rec.skipped = true;
      }
      if (log) log->steps.push_back(rec);
    }
  }
  return out;
}

}  // namespace fas::mcrea
