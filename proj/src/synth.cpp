#include <cmath>
#include <numbers>
#include <random>

#include "fas/error.hpp"
#include "fas/pipeline.hpp"

namespace fas::pipeline {

// Pseudo-depth ---------------------------------------------------------------

namespace {

// Distance factor s > 0 such that c + s * d hits the polygon boundary.
double exit_factor(const Polygon& hull, const Point2& c, const Point2& d) {
  double best = INFINITY;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double den = d.x * ey - d.y * ex;
    if (std::abs(den) < 1e-15) continue;
    const double wx = a.x - c.x, wy = a.y - c.y;
    const double s = (wx * ey - wy * ex) / den;
    const double u = (wx * d.y - wy * d.x) / den;
    if (s > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) best = std::min(best, s);
  }
  return best;
}

}  // namespace

DepthMap pseudo_depth(const LandmarkSet& landmarks, int height, int width) {
  if (!landmarks.has_region("face_skin"))
    throw ValidationError("pseudo-depth needs the face_skin region");
  const Polygon hull = landmark_region_polygon(landmarks, "face_skin");
  const Bitmap support = fill_convex_polygon(hull, height, width);
  if (count_set(support) == 0) throw ValidationError("face hull covers no pixel");

  Point2 peak{0.0, 0.0};
  if (landmarks.has_region("nose")) {
    const auto pts = landmarks.region_points("nose");
    for (const auto& p : pts) {
      peak.x += p.x;
      peak.y += p.y;
    }
    peak.x /= static_cast<double>(pts.size());
    peak.y /= static_cast<double>(pts.size());
  } else {
    for (const auto& p : hull) {
      peak.x += p.x;
      peak.y += p.y;
    }
    peak.x /= static_cast<double>(hull.size());
    peak.y /= static_cast<double>(hull.size());
  }
  peak = {std::round(peak.x), std::round(peak.y)};

  FloatPlane raw(height, width);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      if (!support.at(u, v)) continue;
      const Point2 d{u - peak.x, v - peak.y};
      double t = 0.0;
      if (d.x != 0.0 || d.y != 0.0) {
        const double s = exit_factor(hull, peak, d);
        t = std::isfinite(s) ? std::min(1.0, 1.0 / s) : 1.0;
      }
      raw.at(u, v) = static_cast<float>(std::sqrt(1.0 - t * t));
    }
  DepthMap depth = normalize_depth(raw, support);
  for (auto& x : depth.values.data) x = static_cast<float>(std::lround(x * 65535.0)) / 65535.0f;
  return depth;
}

void attach_pseudo_depth(Sample& sample) {
  if (sample.depth) throw ValidationError("sample '" + sample.id + "' already has depth");
  sample.depth = pseudo_depth(sample.landmarks, sample.image.height, sample.image.width);
}

// Synthetic corpus ------------------------------------------------------------

void SynthConfig::validate() const {
  if (count < 1) throw ValidationError("count must be at least 1");
  if (size < 32 || size % 8) throw ValidationError("size must be a multiple of 8, at least 32");
  if (!(bona_fide_share >= 0.0 && bona_fide_share <= 1.0))
    throw ValidationError("bona_fide_share must lie in [0, 1]");
  if (bona_fide_share < 1.0 && attack_types.empty())
    throw ValidationError("attack share without attack types");
  for (const auto& t : attack_types)
    if (!is_synthetic_attack(t)) throw ValidationError("unknown synthetic attack '" + t + "'");
  if (!(train_share >= 0.0 && dev_share >= 0.0 && train_share + dev_share <= 1.0))
    throw ValidationError("split shares must be non-negative and sum to at most 1");
}

bool is_synthetic_attack(std::string_view type) {
  return type == "print" || type == "replay" || type == "glasses" || type == "rigidmask";
}

namespace {

struct Plan {
  std::string type;  // empty for bona fide
  std::string split;
};

std::vector<Plan> make_plan(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.count;
  const int bona = static_cast<int>(std::lround(cfg.bona_fide_share * n));
  std::vector<Plan> plan(n);
  for (int i = bona; i < n; ++i)
    plan[i].type = cfg.attack_types[(i - bona) % cfg.attack_types.size()];
  std::shuffle(plan.begin(), plan.end(), rng);
  // Stratified split per type keeps every class present in each split.
  std::map<std::string, std::vector<int>> by_type;
  for (int i = 0; i < n; ++i) by_type[plan[i].type].push_back(i);
  for (auto& [type, idx] : by_type) {
    const auto m = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::lround(cfg.train_share * m));
    const auto n_dev = static_cast<std::size_t>(std::lround(cfg.dev_share * m));
    for (std::size_t k = 0; k < idx.size(); ++k)
      plan[idx[k]].split = k < n_train ? "train" : k < n_train + n_dev ? "dev" : "test";
  }
  return plan;
}

using Rgb = std::array<double, 3>;

struct Canvas {
  int size;
  std::vector<Rgb> px;
  explicit Canvas(int s) : size(s), px(static_cast<std::size_t>(s) * s) {}
  Rgb& at(int u, int v) { return px[static_cast<std::size_t>(v) * size + u]; }
  void fill(const Bitmap& mask, const Rgb& c) {
    for (int v = 0; v < size; ++v)
      for (int u = 0; u < size; ++u)
        if (mask.at(u, v)) at(u, v) = c;
  }
  ColorImage to_image() const {
    ColorImage img(size, size);
    for (std::size_t i = 0; i < px.size(); ++i)
      for (int ch = 0; ch < 3; ++ch)
        img.data[i * 3 + ch] =
            static_cast<std::uint8_t>(std::clamp(std::lround(px[i][ch]), 0L, 255L));
    return img;
  }
};

Polygon ellipse_points(double cx, double cy, double rx, double ry, int n, double a0 = 0.0,
                       double a1 = 2.0 * std::numbers::pi, bool closed = true) {
  Polygon out;
  const int steps = closed ? n : n - 1;
  for (int k = 0; k < n; ++k) {
    const double a = a0 + (a1 - a0) * k / steps;
    out.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return out;
}

// Coordinates on a 1/256 pixel grid stay exact under integer translation.
Point2 snap(const Point2& p) {
  return {std::round(p.x * 256.0) / 256.0, std::round(p.y * 256.0) / 256.0};
}

Polygon snapped(Polygon poly) {
  for (auto& p : poly) p = snap(p);
  return poly;
}

void add_region(LandmarkSet& lm, const std::string& name, const Polygon& pts) {
  auto& idx = lm.region_index[name];
  for (const auto& p : pts) {
    idx.push_back(lm.points.size());
    lm.points.push_back(snap(p));
  }
}

Bitmap hull_mask(const Polygon& pts, int size) {
  return fill_convex_polygon(convex_hull(pts), size, size);
}

}  // namespace

Sample render_synthetic(const SynthConfig& cfg, int index) {
  cfg.validate();
  if (index < 0 || index >= cfg.count) throw ValidationError("sample index out of range");
  const Plan plan = make_plan(cfg)[index];

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(index),
                    0x5eedu};
  std::mt19937_64 rng(seq);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  std::normal_distribution<double> noise(0.0, 1.0);

  const int S = cfg.size;
  const double f = S / 64.0;
  const double cx = S / 2.0 + uni(-3, 3) * f, cy = S / 2.0 + (2 + uni(-2, 2)) * f;
  const double rx = uni(17, 20) * f, ry = uni(21, 24) * f;

  // Landmarks.
  LandmarkSet lm;
  const Polygon face = snapped(ellipse_points(cx, cy, rx, ry, 16));
  add_region(lm, "face_skin", face);
  const double ey = cy - 0.22 * ry, ex = 0.38 * rx, ew = 0.16 * rx, eh = 0.07 * ry;
  Polygon eye_l =
      snapped({{cx - ex - ew, ey}, {cx - ex, ey - eh}, {cx - ex + ew, ey}, {cx - ex, ey + eh}});
  Polygon eye_r =
      snapped({{cx + ex - ew, ey}, {cx + ex, ey - eh}, {cx + ex + ew, ey}, {cx + ex, ey + eh}});
  Polygon eyes = eye_l;
  eyes.insert(eyes.end(), eye_r.begin(), eye_r.end());
  add_region(lm, "eyes", eyes);
  const double by = ey - 0.17 * ry;
  Polygon brows = snapped({{cx - ex - ew, by + 0.02 * ry},
                           {cx - ex, by - 0.03 * ry},
                           {cx - ex + ew, by + 0.02 * ry},
                           {cx + ex - ew, by + 0.02 * ry},
                           {cx + ex, by - 0.03 * ry},
                           {cx + ex + ew, by + 0.02 * ry}});
  add_region(lm, "eyebrows", brows);
  Polygon nose = snapped({{cx, ey + 0.06 * ry}, {cx - 0.12 * rx, cy + 0.16 * ry},
                  {cx, cy + 0.22 * ry}, {cx + 0.12 * rx, cy + 0.16 * ry}});
  add_region(lm, "nose", nose);
  const double my = cy + 0.46 * ry, mw = 0.30 * rx, mh = 0.08 * ry;
  Polygon mouth = snapped({{cx - mw, my}, {cx - 0.5 * mw, my - mh}, {cx + 0.5 * mw, my - mh},
                   {cx + mw, my}, {cx + 0.5 * mw, my + mh}, {cx - 0.5 * mw, my + mh}});
  add_region(lm, "mouth", mouth);
  Polygon forehead = {{cx - 0.4 * rx, cy - 0.52 * ry}, {cx + 0.4 * rx, cy - 0.52 * ry},
                      {cx + 0.3 * rx, cy - 0.78 * ry}, {cx - 0.3 * rx, cy - 0.78 * ry}};
  add_region(lm, "forehead", forehead);
  const double pi = std::numbers::pi;
  Polygon hair = snapped(
      ellipse_points(cx, cy, 1.12 * rx, 1.12 * ry, 7, pi * 215 / 180, pi * 325 / 180, false));
  for (auto& p : hair) p.y = std::max(p.y, 0.5);
  add_region(lm, "hair", hair);

  Sample s;
  char id[32];
  std::snprintf(id, sizeof id, "s%05d", index);
  s.id = id;
  s.split = plan.split;
  s.landmarks = lm;
  s.depth = pseudo_depth(lm, S, S);
  const auto& depth = s.depth->values;

  // Rendering.
  Canvas cv(S);
  const Rgb bg0{uni(30, 220), uni(30, 220), uni(30, 220)};
  const Rgb bg1{uni(30, 220), uni(30, 220), uni(30, 220)};
  for (int v = 0; v < S; ++v)
    for (int u = 0; u < S; ++u) {
      const double t = static_cast<double>(u + v) / (2.0 * S);
      for (int ch = 0; ch < 3; ++ch) cv.at(u, v)[ch] = bg0[ch] * (1 - t) + bg1[ch] * t;
    }
  const Rgb skin{uni(150, 230), uni(100, 175), uni(80, 145)};
  const Bitmap face_mask = hull_mask(face, S);
  for (int v = 0; v < S; ++v)
    for (int u = 0; u < S; ++u)
      if (face_mask.at(u, v)) {
        const double shade = 0.72 + 0.28 * depth.at(u, v);
        for (int ch = 0; ch < 3; ++ch) cv.at(u, v)[ch] = skin[ch] * shade;
      }
  const Rgb hair_c{uni(10, 70), uni(5, 50), uni(0, 40)};
  cv.fill(hull_mask(hair, S), hair_c);
  cv.fill(hull_mask(eye_l, S), {235, 235, 235});
  cv.fill(hull_mask(eye_r, S), {235, 235, 235});
  for (double px : {cx - ex, cx + ex}) {
    const Bitmap pupil = hull_mask(ellipse_points(px, ey, 0.06 * rx + 0.6, 0.06 * rx + 0.6, 8), S);
    cv.fill(pupil, {40, 30, 25});
  }
  const Rgb brow_c{hair_c[0] + 20, hair_c[1] + 15, hair_c[2] + 10};
  cv.fill(hull_mask({brows.begin(), brows.begin() + 3}, S), brow_c);
  cv.fill(hull_mask({brows.begin() + 3, brows.end()}, S), brow_c);
  cv.fill(hull_mask(nose, S), {skin[0] * 0.85, skin[1] * 0.8, skin[2] * 0.8});
  cv.fill(hull_mask(mouth, S), {uni(150, 200), uni(40, 80), uni(50, 80)});

  double sigma = 4.0;
  if (!plan.type.empty()) {
    s.truth_label = TruthLabel::attack;
    s.attack_type = plan.type;
    if (plan.type == "print") {
      const Rgb cast{uni(5, 20), uni(5, 20), uni(-15, 0)};
      for (int v = 0; v < S; ++v)
        for (int u = 0; u < S; ++u) {
          auto& p = cv.at(u, v);
          const double grey = (p[0] + p[1] + p[2]) / 3.0;
          const double dot = ((u / 2 + v / 2) % 2 == 0) ? 14.0 : -14.0;
          for (int ch = 0; ch < 3; ++ch) p[ch] = 0.55 * p[ch] + 0.45 * grey + cast[ch] + dot;
        }
      sigma = 2.0;
    } else if (plan.type == "replay") {
      const double phase = uni(0, 2 * pi);
      for (int v = 0; v < S; ++v)
        for (int u = 0; u < S; ++u) {
          auto& p = cv.at(u, v);
          const double scan = (v % 2 == 0) ? -22.0 : 6.0;
          const double moire = 12.0 * std::sin(0.9 * u + 0.35 * v + phase);
          p[0] += scan + moire - 10.0;
          p[1] += scan + moire;
          p[2] += scan + moire + 28.0;
        }
      sigma = 2.0;
    } else if (plan.type == "glasses") {
      const double pad = 2.5 * f;
      const Polygon poly = snapped({{cx - ex - ew - pad, ey - eh - pad},
                                    {cx + ex + ew + pad, ey - eh - pad},
                                    {cx + ex + ew + pad, ey + eh + pad},
                                    {cx - ex - ew - pad, ey + eh + pad}});
      const Bitmap m = fill_convex_polygon(poly, S, S);
      const Rgb tint{uni(10, 50), uni(10, 50), uni(20, 70)};
      for (int v = 0; v < S; ++v)
        for (int u = 0; u < S; ++u)
          if (m.at(u, v)) {
            const double glint = ((u + 2 * v) % 7 == 0) ? 60.0 : 0.0;
            for (int ch = 0; ch < 3; ++ch) cv.at(u, v)[ch] = tint[ch] + glint;
          }
      s.pai_regions.push_back({"glasses", poly});
    } else {  // rigidmask
      const Polygon poly = snapped({{cx - 0.45 * rx, ey + 0.12 * ry},
                                    {cx + 0.45 * rx, ey + 0.12 * ry},
                                    {cx + 0.5 * rx, my + 0.04 * ry},
                                    {cx + 0.3 * rx, my + 0.2 * ry},
                                    {cx - 0.3 * rx, my + 0.2 * ry},
                                    {cx - 0.5 * rx, my + 0.04 * ry}});
      const Bitmap m = fill_convex_polygon(poly, S, S);
      const double base = uni(200, 245);
      for (int v = 0; v < S; ++v)
        for (int u = 0; u < S; ++u)
          if (m.at(u, v)) {
            const double g = base - 0.8 * (v - ey) / f;
            cv.at(u, v) = {g, g * 0.97, g * 0.93};
          }
      s.pai_regions.push_back({"rigidmask", poly});
    }
  }
  for (auto& p : cv.px)
    for (auto& ch : p) ch += sigma * noise(rng);
  s.image = cv.to_image();
  s.validate();
  return s;
}

fs::path generate_synthetic(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::vector<Sample> samples;
  samples.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) samples.push_back(render_synthetic(cfg, i));
  const fs::path manifest = out_dir / "manifest.jsonl";
  export_samples(samples, manifest);
  return manifest;
}

}  // namespace fas::pipeline
