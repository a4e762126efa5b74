#include "fas/decision.hpp"

#include <algorithm>
#include <cmath>

#include "fas/error.hpp"

namespace fas::decision {

void DecisionConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ValidationError("epsilon must be a finite non-negative number");
  if (key_regions.empty()) throw ValidationError("key_regions must not be empty");
}

FaceAreas compute_areas(const LandmarkSet& landmarks, int height, int width,
                        const DecisionConfig& cfg) {
  cfg.validate();
  if (!landmarks.has_region("face_skin"))
    throw ValidationError("landmarks lack the face_skin region");
  FaceAreas areas;
  areas.face_area.bitmap =
      fill_convex_polygon(landmark_region_polygon(landmarks, "face_skin"), height, width);
  areas.face_area.source_region = "face_skin";
  areas.key_area.bitmap = Bitmap(height, width);
  for (const auto& name : cfg.key_regions) {
    if (!landmarks.has_region(name))
      throw ValidationError("landmarks lack key region '" + name + "'");
    RegionMask hull{fill_convex_polygon(landmark_region_polygon(landmarks, name), height, width),
                    RegionLabel::living, name};
    areas.key_area = mask_union(areas.key_area, hull);
  }
  areas.key_area = mask_intersect(areas.key_area, areas.face_area);
  areas.key_area.source_region = "key";
  return areas;
}

namespace {

double masked_mean(const FloatPlane& plane, const Bitmap& mask, const char* what) {
  if (plane.height != mask.height || plane.width != mask.width)
    throw ValidationError("prediction and area sizes differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) {
      sum += plane.data[i];
      ++n;
    }
  if (n == 0) throw ValidationError(std::string(what) + " is empty");
  return sum / static_cast<double>(n);
}

}  // namespace

double attack_intensity(const ThreeChannelMap& pred, const FaceAreas& areas) {
  return masked_mean(pred.attack, areas.face_area.bitmap, "face area");
}

double living_intensity(const ThreeChannelMap& pred, const FaceAreas& areas) {
  return masked_mean(pred.living, areas.key_area.bitmap, "key area");
}

int predict(double f_attack, double f_real, const DecisionConfig& cfg) {
  return score(f_attack, f_real) > cfg.epsilon ? 1 : 0;
}

double score(double f_attack, double f_real) { return f_attack - f_real; }

nlohmann::json Decision::to_json() const {
  return {{"f_attack", f_attack}, {"f_real", f_real}, {"score", score}, {"verdict", verdict}};
}

Decision decide(const ThreeChannelMap& pred, const FaceAreas& areas, const DecisionConfig& cfg) {
  cfg.validate();
  Decision d;
  d.f_attack = attack_intensity(pred, areas);
  d.f_real = living_intensity(pred, areas);
  d.score = score(d.f_attack, d.f_real);
  d.verdict = predict(d.f_attack, d.f_real, cfg);
  return d;
}

double calibrate_epsilon(std::span<const evalkit::ScoredSample> dev) {
  std::vector<double> scores;
  for (const auto& s : dev)
    if (s.score >= 0.0) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> grid{0.0};
  for (std::size_t i = 0; i + 1 < scores.size(); ++i)
    grid.push_back((scores[i] + scores[i + 1]) / 2.0);
  if (!scores.empty()) grid.push_back(scores.back());
  double best = 0.0, best_acer = INFINITY;
  for (double eps : grid) {
    const double a = evalkit::acer(dev, eps);
    if (a < best_acer) {
      best_acer = a;
      best = eps;
    }
  }
  return best;
}

}  // namespace fas::decision
