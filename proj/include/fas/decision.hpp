#ifndef FAS_DECISION_HPP_
#define FAS_DECISION_HPP_

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fas/core.hpp"
#include "fas/evalkit.hpp"

namespace fas::decision {

struct DecisionConfig {
  double epsilon = 0.0;
  std::vector<std::string> key_regions{"eyes", "nose", "mouth"};
  void validate() const;
};

struct FaceAreas {
  RegionMask face_area;
  RegionMask key_area;  // subset of face_area
};

/// face_area: filled hull of the face_skin landmarks. key_area: union of the
/// key region hulls, clipped to face_area.
FaceAreas compute_areas(const LandmarkSet& landmarks, int height, int width,
                        const DecisionConfig& cfg);

/// Mean attack plane over face_area.
double attack_intensity(const ThreeChannelMap& pred, const FaceAreas& areas);
/// Mean living plane over key_area.
double living_intensity(const ThreeChannelMap& pred, const FaceAreas& areas);

/// 1 (attack) iff f_attack > f_real + epsilon, else 0.
int predict(double f_attack, double f_real, const DecisionConfig& cfg);
double score(double f_attack, double f_real);

struct Decision {
  double f_attack = 0.0;
  double f_real = 0.0;
  double score = 0.0;
  int verdict = 0;
  nlohmann::json to_json() const;
};

Decision decide(const ThreeChannelMap& pred, const FaceAreas& areas, const DecisionConfig& cfg);

/// Grid search over epsilon >= 0 (zero and the midpoints between distinct
/// non-negative scores) for the lowest ACER on `dev`; ties pick the smallest.
double calibrate_epsilon(std::span<const evalkit::ScoredSample> dev);

}  // namespace fas::decision

#endif  // FAS_DECISION_HPP_
