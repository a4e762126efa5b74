#ifndef FAS_EVALKIT_HPP_
#define FAS_EVALKIT_HPP_

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fas/core.hpp"

// Presentation-attack metrics. Scores are "higher = more attack-like"; a
// sample is classified as an attack when its score exceeds the threshold.
// All rates are percentages.
namespace fas::evalkit {

struct ScoredSample {
  std::string id;
  double score = 0.0;
  TruthLabel truth_label = TruthLabel::bona_fide;
  std::optional<std::string> attack_type;
  std::string split = "test";
};

/// Per attack type: share of attacks with score <= threshold. Attacks
/// without a type are grouped under "".
std::map<std::string, double> apcer_per_type(std::span<const ScoredSample> samples,
                                             double threshold);
/// Worst per-type APCER.
double apcer(std::span<const ScoredSample> samples, double threshold);
/// All attacks pooled regardless of type.
double apcer_pooled(std::span<const ScoredSample> samples, double threshold);
double bpcer(std::span<const ScoredSample> samples, double threshold);
double acer(std::span<const ScoredSample> samples, double threshold);

/// Midpoint of the score interval minimising |FAR - FRR|, ties toward the
/// lower threshold.
double eer_threshold(std::span<const ScoredSample> dev);
/// Threshold from `dev` at its EER point; (FAR + FRR) / 2 on `test`.
double hter(std::span<const ScoredSample> dev, std::span<const ScoredSample> test);

/// Smallest bona fide score t with BPCER(dev, t) <= target. Logs a warning
/// when dev holds fewer than ceil(100 / target) bona fide samples.
double threshold_at_bpcer(std::span<const ScoredSample> dev, double target = 1.0);

struct FoldResult {
  std::string attack_type;
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
};

struct EvalReport {
  std::string protocol;
  std::vector<FoldResult> folds;
  double mean = 0.0;  // ACER over folds
  double std = 0.0;   // population standard deviation
  std::optional<double> hter;
  std::string note;

  nlohmann::json to_json() const;
  /// Header: method, one column per fold, mean, std. One ACER row.
  std::string to_csv(const std::string& method = "model") const;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);
/// Fills mean/std from the folds' ACERs.
void summarize(EvalReport& report);

/// Scores for one held-out fold: dev samples (for the threshold) and test
/// samples, as produced by a model that never saw `held_out` in training.
struct FoldScores {
  std::vector<ScoredSample> dev;
  std::vector<ScoredSample> test;
};
using FoldRunner = std::function<FoldScores(const std::string& held_out)>;

/// Leave-one-attack-out: per type, threshold at BPCER 1% on dev and ACER on
/// bona fide plus the held-out type from test.
EvalReport run_loo_protocol(std::span<const std::string> attack_types, const FoldRunner& run,
                            double bpcer_target = 1.0);

}  // namespace fas::evalkit

#endif  // FAS_EVALKIT_HPP_
