#include "fas/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "fas/error.hpp"

namespace fas::evalkit {

namespace {

bool is_attack(const ScoredSample& s) { return s.truth_label == TruthLabel::attack; }

void check_finite(std::span<const ScoredSample> samples) {
  for (const auto& s : samples)
    if (!std::isfinite(s.score)) throw ValidationError("non-finite score for '" + s.id + "'");
}

std::vector<double> bona_fide_scores(std::span<const ScoredSample> samples) {
  std::vector<double> out;
  for (const auto& s : samples)
    if (!is_attack(s)) out.push_back(s.score);
  return out;
}

}  // namespace

std::map<std::string, double> apcer_per_type(std::span<const ScoredSample> samples,
                                             double threshold) {
  check_finite(samples);
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // missed, total
  for (const auto& s : samples) {
    if (!is_attack(s)) continue;
    auto& c = counts[s.attack_type.value_or("")];
    ++c.second;
    if (s.score <= threshold) ++c.first;
  }
  if (counts.empty()) throw UndefinedMetricError("APCER needs at least one attack sample");
  std::map<std::string, double> out;
  for (const auto& [type, c] : counts)
    out[type] = 100.0 * static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

double apcer(std::span<const ScoredSample> samples, double threshold) {
  double worst = 0.0;
  for (const auto& [type, v] : apcer_per_type(samples, threshold)) worst = std::max(worst, v);
  return worst;
}

double apcer_pooled(std::span<const ScoredSample> samples, double threshold) {
  check_finite(samples);
  std::size_t missed = 0, total = 0;
  for (const auto& s : samples) {
    if (!is_attack(s)) continue;
    ++total;
    if (s.score <= threshold) ++missed;
  }
  if (total == 0) throw UndefinedMetricError("APCER needs at least one attack sample");
  return 100.0 * static_cast<double>(missed) / static_cast<double>(total);
}

double bpcer(std::span<const ScoredSample> samples, double threshold) {
  check_finite(samples);
  std::size_t rejected = 0, total = 0;
  for (const auto& s : samples) {
    if (is_attack(s)) continue;
    ++total;
    if (s.score > threshold) ++rejected;
  }
  if (total == 0) throw UndefinedMetricError("BPCER needs at least one bona fide sample");
  return 100.0 * static_cast<double>(rejected) / static_cast<double>(total);
}

double acer(std::span<const ScoredSample> samples, double threshold) {
  return (apcer(samples, threshold) + bpcer(samples, threshold)) / 2.0;
}

double eer_threshold(std::span<const ScoredSample> dev) {
  check_finite(dev);
  std::vector<double> scores;
  for (const auto& s : dev) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  if (scores.empty()) throw UndefinedMetricError("EER needs both classes");

  // Rates are constant on each interval between consecutive distinct scores;
  // one representative threshold per interval, in increasing order.
  std::vector<double> candidates;
  candidates.push_back(scores.front() - 1.0);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i)
    candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
  candidates.push_back(scores.back() + 1.0);

  double best = candidates.front();
  double best_gap = INFINITY;
  for (double t : candidates) {
    const double gap = std::abs(apcer_pooled(dev, t) - bpcer(dev, t));
    if (gap < best_gap) {
      best_gap = gap;
      best = t;
    }
  }
  return best;
}

double hter(std::span<const ScoredSample> dev, std::span<const ScoredSample> test) {
  const double t = eer_threshold(dev);
  return (apcer_pooled(test, t) + bpcer(test, t)) / 2.0;
}

double threshold_at_bpcer(std::span<const ScoredSample> dev, double target) {
  check_finite(dev);
  if (!(target >= 0.0 && target <= 100.0))
    throw ValidationError("BPCER target must lie in [0, 100]");
  auto bona = bona_fide_scores(dev);
  if (bona.empty()) throw UndefinedMetricError("threshold selection needs bona fide samples");
  const std::size_t n = bona.size();
  if (target > 0.0 && static_cast<double>(n) < std::ceil(100.0 / target))
    spdlog::warn("only {} bona fide dev samples; BPCER {}% is coarsely resolved", n, target);
  std::sort(bona.begin(), bona.end());
  const auto allowed =
      static_cast<std::size_t>(std::floor(target * static_cast<double>(n) / 100.0 + 1e-9));
  const std::size_t index = allowed + 1 >= n ? 0 : n - allowed - 1;
  return bona[index];
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

void summarize(EvalReport& report) {
  std::vector<double> acers;
  for (const auto& f : report.folds) acers.push_back(f.acer);
  std::tie(report.mean, report.std) = mean_std(acers);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds)
    j["folds"].push_back({{"attack_type", f.attack_type},
                          {"threshold", f.threshold},
                          {"apcer", f.apcer},
                          {"bpcer", f.bpcer},
                          {"acer", f.acer}});
  j["mean"] = mean;
  j["std"] = std;
  if (hter) j["hter"] = *hter;
  if (!note.empty()) j["note"] = note;
  return j;
}

std::string EvalReport::to_csv(const std::string& method) const {
  std::ostringstream out;
  out.precision(10);
  out << "method";
  for (const auto& f : folds) out << ',' << f.attack_type;
  out << ",mean,std\n" << method;
  for (const auto& f : folds) out << ',' << f.acer;
  out << ',' << mean << ',' << std << '\n';
  return out.str();
}

EvalReport run_loo_protocol(std::span<const std::string> attack_types, const FoldRunner& run,
                            double bpcer_target) {
  if (attack_types.size() < 2)
    throw ValidationError("leave-one-out needs at least two attack types");
  EvalReport report;
  report.protocol = "loo";
  report.note = "per-sample evaluation";
  for (const auto& held_out : attack_types) {
    const FoldScores scores = run(held_out);
    std::vector<ScoredSample> test;
    for (const auto& s : scores.test)
      if (s.truth_label == TruthLabel::bona_fide || s.attack_type == held_out) test.push_back(s);
    const bool has_type = std::any_of(test.begin(), test.end(), [](const ScoredSample& s) {
      return s.truth_label == TruthLabel::attack;
    });
    if (!has_type)
      throw UndefinedMetricError("attack type '" + held_out + "' has no test samples");
    FoldResult f;
    f.attack_type = held_out;
    f.threshold = threshold_at_bpcer(scores.dev, bpcer_target);
    f.apcer = apcer(test, f.threshold);
    f.bpcer = bpcer(test, f.threshold);
    f.acer = (f.apcer + f.bpcer) / 2.0;
    report.folds.push_back(f);
  }
  summarize(report);
  return report;
}

}  // namespace fas::evalkit
