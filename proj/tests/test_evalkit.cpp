#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fas/error.hpp"
#include "fas/evalkit.hpp"

using namespace fas;
using namespace fas::evalkit;

using V = std::vector<ScoredSample>;

namespace {

ScoredSample bona(double s, const std::string& id = "b") {
  return {id, s, TruthLabel::bona_fide, std::nullopt};
}
ScoredSample attack(double s, const std::string& type = "print", const std::string& id = "a") {
  return {id, s, TruthLabel::attack, type};
}

std::vector<ScoredSample> random_scores(std::mt19937_64& rng, int n, bool shuffle_labels) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const char* types[] = {"print", "replay", "glasses"};
  std::vector<ScoredSample> out;
  for (int i = 0; i < n; ++i) {
    const bool is_attack = coin(rng);
    const double s = d(rng) + (is_attack && !shuffle_labels ? 1.5 : 0.0);
    out.push_back(is_attack ? attack(s, types[i % 3]) : bona(s));
  }
  return out;
}

// FAR and FRR counted the long way.
std::pair<double, double> far_frr(const std::vector<ScoredSample>& v, double t) {
  int fa = 0, na = 0, fr = 0, nb = 0;
  for (const auto& s : v) {
    if (s.truth_label == TruthLabel::attack) {
      ++na;
      fa += s.score <= t;
    } else {
      ++nb;
      fr += s.score > t;
    }
  }
  return {100.0 * fa / na, 100.0 * fr / nb};
}

}  // namespace

TEST_CASE("error rates on a hand-counted fixture") {
  const std::vector<ScoredSample> v = {bona(0.1), bona(0.4), bona(0.7), bona(0.2),
                                       attack(0.9, "print"), attack(0.3, "print"),
                                       attack(0.8, "replay"), attack(0.6, "replay"),
                                       attack(0.5, "replay")};
  // Threshold 0.55: bona fide 0.7 rejected; print 0.3 and replay 0.5 accepted.
  CHECK(bpcer(v, 0.55) == 25.0);
  const auto per = apcer_per_type(v, 0.55);
  CHECK(per.at("print") == 50.0);
  CHECK(per.at("replay") == doctest::Approx(100.0 / 3.0));
  CHECK(apcer(v, 0.55) == 50.0);
  CHECK(apcer_pooled(v, 0.55) == 40.0);
  CHECK(acer(v, 0.55) == 37.5);
  // Scores equal to the threshold count as bona fide.
  CHECK(bpcer(v, 0.4) == 25.0);
  CHECK(apcer_pooled(v, 0.9) == 100.0);
}

TEST_CASE("ACER is the mean of APCER and BPCER over the full threshold sweep") {
  std::mt19937_64 rng(1);
  const auto v = random_scores(rng, 300, false);
  std::vector<double> thresholds;
  for (const auto& s : v) thresholds.push_back(s.score);
  thresholds.push_back(-100.0);
  thresholds.push_back(100.0);
  for (double t : thresholds) CHECK(acer(v, t) == (apcer(v, t) + bpcer(v, t)) / 2.0);
}

TEST_CASE("metrics ignore sample order") {
  std::mt19937_64 rng(2);
  auto v = random_scores(rng, 200, false);
  const auto dev = random_scores(rng, 200, false);
  const double a = acer(v, 0.7), h = hter(dev, v), t = threshold_at_bpcer(v, 5.0);
  const double e = eer_threshold(v);
  std::shuffle(v.begin(), v.end(), rng);
  CHECK(acer(v, 0.7) == a);
  CHECK(hter(dev, v) == h);
  CHECK(threshold_at_bpcer(v, 5.0) == t);
  CHECK(eer_threshold(v) == e);
}

TEST_CASE("threshold at BPCER never exceeds the target on its own dev set") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoredSample> dev;
    std::normal_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 200; ++i) dev.push_back(bona(d(rng)));
    for (int i = 0; i < 50; ++i) dev.push_back(attack(d(rng) + 2.0));
    for (double target : {1.0, 2.5, 10.0}) {
      const double t = threshold_at_bpcer(dev, target);
      CHECK(bpcer(dev, t) <= target);
      // Minimality: the next lower bona fide score breaks the target.
      std::vector<double> b;
      for (const auto& s : dev)
        if (s.truth_label == TruthLabel::bona_fide) b.push_back(s.score);
      std::sort(b.begin(), b.end());
      const auto it = std::lower_bound(b.begin(), b.end(), t);
      REQUIRE(it != b.begin());
      CHECK(bpcer(dev, *(it - 1)) > target);
    }
  }
  std::vector<ScoredSample> dev = {bona(0.3), bona(0.1), bona(0.2), attack(0.9)};
  CHECK(threshold_at_bpcer(dev, 0.0) == 0.3);
  CHECK(bpcer(dev, threshold_at_bpcer(dev, 0.0)) == 0.0);
  CHECK(threshold_at_bpcer(dev, 100.0) == 0.1);
  CHECK_THROWS_AS(threshold_at_bpcer(dev, -1.0), ValidationError);
  CHECK_THROWS_AS(threshold_at_bpcer(V{attack(0.5)}, 1.0), UndefinedMetricError);
}

TEST_CASE("HTER with one error per class of four is 25%") {
  const std::vector<ScoredSample> v = {bona(0.1), bona(0.2), bona(0.3), bona(0.9),
                                       attack(0.05), attack(0.8), attack(0.85), attack(0.95)};
  CHECK(hter(v, v) == 25.0);
  const double t = eer_threshold(v);
  CHECK(t > 0.3);
  CHECK(t < 0.8);
}

TEST_CASE("EER threshold balances the two error rates") {
  std::mt19937_64 rng(4);
  const auto v = random_scores(rng, 400, false);
  const double t = eer_threshold(v);
  const auto [far, frr] = far_frr(v, t);
  // No other score split has a smaller gap.
  std::vector<double> scores;
  for (const auto& s : v) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  for (double s : scores) {
    const auto [f2, r2] = far_frr(v, s);
    CHECK(std::abs(far - frr) <= std::abs(f2 - r2) + 1e-12);
  }
  // Separable classes give a threshold between them.
  const std::vector<ScoredSample> sep = {bona(0.1), bona(0.2), attack(0.7), attack(0.8)};
  const double ts = eer_threshold(sep);
  CHECK(ts == doctest::Approx(0.45));
  CHECK(hter(sep, sep) == 0.0);
}

TEST_CASE("shuffled labels give chance-level HTER") {
  std::mt19937_64 rng(5);
  const auto dev = random_scores(rng, 2000, true);
  const auto test = random_scores(rng, 2000, true);
  CHECK(std::abs(hter(dev, test) - 50.0) < 5.0);
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(bpcer(V{attack(0.1)}, 0.0), UndefinedMetricError);
  CHECK_THROWS_AS(apcer(V{bona(0.1)}, 0.0), UndefinedMetricError);
  CHECK_THROWS_AS(apcer_pooled(V{bona(0.1)}, 0.0), UndefinedMetricError);
  CHECK_THROWS_AS(eer_threshold({}), UndefinedMetricError);
  CHECK_THROWS_AS(acer(V{bona(NAN), attack(0.2)}, 0.0), ValidationError);
  CHECK_THROWS_AS(threshold_at_bpcer(V{bona(INFINITY)}, 1.0), ValidationError);
}

TEST_CASE("leave-one-out protocol aggregates folds") {
  const std::vector<std::string> types = {"print", "replay", "glasses"};
  const FoldRunner run = [](const std::string& held_out) {
    FoldScores f;
    for (int i = 0; i < 100; ++i) f.dev.push_back(bona(i / 100.0));
    f.dev.push_back(attack(2.0, "print"));
    // Test: bona fide 0.0..0.99 plus four of each attack type; the held-out
    // type gets `missed` attacks below the threshold.
    for (int i = 0; i < 100; ++i) f.test.push_back(bona(i / 100.0));
    const int missed = held_out == "print" ? 0 : held_out == "replay" ? 1 : 2;
    for (const char* t : {"print", "replay", "glasses"})
      for (int i = 0; i < 4; ++i)
        f.test.push_back(attack(t == held_out && i < missed ? 0.5 : 5.0, t));
    return f;
  };
  const auto report = run_loo_protocol(types, run, 1.0);
  REQUIRE(report.folds.size() == 3);
  CHECK(report.protocol == "loo");
  // Threshold at BPCER 1% of 100 bona fide: one rejection allowed -> 0.98.
  for (const auto& f : report.folds) {
    CHECK(f.threshold == 0.98);
    CHECK(f.bpcer == 1.0);
  }
  const double acers[] = {(0.0 + 1.0) / 2, (25.0 + 1.0) / 2, (50.0 + 1.0) / 2};
  double mean = 0, var = 0;
  for (int i = 0; i < 3; ++i) {
    CHECK(report.folds[i].acer == acers[i]);
    mean += acers[i] / 3;
  }
  for (double a : acers) var += (a - mean) * (a - mean) / 3;
  CHECK(report.mean == doctest::Approx(mean));
  CHECK(report.std == doctest::Approx(std::sqrt(var)));

  const auto csv = report.to_csv("ours");
  CHECK(csv.rfind("method,print,replay,glasses,mean,std\nours,0.5,13,25.5,", 0) == 0);
  const auto j = report.to_json();
  CHECK(j.at("folds").size() == 3);
  CHECK(j.at("note") == "per-sample evaluation");

  const std::vector<std::string> one = {"print"};
  CHECK_THROWS_AS(run_loo_protocol(one, run), ValidationError);
  const std::vector<std::string> missing = {"print", "mask3d"};
  CHECK_THROWS_AS(run_loo_protocol(missing, run), UndefinedMetricError);
}

TEST_CASE("mean and population standard deviation") {
  const double v[] = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto [m, s] = mean_std(v);
  CHECK(m == 5.0);
  CHECK(s == 2.0);
}
