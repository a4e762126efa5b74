#include <set>

#include <spdlog/spdlog.h>

#include "fas/error.hpp"
#include "fas/pipeline.hpp"

namespace fas::pipeline {

using nlohmann::json;

Protocol parse_protocol(std::string_view s) {
  if (s == "intra") return Protocol::intra;
  if (s == "cross") return Protocol::cross;
  if (s == "loo") return Protocol::loo;
  throw ValidationError("unknown protocol '" + std::string(s) + "'");
}

std::vector<evalkit::ScoredSample> score_samples(const network::Network<float>& net,
                                                 std::span<const Sample> samples,
                                                 const decision::DecisionConfig& cfg,
                                                 int batch_size) {
  std::vector<evalkit::ScoredSample> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const ColorImage*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&samples[i].image);
    const auto pred = net.forward(network::images_to_tensor(imgs));
    for (std::size_t i = start; i < end; ++i) {
      const Sample& s = samples[i];
      const auto map = network::tensor_to_map(pred, static_cast<int>(i - start));
      const auto areas = decision::compute_areas(s.landmarks, s.image.height, s.image.width, cfg);
      const auto d = decision::decide(map, areas, cfg);
      out.push_back({s.id, d.score, s.truth_label, s.attack_type, s.split});
    }
  }
  return out;
}

json EvalResult::to_json() const {
  json j = report.to_json();
  j["scores"] = json::array();
  for (const auto& s : scores) {
    json e = {{"id", s.id},
              {"score", s.score},
              {"truth_label", std::string(fas::to_string(s.truth_label))},
              {"split", s.split}};
    e["attack_type"] = s.attack_type ? json(*s.attack_type) : json(nullptr);
    j["scores"].push_back(e);
  }
  return j;
}

namespace {

std::vector<evalkit::ScoredSample> only_split(const std::vector<evalkit::ScoredSample>& all,
                                              const std::string& split) {
  std::vector<evalkit::ScoredSample> out;
  for (const auto& s : all)
    if (s.split == split) out.push_back(s);
  return out;
}

evalkit::FoldResult fold_at(const std::string& name, std::span<const evalkit::ScoredSample> test,
                            double threshold) {
  evalkit::FoldResult f;
  f.attack_type = name;
  f.threshold = threshold;
  f.apcer = evalkit::apcer(test, threshold);
  f.bpcer = evalkit::bpcer(test, threshold);
  f.acer = (f.apcer + f.bpcer) / 2.0;
  return f;
}

}  // namespace

EvalResult evaluate(const network::Checkpoint* checkpoint, const fs::path& manifest_path,
                    const EvalOptions& options) {
  options.decision.validate();
  const auto samples = ingest(manifest_path);
  EvalResult result;

  if (options.protocol != Protocol::loo || !options.retrain) {
    if (!checkpoint) throw ValidationError("this protocol needs a checkpoint");
  }

  switch (options.protocol) {
    case Protocol::intra: {
      result.scores = score_samples(checkpoint->network, samples, options.decision);
      const auto dev = only_split(result.scores, "dev");
      const auto test = only_split(result.scores, "test");
      if (test.empty()) throw ValidationError("the test split is empty");
      if (dev.empty()) throw ValidationError("intra protocol needs a dev split for the threshold");
      const double t = evalkit::eer_threshold(dev);
      result.report.protocol = "intra";
      result.report.folds.push_back(fold_at("all", test, t));
      result.report.hter = evalkit::hter(dev, test);
      break;
    }
    case Protocol::cross: {
      result.scores = score_samples(checkpoint->network, samples, options.decision);
      auto test = only_split(result.scores, "test");
      if (test.empty()) test = result.scores;
      std::vector<evalkit::ScoredSample> dev;
      if (options.dev_manifest) {
        const auto dev_samples = ingest(*options.dev_manifest);
        const auto dev_all = score_samples(checkpoint->network, dev_samples, options.decision);
        dev = only_split(dev_all, "dev");
        if (dev.empty()) dev = dev_all;
      } else {
        dev = only_split(result.scores, "dev");
        if (dev.empty()) dev = result.scores;
      }
      const double t = evalkit::eer_threshold(dev);
      result.report.protocol = "cross";
      result.report.folds.push_back(fold_at("all", test, t));
      result.report.hter = evalkit::hter(dev, test);
      break;
    }
    case Protocol::loo: {
      std::set<std::string> type_set;
      for (const auto& s : samples)
        if (s.attack_type) type_set.insert(*s.attack_type);
      const std::vector<std::string> types(type_set.begin(), type_set.end());
      std::vector<evalkit::ScoredSample> shared;
      if (!options.retrain) shared = score_samples(checkpoint->network, samples, options.decision);
      auto runner = [&](const std::string& held_out) {
        std::vector<evalkit::ScoredSample> scores;
        if (options.retrain) {
          TrainConfig tc = *options.retrain;
          tc.manifest = manifest_path;
          tc.exclude_attack_types = {held_out};
          tc.output_dir = tc.output_dir / ("fold_" + held_out);
          spdlog::info("leave-one-out fold: holding out '{}'", held_out);
          const auto trained = train(tc);
          const auto ckpt = network::load_checkpoint(trained.checkpoint_dir);
          scores = score_samples(ckpt.network, samples, options.decision);
        } else {
          scores = shared;
        }
        evalkit::FoldScores fs_;
        for (const auto& s : only_split(scores, "dev"))
          if (!s.attack_type || *s.attack_type != held_out) fs_.dev.push_back(s);
        fs_.test = only_split(scores, "test");
        result.scores.insert(result.scores.end(), scores.begin(), scores.end());
        return fs_;
      };
      result.report = evalkit::run_loo_protocol(types, runner, options.bpcer_target);
      if (!options.retrain) result.scores = shared;
      break;
    }
  }
  if (options.protocol != Protocol::loo) evalkit::summarize(result.report);
  result.report.note = "per-sample evaluation";
  return result;
}

}  // namespace fas::pipeline
