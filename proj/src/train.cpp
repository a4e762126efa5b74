#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "fas/pipeline.hpp"

namespace fas::pipeline {

using nlohmann::json;

void TrainConfig::validate() const {
  if (manifest.empty()) throw ValidationError("train config needs a manifest");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be positive");
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (lr_halving_period <= 0) throw ValidationError("lr_halving_period must be positive");
  if (crop_padding < 0) throw ValidationError("crop_padding must be non-negative");
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  augment_config.validate();
  model.validate();
  loss.validate();
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.batch_size = 160;
  c.learning_rate = 0.002;
  c.epochs = 500;
  c.lr_halving_period = 200;
  c.model.width_multiplier = 1.0;
  return c;
}

json TrainConfig::to_json() const {
  return {
      {"manifest", manifest.string()},
      {"labels_dir", labels_dir.string()},
      {"output_dir", output_dir.string()},
      {"batch_size", batch_size},
      {"learning_rate", learning_rate},
      {"epochs", epochs},
      {"lr_halving_period", lr_halving_period},
      {"seed", seed},
      {"augment",
       {{"enabled", augment},
        {"gamma", augment_config.gamma},
        {"rho", augment_config.rho},
        {"scheme", std::string(mcrea::to_string(augment_config.scheme))},
        {"seed", augment_config.seed},
        {"overlay_alpha", augment_config.overlay_alpha}}},
      {"flip", flip},
      {"crop", crop},
      {"crop_padding", crop_padding},
      {"model",
       {{"theta", model.theta},
        {"width_multiplier", model.width_multiplier},
        {"input_height", model.input_height},
        {"input_width", model.input_width}}},
      {"loss", {{"alpha", loss.alpha}, {"beta", loss.beta}}},
      {"epsilon", epsilon},
      {"eval_dev", eval_dev},
      {"exclude_attack_types", exclude_attack_types},
  };
}

TrainConfig TrainConfig::from_json(const json& j, const fs::path& base_dir) {
  TrainConfig c;
  auto path_of = [&](const char* key) {
    fs::path p = j.at(key).get<std::string>();
    return p.empty() || p.is_absolute() ? p : base_dir / p;
  };
  try {
    c.manifest = path_of("manifest");
    if (j.contains("labels_dir")) c.labels_dir = path_of("labels_dir");
    if (j.contains("output_dir")) c.output_dir = path_of("output_dir");
    else c.output_dir = base_dir / c.output_dir;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.lr_halving_period = j.value("lr_halving_period", c.lr_halving_period);
    c.seed = j.value("seed", c.seed);
    c.augment_config.seed = c.seed;
    if (j.contains("augment")) {
      const auto& a = j["augment"];
      c.augment = a.value("enabled", c.augment);
      c.augment_config.gamma = a.value("gamma", c.augment_config.gamma);
      c.augment_config.rho = a.value("rho", c.augment_config.rho);
      if (a.contains("scheme"))
        c.augment_config.scheme = mcrea::parse_scheme(a["scheme"].get<std::string>());
      c.augment_config.seed = a.value("seed", c.augment_config.seed);
      c.augment_config.overlay_alpha = a.value("overlay_alpha", c.augment_config.overlay_alpha);
    }
    c.flip = j.value("flip", c.flip);
    c.crop = j.value("crop", c.crop);
    c.crop_padding = j.value("crop_padding", c.crop_padding);
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.theta = m.value("theta", c.model.theta);
      c.model.width_multiplier = m.value("width_multiplier", c.model.width_multiplier);
      c.model.input_height = m.value("input_height", c.model.input_height);
      c.model.input_width = m.value("input_width", c.model.input_width);
    }
    if (j.contains("loss")) {
      c.loss.alpha = j["loss"].value("alpha", c.loss.alpha);
      c.loss.beta = j["loss"].value("beta", c.loss.beta);
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.eval_dev = j.value("eval_dev", c.eval_dev);
    if (j.contains("exclude_attack_types"))
      c.exclude_attack_types = j["exclude_attack_types"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError("train config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw FormatError("train config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

namespace {

bool excluded(const Sample& s, const std::vector<std::string>& types) {
  return s.attack_type &&
         std::find(types.begin(), types.end(), *s.attack_type) != types.end();
}

void flip_item(ColorImage& img, ThreeChannelMap& map) {
  const int h = img.height, w = img.width;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w / 2; ++u) {
      std::swap_ranges(img.px(u, v), img.px(u, v) + 3, img.px(w - 1 - u, v));
      std::swap(map.attack.at(u, v), map.attack.at(w - 1 - u, v));
      std::swap(map.living.at(u, v), map.living.at(w - 1 - u, v));
      std::swap(map.background.at(u, v), map.background.at(w - 1 - u, v));
    }
}

// Pads by `pad` on every side (image black, label background) and crops
// back to the original size at offset (ox, oy) in [0, 2 * pad].
void crop_item(ColorImage& img, ThreeChannelMap& map, int pad, int ox, int oy) {
  const int h = img.height, w = img.width;
  ColorImage out_img(h, w);
  ThreeChannelMap out(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const int su = u + ox - pad, sv = v + oy - pad;
      if (su < 0 || sv < 0 || su >= w || sv >= h) {
        out.background.at(u, v) = 1.0f;
        continue;
      }
      std::copy_n(img.px(su, sv), 3, out_img.px(u, v));
      out.attack.at(u, v) = map.attack.at(su, sv);
      out.living.at(u, v) = map.living.at(su, sv);
      out.background.at(u, v) = map.background.at(su, sv);
    }
  img = std::move(out_img);
  map = std::move(out);
}

struct DevMetrics {
  std::optional<double> at_epsilon;
  std::optional<double> at_eer;
};

DevMetrics dev_metrics(const network::Network<float>& net, std::span<const Sample> dev,
                       double epsilon) {
  bool bona = false, attack = false;
  for (const auto& s : dev) (s.truth_label == TruthLabel::attack ? attack : bona) = true;
  if (!bona || !attack) return {};
  decision::DecisionConfig dc;
  dc.epsilon = epsilon;
  const auto scores = score_samples(net, dev, dc);
  return {evalkit::acer(scores, epsilon), evalkit::acer(scores, evalkit::eer_threshold(scores))};
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const auto samples = ingest(cfg.manifest);

  fs::path labels = cfg.labels_dir;
  if (labels.empty()) {
    labels = cfg.output_dir / "labels";
    bool complete = fs::exists(labels);
    for (const auto& s : samples)
      if (complete && !fs::exists(label_paths(labels, s.id).map)) complete = false;
    if (!complete) {
      spdlog::info("no label cache given; annotating with the mock segmenter");
      segmenter::MockSegmenter mock;
      annotate_manifest(cfg.manifest, annotator::LabelingPolicy{}, mock, labels);
    }
  }

  std::vector<mcrea::BatchItem> items;
  std::vector<Sample> dev;
  for (const auto& s : samples) {
    if (excluded(s, cfg.exclude_attack_types)) continue;
    if (s.image.height != cfg.model.input_height || s.image.width != cfg.model.input_width)
      throw ValidationError("sample '" + s.id + "' is " + std::to_string(s.image.height) + "x" +
                            std::to_string(s.image.width) + ", model input is " +
                            std::to_string(cfg.model.input_height) + "x" +
                            std::to_string(cfg.model.input_width));
    if (s.split == "train") items.push_back(load_item(s, labels));
    else if (s.split == "dev") dev.push_back(s);
  }
  if (items.empty()) throw ValidationError("the train split is empty");

  network::Network<float> net(cfg.model, cfg.seed);
  network::Adam<float> adam(cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  network::ForwardCache<float> cache;
  TrainResult result;

  spdlog::info("training on {} samples ({} dev), {} parameters", items.size(), dev.size(),
               net.parameter_count());
  std::vector<std::size_t> order(items.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(0.5, (epoch - 1) / cfg.lr_halving_period);
    adam.set_learning_rate(lr);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    // Per-batch seeds drawn up front so the prefetch thread needs no shared RNG.
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::uint64_t> batch_seeds(n_batches);
    for (auto& bs : batch_seeds) bs = rng();
    auto prepare = [&](std::size_t b) {
      const std::size_t start = b * cfg.batch_size;
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      mcrea::Batch batch;
      for (std::size_t i = start; i < end; ++i) batch.items.push_back(items[order[i]]);
      std::mt19937_64 brng(batch_seeds[b]);
      if (cfg.augment) {
        auto acfg = cfg.augment_config;
        acfg.seed ^= batch_seeds[b];
        batch = mcrea::mcrea_augment(batch, acfg);
      }
      std::vector<const ColorImage*> imgs;
      std::vector<const ThreeChannelMap*> maps;
      for (auto& it : batch.items) {
        if (cfg.flip && std::bernoulli_distribution(0.5)(brng)) flip_item(it.image, it.label);
        if (cfg.crop && cfg.crop_padding > 0) {
          std::uniform_int_distribution<int> off(0, 2 * cfg.crop_padding);
          const int ox = off(brng), oy = off(brng);
          crop_item(it.image, it.label, cfg.crop_padding, ox, oy);
        }
        imgs.push_back(&it.image);
        maps.push_back(&it.label);
      }
      return std::pair{network::images_to_tensor(imgs), network::maps_to_tensor(maps)};
    };

    double sum_total = 0.0, sum_mse = 0.0, sum_cd = 0.0;
    std::size_t seen = 0;
    auto next = std::async(std::launch::async, prepare, std::size_t{0});
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto [x, y] = next.get();
      if (b + 1 < n_batches) next = std::async(std::launch::async, prepare, b + 1);
      const auto pred = net.forward(x, &cache);
      auto loss = network::total_loss(pred, y, cfg.loss);
      if (!std::isfinite(loss.total))
        throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b) + " (mse " + std::to_string(loss.mse) +
                             ", contrastive " + std::to_string(loss.contrastive) +
                             "); lower the learning rate");
      net.zero_grad();
      net.backward(cache, loss.grad);
      adam.step(net.params());
      const double n = static_cast<double>(x.n);
      sum_total += loss.total * n;
      sum_mse += loss.mse * n;
      sum_cd += loss.contrastive * n;
      seen += static_cast<std::size_t>(x.n);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.loss = sum_total / static_cast<double>(seen);
    rec.mse = sum_mse / static_cast<double>(seen);
    rec.contrastive = sum_cd / static_cast<double>(seen);
    if (cfg.eval_dev) {
      const auto m = dev_metrics(net, dev, cfg.epsilon);
      rec.dev_acer = m.at_epsilon;
      rec.dev_acer_eer = m.at_eer;
    }
    auto pct = [](const std::optional<double>& v) {
      return v ? fmt::format("{:.2f}%", *v) : std::string("n/a");
    };
    spdlog::info("epoch {}/{} lr {:.2e} loss {:.5f} dev ACER {} (EER threshold {})", epoch,
                 cfg.epochs, lr, rec.loss, pct(rec.dev_acer), pct(rec.dev_acer_eer));
    result.epochs.push_back(rec);
  }

  network::Checkpoint ckpt;
  ckpt.model = cfg.model;
  ckpt.loss = cfg.loss;
  ckpt.seed = cfg.seed;
  ckpt.epsilon = cfg.epsilon;
  ckpt.network = std::move(net);
  result.checkpoint_dir = cfg.output_dir / "checkpoint";
  network::save_checkpoint(result.checkpoint_dir, ckpt);

  json log;
  log["config"] = cfg.to_json();
  log["augmentation_order"] =
      cfg.augment ? json::array({"mcrea", "flip", "crop"}) : json::array({"flip", "crop"});
  log["train_samples"] = items.size();
  log["dev_samples"] = dev.size();
  log["epochs"] = json::array();
  for (const auto& r : result.epochs) {
    json e = {{"epoch", r.epoch},
              {"learning_rate", r.learning_rate},
              {"loss", r.loss},
              {"mse", r.mse},
              {"contrastive", r.contrastive}};
    e["dev_acer"] = r.dev_acer ? json(*r.dev_acer) : json(nullptr);
    e["dev_acer_eer"] = r.dev_acer_eer ? json(*r.dev_acer_eer) : json(nullptr);
    log["epochs"].push_back(e);
  }
  log["seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  io::write_text(cfg.output_dir / "train_log.json", log.dump(2) + "\n");
  result.log = std::move(log);
  return result;
}

}  // namespace fas::pipeline
