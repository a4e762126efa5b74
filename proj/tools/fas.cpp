// Command-line front end: synth, annotate, augment, train, eval, decide, preview.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "fas/pipeline.hpp"

namespace fs = std::filesystem;
using namespace fas;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::unique_ptr<segmenter::SegmenterBackend> make_backend(const std::string& choice) {
  if (choice == "mock") return std::make_unique<segmenter::MockSegmenter>();
  if (choice == "service") {
    const char* url = std::getenv("FAS_SEGMENTER_URL");
    if (!url || !*url) throw ValidationError("--segmenter service needs FAS_SEGMENTER_URL");
    return std::make_unique<segmenter::ServiceSegmenter>(url);
  }
  return segmenter::backend_from_environment();
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    io::write_text(out, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pixel-wise face anti-spoofing toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  pipeline::SynthConfig synth_cfg;
  std::string synth_out = "synth";
  synth->add_option("--count", synth_cfg.count, "Number of samples")->required();
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");
  synth->add_option("--size", synth_cfg.size, "Image side length");
  synth->add_option("--bona-fide-share", synth_cfg.bona_fide_share);
  synth->add_option("--out", synth_out, "Output directory");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Build three-channel label maps");
  std::string ann_manifest, ann_policy, ann_out, ann_segmenter = "auto";
  int ann_workers = 4;
  annotate->add_option("--manifest", ann_manifest)->required();
  annotate->add_option("--policy", ann_policy, "Labeling policy JSON");
  annotate->add_option("--out", ann_out)->required();
  annotate->add_option("--segmenter", ann_segmenter)
      ->check(CLI::IsMember({"auto", "mock", "service"}));
  annotate->add_option("--workers", ann_workers)->check(CLI::PositiveNumber);

  // augment
  auto* augment = app.add_subcommand("augment", "Apply region exchange to batches");
  std::string aug_manifest, aug_labels, aug_out = "augmented", aug_scheme = "overlay";
  mcrea::AugmentConfig aug_cfg;
  int aug_batch = 4;
  augment->add_option("--manifest", aug_manifest)->required();
  augment->add_option("--labels", aug_labels, "Label cache from `annotate`");
  augment->add_option("--gamma", aug_cfg.gamma);
  augment->add_option("--rho", aug_cfg.rho);
  augment->add_option("--scheme", aug_scheme)
      ->check(CLI::IsMember({"integrated_attack", "overlay", "clipping_exchange"}));
  augment->add_option("--seed", aug_cfg.seed);
  augment->add_option("--alpha", aug_cfg.overlay_alpha, "Overlay blend factor");
  augment->add_option("--batch-size", aug_batch)->check(CLI::PositiveNumber);
  augment->add_option("--out", aug_out);

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_config, train_manifest, train_labels, train_output;
  std::optional<int> train_epochs;
  train->add_option("--config", train_config, "Train config JSON");
  train->add_option("--manifest", train_manifest, "Manifest (when no config is given)");
  train->add_option("--labels", train_labels, "Label cache from `annotate`");
  train->add_option("--output", train_output, "Output directory override");
  train->add_option("--epochs", train_epochs, "Epoch count override");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_manifest, ev_protocol = "intra", ev_dev, ev_config, ev_out, ev_csv;
  std::optional<double> ev_eps;
  double ev_target = 1.0;
  eval->add_option("--checkpoint", ev_ckpt);
  eval->add_option("--manifest", ev_manifest)->required();
  eval->add_option("--protocol", ev_protocol)->check(CLI::IsMember({"intra", "cross", "loo"}));
  eval->add_option("--dev-manifest", ev_dev, "Threshold source for the cross protocol");
  eval->add_option("--config", ev_config, "Train config; loo retrains one model per fold");
  eval->add_option("--epsilon", ev_eps);
  eval->add_option("--bpcer-target", ev_target);
  eval->add_option("--out", ev_out, "Report JSON (stdout if omitted)");
  eval->add_option("--csv", ev_csv, "Per-fold ACER table");

  // decide
  auto* decide = app.add_subcommand("decide", "Fuse a prediction map into a verdict");
  std::string dec_pred, dec_landmarks;
  decision::DecisionConfig dec_cfg;
  decide->add_option("--pred", dec_pred)->required();
  decide->add_option("--landmarks", dec_landmarks)->required();
  decide->add_option("--epsilon", dec_cfg.epsilon);
  decide->add_option("--key-regions", dec_cfg.key_regions);

  // preview
  auto* preview = app.add_subcommand("preview", "Render a label map as RGB");
  std::string prev_map, prev_out;
  preview->add_option("--map", prev_map)->required();
  preview->add_option("--out", prev_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*synth) {
      const auto manifest = pipeline::generate_synthetic(synth_cfg, synth_out);
      std::cout << manifest.string() << "\n";
    } else if (*annotate) {
      annotator::LabelingPolicy policy;
      if (!ann_policy.empty())
        policy = annotator::LabelingPolicy::from_json(io::read_text(ann_policy));
      auto backend = make_backend(ann_segmenter);
      const auto n =
          pipeline::annotate_manifest(ann_manifest, policy, *backend, ann_out, ann_workers);
      std::cout << n << " samples annotated\n";
    } else if (*augment) {
      aug_cfg.scheme = mcrea::parse_scheme(aug_scheme);
      aug_cfg.validate();
      const auto samples = pipeline::ingest(aug_manifest);
      fs::path labels = aug_labels;
      if (labels.empty()) {
        labels = fs::path(aug_out) / "labels";
        segmenter::MockSegmenter mock;
        pipeline::annotate_manifest(aug_manifest, annotator::LabelingPolicy{}, mock, labels);
      }
      fs::create_directories(aug_out);
      json logs = json::array();
      for (std::size_t start = 0, b = 0; start < samples.size(); start += aug_batch, ++b) {
        mcrea::Batch batch;
        std::vector<std::string> ids;
        for (std::size_t i = start; i < std::min(samples.size(), start + aug_batch); ++i) {
          batch.items.push_back(pipeline::load_item(samples[i], labels));
          ids.push_back(samples[i].id);
        }
        auto cfg = aug_cfg;
        cfg.seed = aug_cfg.seed + b;
        mcrea::AugmentLog log;
        const auto out = mcrea::mcrea_augment(batch, cfg, &log);
        for (std::size_t i = 0; i < out.items.size(); ++i) {
          io::write_png(out.items[i].image, fs::path(aug_out) / (ids[i] + ".png"));
          annotator::write_map(out.items[i].label, fs::path(aug_out) / (ids[i] + ".fga1"));
          annotator::export_preview(out.items[i].label,
                                    fs::path(aug_out) / (ids[i] + ".preview.png"));
        }
        json entry = json::parse(log.to_json());
        entry["batch"] = b;
        entry["ids"] = ids;
        logs.push_back(entry);
      }
      io::write_text(fs::path(aug_out) / "augment_log.json", logs.dump(2) + "\n");
      std::cout << samples.size() << " samples augmented\n";
    } else if (*train) {
      pipeline::TrainConfig cfg;
      if (!train_config.empty()) {
        cfg = pipeline::TrainConfig::load(train_config);
      } else if (!train_manifest.empty()) {
        cfg.manifest = train_manifest;
        cfg.augment_config.seed = cfg.seed;
      } else {
        throw ValidationError("train needs --config or --manifest");
      }
      if (!train_labels.empty()) cfg.labels_dir = train_labels;
      if (!train_output.empty()) cfg.output_dir = train_output;
      if (train_epochs) cfg.epochs = *train_epochs;
      const auto result = pipeline::train(cfg);
      std::cout << result.checkpoint_dir.string() << "\n";
    } else if (*eval) {
      pipeline::EvalOptions opts;
      opts.protocol = pipeline::parse_protocol(ev_protocol);
      opts.bpcer_target = ev_target;
      if (!ev_dev.empty()) opts.dev_manifest = fs::path(ev_dev);
      std::optional<network::Checkpoint> ckpt;
      if (!ev_ckpt.empty()) {
        ckpt = network::load_checkpoint(ev_ckpt);
        opts.decision.epsilon = ckpt->epsilon;
      }
      if (ev_eps) opts.decision.epsilon = *ev_eps;
      if (!ev_config.empty()) {
        if (opts.protocol != pipeline::Protocol::loo)
          throw ValidationError("--config only applies to the loo protocol");
        opts.retrain = pipeline::TrainConfig::load(ev_config);
      }
      if (!ckpt && !opts.retrain)
        throw ValidationError("eval needs --checkpoint (or --config for loo)");
      const auto result = pipeline::evaluate(ckpt ? &*ckpt : nullptr, ev_manifest, opts);
      emit(result.to_json(), ev_out);
      if (!ev_csv.empty()) io::write_text(ev_csv, result.report.to_csv());
      spdlog::info("{}: ACER {:.2f}% (mean over folds), std {:.2f}", result.report.protocol,
                   result.report.mean, result.report.std);
    } else if (*decide) {
      const auto map = annotator::read_map(dec_pred);
      const auto lm = io::read_landmarks(dec_landmarks);
      const auto areas = decision::compute_areas(lm, map.height(), map.width(), dec_cfg);
      std::cout << decision::decide(map, areas, dec_cfg).to_json().dump() << "\n";
    } else if (*preview) {
      annotator::export_preview(annotator::read_map(prev_map), prev_out);
    }
  } catch (const ValidationError& e) {
    spdlog::error("validation: {}", e.what());
    return kExitValidation;
  } catch (const FormatError& e) {
    spdlog::error("format: {}", e.what());
    return kExitValidation;
  } catch (const IntegrityError& e) {
    spdlog::error("integrity: {}", e.what());
    return kExitValidation;
  } catch (const UndefinedMetricError& e) {
    spdlog::error("metric: {}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return 0;
}
