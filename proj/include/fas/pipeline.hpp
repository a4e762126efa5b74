#ifndef FAS_PIPELINE_HPP_
#define FAS_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fas/annotator.hpp"
#include "fas/core.hpp"
#include "fas/decision.hpp"
#include "fas/evalkit.hpp"
#include "fas/mcrea.hpp"
#include "fas/network.hpp"
#include "fas/segmenter.hpp"

namespace fas::pipeline {

namespace fs = std::filesystem;

// Manifests -----------------------------------------------------------------

/// One JSON object per line. Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string landmarks_path;
  std::optional<std::string> depth_path;
  TruthLabel truth_label = TruthLabel::bona_fide;
  std::optional<std::string> attack_type;
  std::vector<PaiRegion> pai_regions;
  std::string split = "train";

  nlohmann::json to_json() const;
  /// Throws ValidationError naming `line` for malformed entries.
  static ManifestEntry from_json(const nlohmann::json& j, std::size_t line);
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  fs::path base_dir;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const fs::path& path);
void write_manifest(const Manifest& manifest, const fs::path& path);

/// Loads every entry, resolving paths against the manifest directory and
/// validating the shared image/landmark/depth frame.
std::vector<Sample> ingest(const fs::path& manifest_path);
std::vector<Sample> ingest(const Manifest& manifest);

/// Writes images, landmarks and depth next to `manifest_path` and the manifest itself.
void export_samples(std::span<const Sample> samples, const fs::path& manifest_path);

// Pseudo-depth -----------------------------------------------------------------

/// Radial surface over the face_skin hull: 1 at the (rounded) nose centroid,
/// sqrt(1 - t^2) along each ray where t runs from 0 at the peak to 1 at the
/// hull boundary, 0 outside. Normalized, then quantized to 16 bits so a
/// depth PNG round trip is exact.
DepthMap pseudo_depth(const LandmarkSet& landmarks, int height, int width);
void attach_pseudo_depth(Sample& sample);

// Synthetic corpus ------------------------------------------------------------

struct SynthConfig {
  int count = 400;
  std::uint64_t seed = 0;
  int size = 64;
  double bona_fide_share = 0.5;
  /// Attack types drawn uniformly for the attack share.
  std::vector<std::string> attack_types{"print", "replay", "glasses", "rigidmask"};
  double train_share = 0.6;
  double dev_share = 0.2;
  void validate() const;
};

/// Known synthetic attack types.
bool is_synthetic_attack(std::string_view type);

/// Renders one sample in memory. `index` picks type and split deterministically
/// together with the seed.
Sample render_synthetic(const SynthConfig& cfg, int index);

/// Writes `count` samples under `out_dir` and returns the manifest path.
fs::path generate_synthetic(const SynthConfig& cfg, const fs::path& out_dir);

// Annotation stage --------------------------------------------------------------

/// Cached labels for one sample: `<id>.fga1`, `<id>.attack.png`, `<id>.living.png`.
struct LabelPaths {
  fs::path map, attack, living;
};
LabelPaths label_paths(const fs::path& dir, const std::string& id);

/// Annotates every sample of the manifest into `out_dir` with a bounded
/// worker pool. Returns the number of samples written.
std::size_t annotate_manifest(const fs::path& manifest_path,
                              const annotator::LabelingPolicy& policy,
                              segmenter::SegmenterBackend& backend, const fs::path& out_dir,
                              int workers = 4);

/// Loads an image with its cached label, falling back to deriving the
/// supports from the map when the mask files are missing.
mcrea::BatchItem load_item(const Sample& sample, const fs::path& labels_dir);

// Training -----------------------------------------------------------------

struct TrainConfig {
  fs::path manifest;
  fs::path labels_dir;  // empty: annotate with the mock segmenter into output_dir/labels
  fs::path output_dir = "run";
  int batch_size = 16;
  double learning_rate = 0.002;
  int epochs = 30;
  int lr_halving_period = 200;
  std::uint64_t seed = 0;
  bool augment = true;
  mcrea::AugmentConfig augment_config;
  bool flip = true;
  bool crop = true;
  int crop_padding = 4;
  network::ModelConfig model;
  network::LossConfig loss;
  double epsilon = 0.0;
  bool eval_dev = true;
  std::vector<std::string> exclude_attack_types;

  void validate() const;
  /// Full-scale schedule: batch 160, 500 epochs, full-width model.
  static TrainConfig full_scale();
  nlohmann::json to_json() const;
  /// Relative paths are resolved against `base_dir`.
  static TrainConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  static TrainConfig load(const fs::path& path);
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double mse = 0.0;
  double contrastive = 0.0;
  std::optional<double> dev_acer;      // at the configured epsilon
  std::optional<double> dev_acer_eer;  // at the dev equal-error threshold
};

struct TrainResult {
  fs::path checkpoint_dir;
  std::vector<EpochRecord> epochs;
  nlohmann::json log;
};

TrainResult train(const TrainConfig& cfg);

// Evaluation ----------------------------------------------------------------

enum class Protocol { intra, cross, loo };
Protocol parse_protocol(std::string_view s);

/// Forward pass plus decision score for each sample.
std::vector<evalkit::ScoredSample> score_samples(const network::Network<float>& net,
                                                 std::span<const Sample> samples,
                                                 const decision::DecisionConfig& cfg,
                                                 int batch_size = 16);

struct EvalOptions {
  Protocol protocol = Protocol::intra;
  std::optional<fs::path> dev_manifest;     // cross protocol
  std::optional<TrainConfig> retrain;       // loo: retrain per fold
  decision::DecisionConfig decision;
  double bpcer_target = 1.0;
};

struct EvalResult {
  evalkit::EvalReport report;
  std::vector<evalkit::ScoredSample> scores;
  nlohmann::json to_json() const;
};

EvalResult evaluate(const network::Checkpoint* checkpoint, const fs::path& manifest_path,
                    const EvalOptions& options);

}  // namespace fas::pipeline

#endif  // FAS_PIPELINE_HPP_
