#ifndef FAS_ANNOTATOR_HPP_
#define FAS_ANNOTATOR_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fas/core.hpp"
#include "fas/segmenter.hpp"

namespace fas::annotator {

enum class AttackRegionSource { pai_regions, whole_face_hull };
enum class AnnotationKind { depth_valued, binary_mask };

struct ChannelSubset {
  bool attack = true;
  bool living = true;
  bool background = true;
  bool operator==(const ChannelSubset&) const = default;
};

struct LabelingPolicy {
  std::vector<std::string> living_regions{"face_skin"};
  std::vector<std::string> background_regions{"hair", "eyebrows", "ears", "glasses"};
  AttackRegionSource attack_region_source = AttackRegionSource::pai_regions;
  /// Attack types labelled with the whole-face hull regardless of
  /// `attack_region_source` (2-D attacks carry no segmentable PAI).
  std::vector<std::string> whole_face_attack_types{"print", "replay"};
  AnnotationKind annotation_kind = AnnotationKind::depth_valued;
  ChannelSubset channel_subset;

  void validate() const;
  std::string to_json() const;
  static LabelingPolicy from_json(std::string_view text);
};

struct LabeledMasks {
  RegionMask attack;
  RegionMask living;
};

/// Splits segmented region masks into attack and living supports.
/// Attack wins on overlap; background regions are carved out of living
/// unless the sample declares them as PAI.
LabeledMasks label_regions(const Sample& sample, std::span<const RegionMask> masks,
                           const LabelingPolicy& policy);

/// attack = D * attack_mask, living = D * living_mask,
/// background = NOT(attack_mask OR living_mask). D == 1 in binary_mask mode.
ThreeChannelMap construct_three_channel_map(const Sample& sample,
                                            const RegionMask& attack_mask,
                                            const RegionMask& living_mask,
                                            const LabelingPolicy& policy);

struct Annotation {
  ThreeChannelMap map;
  RegionMask attack;
  RegionMask living;
};

/// Full annotation of one sample: prompts, segmentation, labelling, assembly.
Annotation annotate_sample(const Sample& sample, const LabelingPolicy& policy,
                           segmenter::SegmenterBackend& backend);

/// Checks the map invariants against explicit region supports. Returns the
/// number of violating pixels.
std::size_t count_invariant_violations(const ThreeChannelMap& map,
                                       const Bitmap& attack_support,
                                       const Bitmap& living_support);

// FGA1: "FGA1", u32 LE height, u32 LE width, then attack, living, background
// planes of f32 LE, row-major.
std::vector<std::uint8_t> encode_map(const ThreeChannelMap& map);
ThreeChannelMap decode_map(std::span<const std::uint8_t> bytes);
void write_map(const ThreeChannelMap& map, const std::filesystem::path& path);
ThreeChannelMap read_map(const std::filesystem::path& path);

/// R = attack * 255, G = living * 255, B = background * 255.
ColorImage preview_image(const ThreeChannelMap& map);
void export_preview(const ThreeChannelMap& map, const std::filesystem::path& path);

}  // namespace fas::annotator

#endif  // FAS_ANNOTATOR_HPP_
