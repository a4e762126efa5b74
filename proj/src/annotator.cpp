#include "fas/annotator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "json.hpp"

namespace fas::annotator {

using nlohmann::json;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool uses_whole_face(const Sample& sample, const LabelingPolicy& policy) {
  if (sample.truth_label != TruthLabel::attack) return false;
  if (policy.attack_region_source == AttackRegionSource::whole_face_hull) return true;
  return sample.attack_type && contains(policy.whole_face_attack_types, *sample.attack_type);
}

std::vector<std::string> pai_names(const Sample& sample) {
  std::vector<std::string> out;
  for (const auto& r : sample.pai_regions) out.push_back(r.name);
  return out;
}

}  // namespace

void LabelingPolicy::validate() const {
  if (living_regions.empty()) throw ValidationError("policy has no living regions");
  for (const auto& r : living_regions)
    if (contains(background_regions, r))
      throw ValidationError("region '" + r + "' is both living and background");
  if (!channel_subset.attack && !channel_subset.living && !channel_subset.background)
    throw ValidationError("channel subset is empty");
}

std::string LabelingPolicy::to_json() const {
  json j;
  j["living_regions"] = living_regions;
  j["background_regions"] = background_regions;
  j["attack_region_source"] = attack_region_source == AttackRegionSource::pai_regions
                                  ? "pai_regions"
                                  : "whole_face_hull";
  j["whole_face_attack_types"] = whole_face_attack_types;
  j["annotation_kind"] =
      annotation_kind == AnnotationKind::depth_valued ? "depth_valued" : "binary_mask";
  std::vector<std::string> channels;
  if (channel_subset.attack) channels.push_back("attack");
  if (channel_subset.living) channels.push_back("living");
  if (channel_subset.background) channels.push_back("background");
  j["channel_subset"] = channels;
  return j.dump(2);
}

LabelingPolicy LabelingPolicy::from_json(std::string_view text) {
  LabelingPolicy p;
  try {
    const json j = json::parse(text);
    if (j.contains("living_regions")) p.living_regions = j["living_regions"];
    if (j.contains("background_regions")) p.background_regions = j["background_regions"];
    if (j.contains("whole_face_attack_types"))
      p.whole_face_attack_types = j["whole_face_attack_types"];
    if (j.contains("attack_region_source")) {
      const auto s = j["attack_region_source"].get<std::string>();
      if (s == "pai_regions") p.attack_region_source = AttackRegionSource::pai_regions;
      else if (s == "whole_face_hull") p.attack_region_source = AttackRegionSource::whole_face_hull;
      else throw ValidationError("unknown attack_region_source '" + s + "'");
    }
    if (j.contains("annotation_kind")) {
      const auto s = j["annotation_kind"].get<std::string>();
      if (s == "depth_valued") p.annotation_kind = AnnotationKind::depth_valued;
      else if (s == "binary_mask") p.annotation_kind = AnnotationKind::binary_mask;
      else throw ValidationError("unknown annotation_kind '" + s + "'");
    }
    if (j.contains("channel_subset")) {
      p.channel_subset = {false, false, false};
      for (const auto& c : j["channel_subset"]) {
        const auto s = c.get<std::string>();
        if (s == "attack") p.channel_subset.attack = true;
        else if (s == "living") p.channel_subset.living = true;
        else if (s == "background") p.channel_subset.background = true;
        else throw ValidationError("unknown channel '" + s + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed labeling policy: ") + e.what());
  }
  p.validate();
  return p;
}

LabeledMasks label_regions(const Sample& sample, std::span<const RegionMask> masks,
                           const LabelingPolicy& policy) {
  policy.validate();
  const int h = sample.image.height, w = sample.image.width;
  if (sample.truth_label == TruthLabel::bona_fide && !sample.pai_regions.empty())
    throw IntegrityError("bona fide sample '" + sample.id + "' declares PAI regions");

  const auto pai = pai_names(sample);
  std::vector<RegionMask> living_parts, background_parts, attack_parts;
  for (const auto& m : masks) {
    if (m.bitmap.height != h || m.bitmap.width != w)
      throw ValidationError("mask '" + m.source_region + "' does not match the image");
    if (contains(pai, m.source_region)) attack_parts.push_back(m);
    else if (contains(policy.living_regions, m.source_region)) living_parts.push_back(m);
    else if (contains(policy.background_regions, m.source_region))
      background_parts.push_back(m);
  }
  for (const auto& r : policy.living_regions) {
    const bool present = std::any_of(living_parts.begin(), living_parts.end(),
                                     [&](const RegionMask& m) { return m.source_region == r; });
    if (!present) throw ValidationError("no mask supplied for living region '" + r + "'");
  }

  LabeledMasks out;
  if (uses_whole_face(sample, policy)) {
    const auto hull = landmark_region_polygon(sample.landmarks, "face_skin");
    out.attack.bitmap = fill_convex_polygon(hull, h, w);
  } else if (sample.truth_label == TruthLabel::attack) {
    if (pai.empty())
      throw IntegrityError("attack sample '" + sample.id + "' declares no PAI regions");
    for (const auto& name : pai) {
      const bool present =
          std::any_of(attack_parts.begin(), attack_parts.end(),
                      [&](const RegionMask& m) { return m.source_region == name; });
      if (!present) throw ValidationError("no mask supplied for PAI region '" + name + "'");
    }
    out.attack = mask_union(attack_parts, h, w);
  } else {
    out.attack.bitmap = Bitmap(h, w);
  }
  out.attack.label = RegionLabel::attack;
  out.attack.source_region = "attack";

  auto living = mask_union(living_parts, h, w);
  living = mask_subtract(living, mask_union(background_parts, h, w));
  living = mask_subtract(living, out.attack);
  out.living = std::move(living);
  out.living.label = RegionLabel::living;
  out.living.source_region = "living";
  return out;
}

ThreeChannelMap construct_three_channel_map(const Sample& sample,
                                            const RegionMask& attack_mask,
                                            const RegionMask& living_mask,
                                            const LabelingPolicy& policy) {
  const int h = attack_mask.bitmap.height, w = attack_mask.bitmap.width;
  if (!attack_mask.bitmap.same_shape(living_mask.bitmap))
    throw ValidationError("attack and living masks differ in size");
  for (std::size_t i = 0; i < attack_mask.bitmap.size(); ++i)
    if (attack_mask.bitmap.data[i] && living_mask.bitmap.data[i])
      throw IntegrityError("attack and living masks overlap");

  const bool binary = policy.annotation_kind == AnnotationKind::binary_mask;
  const FloatPlane* depth = nullptr;
  if (!binary) {
    if (!sample.depth)
      throw ValidationError("sample '" + sample.id + "' has no depth for depth_valued mode");
    depth = &sample.depth->values;
    if (depth->height != h || depth->width != w)
      throw ValidationError("depth map does not match the masks");
  }

  ThreeChannelMap map(h, w);
  const auto& cs = policy.channel_subset;
  for (std::size_t i = 0; i < map.attack.size(); ++i) {
    const float d = binary ? 1.0f : depth->data[i];
    const bool a = attack_mask.bitmap.data[i] != 0;
    const bool l = living_mask.bitmap.data[i] != 0;
    map.attack.data[i] = cs.attack && a ? d : 0.0f;
    map.living.data[i] = cs.living && l ? d : 0.0f;
    map.background.data[i] = cs.background && !(a || l) ? 1.0f : 0.0f;
  }
  return map;
}

Annotation annotate_sample(const Sample& sample, const LabelingPolicy& policy,
                           segmenter::SegmenterBackend& backend) {
  using segmenter::SelectionPolicy;
  policy.validate();
  const auto& lm = sample.landmarks;
  const auto pai = pai_names(sample);

  std::vector<std::string> regions = policy.living_regions;
  for (const auto& r : policy.background_regions)
    if (lm.has_region(r) && !contains(pai, r) && !contains(regions, r)) regions.push_back(r);

  std::vector<RegionMask> masks;
  auto prompts = segmenter::build_point_prompts(lm, regions);
  for (const auto& prompt : prompts) {
    const auto result = segmenter::segment(sample.image, prompt, backend);
    const bool living = contains(policy.living_regions, prompt.target_region);
    RegionMask m;
    if (living) {
      const auto hull = landmark_region_polygon(lm, prompt.target_region);
      m = segmenter::select_mask(result, SelectionPolicy::max_overlap_with_hull, hull);
    } else {
      m = segmenter::select_mask(result, SelectionPolicy::max_score);
    }
    m.label = living ? RegionLabel::living : RegionLabel::background;
    m.source_region = prompt.target_region;
    masks.push_back(std::move(m));
  }

  if (sample.truth_label == TruthLabel::attack && !uses_whole_face(sample, policy)) {
    for (const auto& r : sample.pai_regions) {
      segmenter::PointPrompt prompt;
      if (r.polygon) {
        prompt = segmenter::build_polygon_prompt(*r.polygon, r.name);
      } else {
        const std::string names[] = {r.name};
        prompt = segmenter::build_point_prompts(lm, names).front();
      }
      const auto result = segmenter::segment(sample.image, prompt, backend);
      RegionMask m = segmenter::select_mask(result, SelectionPolicy::max_score);
      m.label = RegionLabel::attack;
      m.source_region = r.name;
      masks.push_back(std::move(m));
    }
  }

  auto labeled = label_regions(sample, masks, policy);
  Annotation out;
  out.map = construct_three_channel_map(sample, labeled.attack, labeled.living, policy);
  out.attack = std::move(labeled.attack);
  out.living = std::move(labeled.living);
  return out;
}

std::size_t count_invariant_violations(const ThreeChannelMap& map,
                                       const Bitmap& attack_support,
                                       const Bitmap& living_support) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < map.attack.size(); ++i) {
    const bool a = attack_support.data[i] != 0, l = living_support.data[i] != 0;
    const float va = map.attack.data[i], vl = map.living.data[i], vb = map.background.data[i];
    bool ok = !(a && l);
    ok = ok && (vb == 0.0f || vb == 1.0f);
    ok = ok && (vb == ((a || l) ? 0.0f : 1.0f));
    ok = ok && va >= 0.0f && va <= 1.0f && vl >= 0.0f && vl <= 1.0f;
    ok = ok && (a || va == 0.0f) && (l || vl == 0.0f);
    bad += !ok;
  }
  return bad;
}

namespace {

constexpr char kMagic[4] = {'F', 'G', 'A', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_map(const ThreeChannelMap& map) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  out.reserve(out.size() + 12 * map.attack.size());
  for (const FloatPlane* plane : {&map.attack, &map.living, &map.background})
    for (float v : plane->data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ThreeChannelMap decode_map(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("FGA1 header truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad FGA1 magic");
  const std::uint32_t h = get_u32(bytes.data() + 4);
  const std::uint32_t w = get_u32(bytes.data() + 8);
  if (h == 0 || w == 0) throw FormatError("FGA1 map has zero dimensions");
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  if (n > (1u << 28)) throw FormatError("FGA1 dimensions implausibly large");
  if (bytes.size() != 12 + 12 * n)
    throw FormatError(bytes.size() < 12 + 12 * n ? "FGA1 planes truncated"
                                                 : "FGA1 has trailing bytes");
  ThreeChannelMap map(static_cast<int>(h), static_cast<int>(w));
  const std::uint8_t* p = bytes.data() + 12;
  for (FloatPlane* plane : {&map.attack, &map.living, &map.background})
    for (auto& v : plane->data) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
      if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("FGA1 value outside [0, 1]");
    }
  return map;
}

void write_map(const ThreeChannelMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_map(map);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ThreeChannelMap read_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_map(bytes);
}

ColorImage preview_image(const ThreeChannelMap& map) {
  ColorImage img(map.height(), map.width());
  auto to8 = [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u) {
      auto* p = img.px(u, v);
      p[0] = to8(map.attack.at(u, v));
      p[1] = to8(map.living.at(u, v));
      p[2] = to8(map.background.at(u, v));
    }
  return img;
}

void export_preview(const ThreeChannelMap& map, const std::filesystem::path& path) {
  io::write_png(preview_image(map), path);
}

}  // namespace fas::annotator
