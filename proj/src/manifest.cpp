#include <fstream>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "fas/pipeline.hpp"

namespace fas::pipeline {

using nlohmann::json;

namespace {

const char* const kSplits[] = {"train", "dev", "test"};

bool valid_split(const std::string& s) {
  return std::find(std::begin(kSplits), std::end(kSplits), s) != std::end(kSplits);
}

std::string at_line(std::size_t line, const std::string& msg) {
  return "manifest line " + std::to_string(line) + ": " + msg;
}

}  // namespace

json ManifestEntry::to_json() const {
  json j;
  j["id"] = id;
  j["image_path"] = image_path;
  j["landmarks_path"] = landmarks_path;
  if (depth_path) j["depth_path"] = *depth_path;
  j["truth_label"] = std::string(fas::to_string(truth_label));
  if (attack_type) j["attack_type"] = *attack_type;
  j["pai_regions"] = json::array();
  for (const auto& r : pai_regions) {
    if (!r.polygon) {
      j["pai_regions"].push_back(r.name);
      continue;
    }
    json poly = json::array();
    for (const auto& p : *r.polygon) poly.push_back({p.x, p.y});
    j["pai_regions"].push_back({{"name", r.name}, {"polygon", poly}});
  }
  j["split"] = split;
  return j;
}

ManifestEntry ManifestEntry::from_json(const json& j, std::size_t line) {
  ManifestEntry e;
  try {
    if (!j.is_object()) throw ValidationError("entry is not a JSON object");
    e.image_path = j.at("image_path").get<std::string>();
    e.landmarks_path = j.at("landmarks_path").get<std::string>();
    e.id = j.contains("id") ? j["id"].get<std::string>() : fs::path(e.image_path).stem().string();
    if (j.contains("depth_path") && !j["depth_path"].is_null())
      e.depth_path = j["depth_path"].get<std::string>();
    e.truth_label = parse_truth_label(j.at("truth_label").get<std::string>());
    if (j.contains("attack_type") && !j["attack_type"].is_null())
      e.attack_type = j["attack_type"].get<std::string>();
    if (j.contains("pai_regions")) {
      for (const auto& r : j["pai_regions"]) {
        PaiRegion pr;
        if (r.is_string()) {
          pr.name = r.get<std::string>();
        } else {
          pr.name = r.at("name").get<std::string>();
          if (r.contains("polygon")) {
            Polygon poly;
            for (const auto& p : r["polygon"])
              poly.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            pr.polygon = std::move(poly);
          }
        }
        e.pai_regions.push_back(std::move(pr));
      }
    }
    e.split = j.value("split", std::string("train"));
  } catch (const json::exception& ex) {
    throw ValidationError(at_line(line, ex.what()));
  } catch (const ValidationError& ex) {
    throw ValidationError(at_line(line, ex.what()));
  }
  if (!valid_split(e.split))
    throw ValidationError(at_line(line, "unknown split '" + e.split + "'"));
  if (e.truth_label == TruthLabel::attack && !e.attack_type)
    throw ValidationError(at_line(line, "attack entry without attack_type"));
  if (e.truth_label == TruthLabel::bona_fide && !e.pai_regions.empty())
    throw ValidationError(at_line(line, "bona fide entry lists PAI regions"));
  return e;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& ex) {
      throw FormatError(at_line(line, ex.what()));
    }
    m.entries.push_back(ManifestEntry::from_json(j, line));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::string out;
  for (const auto& e : manifest.entries) out += e.to_json().dump() + "\n";
  io::write_text(path, out);
}

std::vector<Sample> ingest(const Manifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.entries.size());
  std::size_t line = 0;
  for (const auto& e : manifest.entries) {
    ++line;
    try {
      Sample s;
      s.id = e.id;
      s.image = io::read_png(manifest.base_dir / e.image_path);
      s.landmarks = io::read_landmarks(manifest.base_dir / e.landmarks_path);
      if (e.depth_path) {
        const fs::path p = manifest.base_dir / *e.depth_path;
        if (!fs::exists(p)) throw ValidationError("missing depth file " + p.string());
        s.depth = DepthMap{io::read_depth_png(p)};
      }
      s.truth_label = e.truth_label;
      s.attack_type = e.attack_type;
      s.pai_regions = e.pai_regions;
      s.split = e.split;
      s.validate();
      out.push_back(std::move(s));
    } catch (const ValidationError& ex) {
      throw ValidationError("entry " + std::to_string(line) + " ('" + e.id + "'): " + ex.what());
    } catch (const FormatError& ex) {
      throw FormatError("entry " + std::to_string(line) + " ('" + e.id + "'): " + ex.what());
    }
  }
  return out;
}

std::vector<Sample> ingest(const fs::path& manifest_path) {
  return ingest(read_manifest(manifest_path));
}

void export_samples(std::span<const Sample> samples, const fs::path& manifest_path) {
  const fs::path dir = manifest_path.parent_path();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "landmarks");
  Manifest m;
  m.base_dir = dir;
  for (const auto& s : samples) {
    ManifestEntry e;
    e.id = s.id;
    e.image_path = "images/" + s.id + ".png";
    e.landmarks_path = "landmarks/" + s.id + ".json";
    io::write_png(s.image, dir / e.image_path);
    io::write_landmarks(s.landmarks, dir / e.landmarks_path);
    if (s.depth) {
      fs::create_directories(dir / "depth");
      e.depth_path = "depth/" + s.id + ".png";
      io::write_depth_png(s.depth->values, dir / *e.depth_path);
    }
    e.truth_label = s.truth_label;
    e.attack_type = s.attack_type;
    e.pai_regions = s.pai_regions;
    e.split = s.split;
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, manifest_path);
}

}  // namespace fas::pipeline
