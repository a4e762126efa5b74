#include "fas/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "fas/error.hpp"
#include "json.hpp"

namespace fas::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

cv::Mat to_bgr(const ColorImage& image) {
  cv::Mat m(image.height, image.width, CV_8UC3);
  for (int v = 0; v < image.height; ++v) {
    auto* row = m.ptr<std::uint8_t>(v);
    for (int u = 0; u < image.width; ++u) {
      const auto* p = image.px(u, v);
      row[3 * u + 0] = p[2];
      row[3 * u + 1] = p[1];
      row[3 * u + 2] = p[0];
    }
  }
  return m;
}

ColorImage from_mat(const cv::Mat& m) {
  if (m.empty()) throw FormatError("undecodable image data");
  if (m.depth() != CV_8U) throw FormatError("expected an 8-bit image");
  ColorImage image(m.rows, m.cols);
  for (int v = 0; v < m.rows; ++v) {
    const auto* row = m.ptr<std::uint8_t>(v);
    for (int u = 0; u < m.cols; ++u) {
      auto* p = image.px(u, v);
      if (m.channels() == 1) {
        p[0] = p[1] = p[2] = row[u];
      } else {
        const int c = m.channels();
        p[0] = row[c * u + 2];
        p[1] = row[c * u + 1];
        p[2] = row[c * u + 0];
      }
    }
  }
  return image;
}

void ensure_written(bool ok, const fs::path& path) {
  if (!ok) throw Error("cannot write " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ColorImage& image) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr(image), buf)) throw Error("PNG encoding failed");
  return buf;
}

ColorImage decode_png(std::span<const std::uint8_t> bytes) {
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U,
              const_cast<std::uint8_t*>(bytes.data()));
  return from_mat(cv::imdecode(raw, cv::IMREAD_COLOR));
}

void write_png(const ColorImage& image, const fs::path& path) {
  ensure_written(cv::imwrite(path.string(), to_bgr(image)), path);
}

ColorImage read_png(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("missing image file " + path.string());
  return from_mat(cv::imread(path.string(), cv::IMREAD_COLOR));
}

void write_depth_png(const FloatPlane& depth, const fs::path& path) {
  cv::Mat m(depth.height, depth.width, CV_16UC1);
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const float d = std::clamp(depth.at(u, v), 0.0f, 1.0f);
      m.at<std::uint16_t>(v, u) =
          static_cast<std::uint16_t>(std::lround(d * 65535.0f));
    }
  ensure_written(cv::imwrite(path.string(), m), path);
}

FloatPlane read_depth_png(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("missing depth file " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw FormatError("undecodable depth file " + path.string());
  FloatPlane out(m.rows, m.cols);
  // Division, not a reciprocal multiply, so code / 65535 round-trips exactly.
  const float full = m.depth() == CV_16U ? 65535.0f : 255.0f;
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u)
      out.at(u, v) = m.depth() == CV_16U
                         ? static_cast<float>(m.at<std::uint16_t>(v, u)) / full
                         : static_cast<float>(m.at<std::uint8_t>(v, u)) / full;
  return out;
}

void write_mask_png(const Bitmap& mask, const fs::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) m.at<std::uint8_t>(v, u) = mask.at(u, v) ? 255 : 0;
  ensure_written(cv::imwrite(path.string(), m), path);
}

Bitmap read_mask_png(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw FormatError("undecodable mask file " + path.string());
  Bitmap out(m.rows, m.cols);
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u) out.at(u, v) = m.at<std::uint8_t>(v, u) >= 128;
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("invalid base64 payload");
  // EVP_DecodeBlock keeps the padding bytes; strip them.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string landmarks_to_json(const LandmarkSet& landmarks) {
  json j;
  j["points"] = json::array();
  for (const auto& p : landmarks.points) j["points"].push_back({p.x, p.y});
  j["regions"] = json::object();
  for (const auto& [name, idx] : landmarks.region_index) j["regions"][name] = idx;
  return j.dump();
}

LandmarkSet landmarks_from_json(std::string_view text) {
  LandmarkSet out;
  try {
    const json j = json::parse(text);
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) throw FormatError("landmark point must be [x, y]");
      out.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    for (const auto& [name, idx] : j.at("regions").items())
      out.region_index[name] = idx.get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed landmark JSON: ") + e.what());
  }
  return out;
}

void write_landmarks(const LandmarkSet& landmarks, const fs::path& path) {
  write_text(path, landmarks_to_json(landmarks));
}

LandmarkSet read_landmarks(const fs::path& path) {
  return landmarks_from_json(read_text(path));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace fas::io
