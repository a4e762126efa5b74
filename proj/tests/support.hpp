#ifndef FAS_TESTS_SUPPORT_HPP_
#define FAS_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "fas/core.hpp"

namespace fas::testing {

inline Bitmap random_bitmap(std::mt19937_64& rng, int h, int w, double p = 0.5) {
  Bitmap b(h, w);
  std::bernoulli_distribution coin(p);
  for (auto& x : b.data) x = coin(rng) ? 1 : 0;
  return b;
}

inline FloatPlane random_plane(std::mt19937_64& rng, int h, int w, float lo = 0.0f,
                               float hi = 1.0f) {
  FloatPlane p(h, w);
  std::uniform_real_distribution<float> d(lo, hi);
  for (auto& x : p.data) x = d(rng);
  return p;
}

inline ColorImage random_image(std::mt19937_64& rng, int h, int w) {
  ColorImage img(h, w);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& x : img.data) x = static_cast<std::uint8_t>(d(rng));
  return img;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fas_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fas::testing

#endif  // FAS_TESTS_SUPPORT_HPP_
