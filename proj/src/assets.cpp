#include "gddm/assets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#ifndef GDDM_ASSET_DIR
#define GDDM_ASSET_DIR "assets"
#endif

namespace gddm {

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("GDDM_ASSET_DIR"); env != nullptr && *env != '\0') return env;
  return GDDM_ASSET_DIR;
}

std::filesystem::path bundled_image_path() { return asset_dir() / "camera256.pgm"; }

Field make_blob_image(std::size_t size, Rng& rng) {
  Field img(Shape{size, size, 1}, 0.0);
  const double lo = 2.0;
  const double hi = static_cast<double>(size) - 3.0;
  for (int k = 0; k < 2; ++k) {
    const double cu = lo + (hi - lo) * rng.uniform();
    const double cv = lo + (hi - lo) * rng.uniform();
    const double sigma = 1.5 + 1.5 * rng.uniform();
    const double amp = 0.4 + 0.4 * rng.uniform();
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t u = 0; u < size; ++u) {
      for (std::size_t v = 0; v < size; ++v) {
        const double du = static_cast<double>(u) - cu;
        const double dv = static_cast<double>(v) - cv;
        img(u, v) += amp * std::exp(-(du * du + dv * dv) * inv);
      }
    }
  }
  for (auto& v : img.data()) v = std::min(v, 1.0);
  return img;
}

std::vector<Field> make_blob_dataset(std::size_t count, std::size_t size, Rng& rng) {
  std::vector<Field> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_blob_image(size, rng));
  return out;
}

Field make_smooth_field(std::size_t height, std::size_t width, Rng& rng) {
  Field f(Shape{height, width, 1}, 0.5);
  for (int k = 0; k < 8; ++k) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double wavelength = 8.0 + 56.0 * rng.uniform();
    const double omega = 2.0 * std::numbers::pi / wavelength;
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double amp = 0.05 + 0.1 * rng.uniform();
    const double ku = omega * std::cos(theta);
    const double kv = omega * std::sin(theta);
    for (std::size_t u = 0; u < height; ++u) {
      for (std::size_t v = 0; v < width; ++v) {
        f(u, v) += amp * std::sin(ku * static_cast<double>(u) + kv * static_cast<double>(v) + phase);
      }
    }
  }
  return f;
}

}  // namespace gddm
