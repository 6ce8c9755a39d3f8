#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "gddm/field.hpp"
#include "gddm/rng.hpp"

namespace gddm::test {

// Fresh scratch directory under GDDM_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("GDDM_TEST_TMP");
  const std::filesystem::path root =
      env != nullptr ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "gddm_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Field random_field(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed, double sigma = 1.0) {
  Rng rng(seed);
  return sample_gaussian(Shape{h, w, c}, sigma, rng);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace gddm::test
