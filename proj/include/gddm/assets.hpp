#pragma once

#include <filesystem>
#include <vector>

#include "gddm/field.hpp"
#include "gddm/rng.hpp"

namespace gddm {

/// Directory holding the bundled images. The GDDM_ASSET_DIR environment
/// variable overrides the location compiled into the library.
std::filesystem::path asset_dir();

/// Bundled 256x256 natural grayscale test image (8-bit PGM).
std::filesystem::path bundled_image_path();

/// One size x size image with two Gaussian blobs on a zero background,
/// values in [0, 1]. Blob centres, widths (1.5..3 px) and amplitudes
/// (0.4..0.8) are drawn from rng.
Field make_blob_image(std::size_t size, Rng& rng);
std::vector<Field> make_blob_dataset(std::size_t count, std::size_t size, Rng& rng);

/// Smooth seeded field: a sum of eight plane waves with random direction,
/// wavelength (8..64 px), phase and amplitude, plus an offset of 0.5.
Field make_smooth_field(std::size_t height, std::size_t width, Rng& rng);

}  // namespace gddm
