#pragma once

#include <filesystem>

#include "gddm/field.hpp"

namespace gddm {

/// Reads an 8-bit binary PGM (P5, one channel) or PPM (P6, three channels)
/// and maps samples linearly to [0, 1]. Throws IoError on anything else.
Field read_pnm(const std::filesystem::path& path);

/// Writes a one- or three-channel field as P5/P6, clamping to [0, 1] and
/// rounding to the nearest 8-bit level.
void write_pnm(const std::filesystem::path& path, const Field& image);

/// Affinely rescales x to [0, 1] over its own min/max (channel-pooled);
/// constant fields map to 0.5. Used for visualizing signed domain fields.
Field normalize_for_display(const Field& x);

/// Raw dump: "GDLF", u32 height, u32 width, u32 channels (little endian),
/// followed by the data as little-endian float64.
void write_raw_field(const std::filesystem::path& path, const Field& x);
Field read_raw_field(const std::filesystem::path& path);

/// Raw little-endian float64 array without a header.
void write_f64_le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_le(const std::filesystem::path& path);

}  // namespace gddm
