#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "edffd/image.hpp"

namespace edffd::io {

/// Loads an 8-bit PNG or binary PGM/PPM (P5/P6). Values are divided by the
/// file's maximum so the result lies in [0,1]. Throws Error(Io) on failure.
ImageBuffer read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img);

/// Picks PNG or PGM/PPM from the extension (.pgm/.ppm/.pnm -> PNM).
std::vector<std::uint8_t> encode_for_path(const ImageBuffer& img, const std::filesystem::path& path);

ImageBuffer mask_to_image(const Mask& mask);

/// Writes bytes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_image(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace edffd::io
