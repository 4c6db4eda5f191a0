#pragma once

#include <filesystem>
#include <vector>

#include "dublid/grid.hpp"

namespace dublid {

/// One (gray) or three (RGB) planes of equal size, intensities nominally in [0,1].
struct Image {
  std::vector<RealGrid> planes;

  Image() = default;
  explicit Image(RealGrid gray) { planes.push_back(std::move(gray)); }
  explicit Image(std::vector<RealGrid> p) : planes(std::move(p)) {}

  std::size_t plane_count() const noexcept { return planes.size(); }
  std::size_t height() const { return planes.empty() ? 0 : planes.front().height; }
  std::size_t width() const { return planes.empty() ? 0 : planes.front().width; }
  bool operator==(const Image&) const = default;
};

/// Throws InvalidArgument unless the image has 1 or 3 non-empty planes of
/// equal size with finite samples.
void validate(const Image& img);

/// Binary PGM (P5) or PPM (P6), maxval 255; samples are divided by 255.
Image read_pnm(const std::filesystem::path& path);
/// Writes P5 for one plane, P6 for three. Samples are clamped to [0,1] and
/// rounded to 8 bits. The write is atomic.
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace dublid
