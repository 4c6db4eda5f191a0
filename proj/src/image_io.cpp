#include "dublid/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>

#include "dublid/errors.hpp"
#include "dublid/tensor_io.hpp"

namespace dublid {

void validate(const Image& img) {
  if (img.planes.size() != 1 && img.planes.size() != 3)
    throw InvalidArgument("image must have 1 or 3 planes");
  const auto& first = img.planes.front();
  if (first.height == 0 || first.width == 0) throw InvalidArgument("image is empty");
  for (const auto& p : img.planes) {
    if (!p.same_shape(first)) throw InvalidArgument("image planes differ in size");
    require_finite(p, "image");
  }
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  std::size_t planes = 0;
  if (magic == "P5") planes = 1;
  else if (magic == "P6") planes = 3;
  else throw IoError(path.string(), "not a binary PGM/PPM file");

  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token(bytes, pos));
    height = std::stoul(next_token(bytes, pos));
    maxval = std::stoul(next_token(bytes, pos));
  } catch (const std::exception&) {
    throw IoError(path.string(), "malformed header");
  }
  if (maxval != 255) throw IoError(path.string(), "only maxval 255 is supported");
  if (width == 0 || height == 0) throw IoError(path.string(), "empty image");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = width * height * planes;
  if (bytes.size() < pos + need) throw IoError(path.string(), "truncated raster");

  Image img;
  img.planes.assign(planes, RealGrid(height, width));
  for (std::size_t i = 0; i < width * height; ++i)
    for (std::size_t c = 0; c < planes; ++c)
      img.planes[c].data[i] =
          static_cast<unsigned char>(bytes[pos + i * planes + c]) / 255.0;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  validate(img);
  const std::size_t planes = img.plane_count();
  std::ostringstream os;
  os << (planes == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::string raster(img.width() * img.height() * planes, '\0');
  for (std::size_t i = 0; i < img.width() * img.height(); ++i)
    for (std::size_t c = 0; c < planes; ++c) {
      const double v = std::clamp(img.planes[c].data[i], 0.0, 1.0);
      raster[i * planes + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  os << raster;
  write_file_atomic(path, os.str());
}

}  // namespace dublid
