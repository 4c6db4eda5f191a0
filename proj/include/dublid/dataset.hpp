#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dublid/hqs.hpp"
#include "dublid/image.hpp"
#include "dublid/trainer.hpp"

namespace dublid {

/// One manifest row.
struct DatasetEntry {
  std::string sample_id;
  std::string kernel_id;
  std::uint64_t seed = 0;
  double noise_std = 0.0;
};

/// On-disk layout:
///   kernels/<kernel_id>.dblt
///   sharp/<sample_id>.pgm|ppm
///   blurred/<sample_id>.pgm|ppm   8-bit preview
///   blurred/<sample_id>.dblt      exact observation, planes x H x W
///   manifest.csv                  sample_id,kernel_id,seed,noise_std
struct Dataset {
  std::vector<DatasetEntry> entries;
  std::vector<TrainSample> samples;  // parallel to entries
};

void save_kernel(const std::filesystem::path& path, const BlurKernel& k);
BlurKernel load_kernel(const std::filesystem::path& path);

/// Kernels in a directory of .dblt files, sorted by file name.
std::vector<std::pair<std::string, BlurKernel>> load_kernel_dir(const std::filesystem::path& dir);

void save_image_exact(const std::filesystem::path& path, const Image& img);
Image load_image_exact(const std::filesystem::path& path);

/// Writes a complete dataset directory (creating it).
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Reads a dataset; blurred observations come from the exact .dblt copies
/// when present, otherwise from the 8-bit images.
Dataset load_dataset(const std::filesystem::path& dir);

/// Builds `count` samples from procedural scenes of the given size, each
/// blurred by a kernel drawn (seeded) from `kernels`.
Dataset synthesize_dataset(const std::vector<std::pair<std::string, BlurKernel>>& kernels,
                           std::size_t count, std::size_t size, std::size_t planes,
                           double noise_std, std::uint64_t seed);

}  // namespace dublid
