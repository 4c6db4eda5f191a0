#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dublid/hqs.hpp"
#include "dublid/image.hpp"

namespace dublid {

/// Anti-aliased straight motion blur: a segment of `length` pixels through
/// the centre of a size x size grid, rasterized by bilinear splatting.
/// Angle 0 is horizontal; positive angles turn counter-clockwise.
BlurKernel linear_kernel(double angle, double length, std::size_t size);

/// n_angles angles i*pi/n_angles crossed with n_lengths lengths spread evenly
/// over [min_len, max_len]; angle-major order.
std::vector<BlurKernel> linear_kernels(std::size_t n_angles = 16, std::size_t n_lengths = 16,
                                       double min_len = 5.0, double max_len = 20.0,
                                       std::size_t size = 31);

using Point2 = std::array<double, 2>;  // {row, col} offsets from the kernel centre

struct Trajectory {
  std::vector<Point2> points;
  double scale = 1.0;
  double rotation = 0.0;  // radians
};

/// Catmull-Rom interpolation of the (scaled, rotated) trajectory, splatted
/// onto the grid with equal weight per sample. Mass falling outside the grid
/// is dropped; if none remains the result is a delta.
BlurKernel trajectory_kernel(const Trajectory& t, std::size_t size);

/// Momentum-damped random walk, re-centred on its centroid and normalized
/// so its largest excursion is 1.
Trajectory random_trajectory(std::uint64_t seed, std::size_t steps = 48);

/// `count` random walks, each rendered at 4 scales and 8 rotations
/// (count * 32 kernels, walk-major).
std::vector<BlurKernel> trajectory_kernels(std::size_t count, std::size_t size,
                                           std::uint64_t seed);

struct Sample {
  Image x;
  BlurKernel k;
  Image y;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

/// y = k * x + n with circular boundaries and seeded white Gaussian noise.
/// No clipping.
Sample synthesize(const Image& x, const BlurKernel& k, double noise_std, std::uint64_t seed);

/// Procedural piecewise-smooth test scene: shaded background plus random
/// rectangles and ellipses, intensities in [0.05, 0.95].
Image synthetic_scene(std::size_t height, std::size_t width, std::size_t planes,
                      std::uint64_t seed);

}  // namespace dublid
