#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dublid/grid.hpp"
#include "dublid/hqs.hpp"
#include "dublid/image.hpp"

namespace dublid {

/// Identifies which learnable a scalar belongs to.
enum class ParamGroup { W, B, Zeta, Beta, Eta };
const char* group_name(ParamGroup g);

/// Learnable values of the unrolled network. Layer index 0 is the first
/// iteration (largest effective filter); `w[l][i][j]` is a 3x3 filter from
/// input channel j to output channel i. The last layer maps image planes to
/// channels, every other layer maps channels to channels.
struct Learnables {
  std::vector<std::vector<std::vector<RealGrid>>> w;
  std::vector<std::vector<double>> b;     // [layer][channel]
  std::vector<std::vector<double>> zeta;  // [layer][channel]
  std::vector<double> beta;               // [layer]
  std::vector<double> eta;                // [channel]

  /// Same shapes, all values zero.
  Learnables zeros_like() const;
  std::size_t scalar_count() const;
  bool operator==(const Learnables&) const = default;
};

/// Visits every scalar in a fixed order: w (layer, out, in, row, col), b,
/// zeta, beta, eta.
void for_each_scalar(Learnables& v, const std::function<void(ParamGroup, double&)>& fn);
void for_each_scalar(const Learnables& v, const std::function<void(ParamGroup, double)>& fn);

using GradientSet = Learnables;

struct NetworkParams {
  std::size_t layers = 0;
  std::size_t channels = 0;
  std::size_t planes = 1;
  std::size_t kernel_h = 31;
  std::size_t kernel_w = 31;
  double epsilon = 1e-6;
  Learnables values;

  SupportMask k_support() const { return SupportMask::centered(kernel_h, kernel_w); }
  HqsHyper hyper(std::size_t layer) const;
  bool operator==(const NetworkParams&) const = default;
};

/// Throws InvalidArgument when shapes or constraints are violated.
void validate(const NetworkParams& p);

/// 9*C*planes + 9*C^2*(L-1).
std::size_t filter_weight_count(std::size_t layers, std::size_t channels, std::size_t planes);

/// Effective filters f[l][i][c] (top-left anchored, side 3 + 2(L-1-l)).
std::vector<std::vector<std::vector<RealGrid>>> effective_filters(const NetworkParams& p);

/// Filtered observations per layer, y[l][i], computed by successive 3x3
/// filtering from the last layer down.
std::vector<std::vector<RealGrid>> filter_pyramid(const Image& y, const NetworkParams& p);

/// Spectral form of filter_pyramid plus the filter spectra it used.
struct PyramidSpectra {
  std::vector<ComplexGrid> input_hat;                       // per plane
  std::vector<std::vector<std::vector<ComplexGrid>>> w_hat;  // padded 3x3 spectra
  std::vector<std::vector<ComplexGrid>> y_hat;              // [layer][channel]
};
PyramidSpectra filter_pyramid_spectra(const Image& y, const NetworkParams& p);

/// Everything the backward pass needs from a forward call.
struct ForwardTape {
  PyramidSpectra pyramid;
  LayerTape hqs;
  std::vector<ComplexGrid> x_hat;  // reconstruction spectra per plane
};

struct ForwardResult {
  Image image;
  BlurKernel kernel;
  RealGrid kernel_grid;  // kernel embedded in the image grid
  ForwardTape tape;
};

ForwardResult forward(const Image& y, const NetworkParams& p);

}  // namespace dublid
