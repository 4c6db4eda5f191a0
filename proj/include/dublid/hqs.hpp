#pragma once

#include <span>
#include <vector>

#include "dublid/grid.hpp"
#include "dublid/image.hpp"

namespace dublid {

/// Small non-negative unit-sum blur kernel. The centre tap ((h-1)/2, (w-1)/2)
/// sits on the grid origin when embedded into an image grid.
struct BlurKernel {
  RealGrid taps;

  static BlurKernel delta(std::size_t h, std::size_t w);
  static BlurKernel from_grid(const RealGrid& grid, const SupportMask& support);
  SupportMask support() const { return SupportMask::centered(taps.height, taps.width); }
  RealGrid to_grid(std::size_t height, std::size_t width) const;
  bool operator==(const BlurKernel&) const = default;
};

/// Hyperparameters of one HQS iteration.
struct HqsHyper {
  std::vector<double> zeta;  // per feature channel, > 0
  std::vector<double> b;     // per channel soft threshold, >= 0
  double beta = 0.0;         // kernel threshold scale
  double epsilon = 1e-6;     // kernel ridge
};

void validate(const HqsHyper& h, std::size_t channels);

/// Which branch produced the normalized kernel of a k-update.
enum class KernelPath {
  Thresholded,  // [k - beta*LSE]_+ had positive mass
  Relu,         // fallback: [k]_+ normalized
  Delta,        // fallback: nothing positive survived
};

/// g-update in the spectral domain:
/// (zeta conj(K) Y + Z) / (zeta |K|^2 + 1).
ComplexGrid g_update_spectrum(const ComplexGrid& y_hat, const ComplexGrid& k_hat,
                              const ComplexGrid& z_hat, double zeta);
RealGrid g_update(const RealGrid& y_i, const RealGrid& k_grid, const RealGrid& z_i,
                  double zeta);

/// Unconstrained kernel solve sum conj(Z_i) Y_i / (sum |Z_i|^2 + eps), in the
/// spectral domain.
ComplexGrid kernel_wiener_spectrum(std::span<const ComplexGrid> z_hat,
                                   std::span<const ComplexGrid> y_hat, double epsilon);
RealGrid kernel_wiener_step(std::span<const RealGrid> z, std::span<const RealGrid> y,
                            double epsilon);

struct KernelStep {
  RealGrid k_third;       // wiener solution restricted to the support
  RealGrid k_two_thirds;  // after [. - beta*LSE]_+
  RealGrid k;             // normalized
  double lse = 0.0;
  double mass = 0.0;  // l1 mass that was normalized away
  KernelPath path = KernelPath::Thresholded;
};

/// Support projection, LSE thresholding and normalization applied to a
/// wiener solution. With `allow_fallback` false a vanished kernel raises
/// DegenerateKernel; otherwise [k]_+ and then delta are tried in turn.
KernelStep threshold_and_normalize(const RealGrid& k_wiener, double beta,
                                   const SupportMask& support, bool allow_fallback);

/// Full kernel update. Throws DegenerateKernel when thresholding removes all mass.
BlurKernel k_update(std::span<const RealGrid> z, std::span<const RealGrid> y, double epsilon,
                    double beta, const SupportMask& support);

/// Intermediates of one unrolled iteration, kept for the backward pass.
struct LayerRecord {
  std::vector<ComplexGrid> y_hat;     // filtered observations, layer input
  RealGrid k_in;                      // kernel entering the layer
  ComplexGrid k_in_hat;
  std::vector<RealGrid> z_in;         // auxiliaries entering the layer
  std::vector<ComplexGrid> z_in_hat;
  std::vector<RealGrid> g;            // g-update output
  std::vector<RealGrid> z;            // soft-thresholded g
  std::vector<ComplexGrid> z_hat;
  ComplexGrid k_wiener_hat;           // spectrum of the unconstrained kernel solve
  KernelStep kernel;
};

struct LayerTape {
  SupportMask support;
  std::vector<LayerRecord> layers;
};

/// Runs the unrolled iterations on precomputed filtered observations.
/// `y_hat[l][i]` is the spectrum of channel i at layer l.
LayerTape run_layers(const std::vector<std::vector<ComplexGrid>>& y_hat,
                     std::span<const HqsHyper> hyper, const SupportMask& support,
                     bool allow_fallback = true);

struct HqsResult {
  BlurKernel kernel;
  std::vector<RealGrid> features;  // z after the last iteration
  LayerTape tape;
};

/// Classic alternating solver. `filters[l][i][c]` is the effective filter of
/// layer l, channel i, input plane c (top-left anchored small arrays).
HqsResult run_hqs(const Image& y, const std::vector<std::vector<std::vector<RealGrid>>>& filters,
                  std::span<const HqsHyper> hyper, const SupportMask& support);

/// Penalty objective of one iteration, with lambda_i = b_i / zeta_i:
/// sum_i 1/2|y_i - k*g_i|^2 + lambda_i |z_i|_1 + 1/(2 zeta_i)|g_i - z_i|^2 + eps/2 |k|^2.
double penalty_value(std::span<const RealGrid> y, const RealGrid& k_grid,
                     std::span<const RealGrid> g, std::span<const RealGrid> z,
                     const HqsHyper& hyper);

/// Closed-form image estimate for one plane:
/// (conj(K) Y + sum eta_i conj(F_i) G_i) / (|K|^2 + sum eta_i |F_i|^2).
RealGrid reconstruct_gray(const RealGrid& y, const RealGrid& k_grid,
                          std::span<const RealGrid> g, std::span<const RealGrid> filters,
                          std::span<const double> eta);

/// Three-plane closed form via the 3x3 Hermitian system per frequency.
/// `filters[i][c]` is the last-layer filter of channel i for plane c.
std::vector<RealGrid> reconstruct_color(std::span<const RealGrid> y_rgb, const RealGrid& k_grid,
                                        std::span<const RealGrid> g,
                                        const std::vector<std::vector<RealGrid>>& filters,
                                        std::span<const double> eta);

/// Spectral form shared by both reconstructions and the backward pass.
/// `f_hat[i][c]`: filter spectra; returns the per-plane solution spectra.
std::vector<ComplexGrid> reconstruct_spectrum(std::span<const ComplexGrid> y_hat,
                                              const ComplexGrid& k_hat,
                                              std::span<const ComplexGrid> g_hat,
                                              const std::vector<std::vector<ComplexGrid>>& f_hat,
                                              std::span<const double> eta);

/// Solves the reconstruction normal system C x = rhs per frequency, where
/// C = |K|^2 I + sum_i eta_i F_i^H F_i. Used for adjoints as well.
std::vector<ComplexGrid> solve_reconstruction_system(
    const ComplexGrid& k_hat, const std::vector<std::vector<ComplexGrid>>& f_hat,
    std::span<const double> eta, const std::vector<ComplexGrid>& rhs);

}  // namespace dublid
