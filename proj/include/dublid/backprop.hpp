#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dublid/grid.hpp"
#include "dublid/hqs.hpp"
#include "dublid/image.hpp"
#include "dublid/network.hpp"

namespace dublid {

/// Circular shift tau minimizing |a - T_tau b|^2, read off the peak of the
/// cross-correlation surface idft2(A conj(B)). Near-ties (within 1e-9 of the
/// peak, relative) go to the lexicographically smallest normalized (dy, dx).
Shift2D align_shift(const RealGrid& a, const RealGrid& b);

/// Mean of squared differences.
double mse(const RealGrid& a, const RealGrid& b);
double mse(const Image& a, const Image& b);

struct LossTerms {
  double kernel_term = 0.0;  // kappa/2 * MSE(k_est, T_tau k_true) over the support area
  double image_term = 0.0;   // 1/2 * MSE(x_est, T_-tau x_true)
  Shift2D tau;
  double kappa = 0.0;
  double total() const { return kernel_term + image_term; }
};

/// Seed gradients of the loss w.r.t. the network outputs.
struct LossAdjoints {
  std::vector<RealGrid> image;  // per plane
  RealGrid kernel_grid;         // on the image grid
};

struct LossEvaluation {
  LossTerms terms;
  LossAdjoints seeds;
};

/// Training loss with shift alignment. `k_est_grid` is the estimated kernel
/// embedded in the image grid; `support` is the estimate's support (its area
/// normalizes the kernel MSE). kappa = kappa0 / max|k_true|^2. When
/// `fixed_tau` is given the alignment search is skipped.
LossEvaluation evaluate_loss(const Image& x_est, const RealGrid& k_est_grid,
                             const Image& x_true, const BlurKernel& k_true,
                             const SupportMask& support, double kappa0,
                             const Shift2D* fixed_tau = nullptr);

/// Reverse pass through a forward tape. Throws InvalidArgument when tape and
/// parameters disagree in shape.
GradientSet backward(const ForwardTape& tape, const NetworkParams& params,
                     const LossAdjoints& seeds);

/// The eta and beta components of the gradient.
std::pair<std::vector<double>, std::vector<double>> grad_eta_beta(const ForwardTape& tape,
                                                                  const NetworkParams& params,
                                                                  const LossAdjoints& seeds);

/// Vector-Jacobian products of the individual pipeline stages. Spectral
/// arguments and results are DFTs of real grids.
namespace vjp {

struct GStep {
  ComplexGrid y_bar;
  ComplexGrid z_bar;
  ComplexGrid k_bar;
  double zeta_bar = 0.0;
};
/// Reverse of g_update_spectrum. `g_hat` is the forward output.
GStep g_step(const ComplexGrid& y_hat, const ComplexGrid& k_hat, const ComplexGrid& z_hat,
             const ComplexGrid& g_hat, double zeta, const ComplexGrid& g_bar);

struct Threshold {
  RealGrid g_bar;
  double b_bar = 0.0;
};
/// Reverse of z = S_b(g); the kink |g| = b contributes nothing.
Threshold soft_threshold(const RealGrid& g, double b, const RealGrid& z_bar);

struct Wiener {
  std::vector<ComplexGrid> y_bar;
  std::vector<ComplexGrid> z_bar;
};
/// Reverse of kernel_wiener_spectrum; `k_hat` is its output.
Wiener kernel_wiener(std::span<const ComplexGrid> z_hat, std::span<const ComplexGrid> y_hat,
                     const ComplexGrid& k_hat, double epsilon, const ComplexGrid& k_bar);

struct KernelPost {
  RealGrid k_wiener_bar;  // adjoint of the unprojected wiener solution
  double beta_bar = 0.0;
};
/// Reverse of threshold_and_normalize.
KernelPost kernel_threshold(const KernelStep& step, double beta, const SupportMask& support,
                            const RealGrid& k_bar);

struct Reconstruction {
  std::vector<ComplexGrid> g_bar;               // per channel
  ComplexGrid k_bar;
  std::vector<std::vector<ComplexGrid>> f_bar;  // [channel][plane], full-grid filter adjoints
  std::vector<double> eta_bar;
};
/// Reverse of reconstruct_spectrum given its solution `x_hat`.
Reconstruction reconstruction(std::span<const ComplexGrid> y_hat, const ComplexGrid& k_hat,
                              std::span<const ComplexGrid> g_hat,
                              const std::vector<std::vector<ComplexGrid>>& f_hat,
                              std::span<const double> eta, std::span<const ComplexGrid> x_hat,
                              std::span<const ComplexGrid> x_bar);

}  // namespace vjp

/// Per-group outcome of a finite-difference comparison.
struct GroupCheck {
  ParamGroup group;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink-adjacent
};

/// Outcome for one scalar, in for_each_scalar order.
struct ScalarCheck {
  ParamGroup group;
  double analytic = 0.0;
  double numeric = 0.0;  // NaN when skipped
  double rel_error = 0.0;
  bool skipped = false;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  std::vector<ScalarCheck> scalars;
  double max_rel_error() const;
  /// Every group had at least one eligible scalar and none exceeded `tol`.
  bool passed(double tol) const;
};

struct GradCheckOptions {
  double step = 1e-6;
  double kink_radius = 10.0;  // in units of `step`
  double abs_floor = 1e-8;
  double kappa0 = 1e5;
  /// A kink-adjacent scalar is retried with the step divided by 10 up to
  /// this many times before it is skipped.
  std::size_t refinements = 2;
};

/// Loss terms at `params` with the alignment held at `tau`, recomputed by a
/// slow extended-precision pipeline that shares no code with forward(). Used
/// by the finite-difference oracle. The terms are kept apart and unrounded:
/// the kernel term can dwarf the differences being measured.
struct ReferenceLoss {
  long double kernel_term = 0.0L;
  long double image_term = 0.0L;
  long double total() const { return kernel_term + image_term; }
};
ReferenceLoss reference_loss(const NetworkParams& params, const Image& y, const Image& x_true,
                             const BlurKernel& k_true, double kappa0, Shift2D tau);

/// Compares analytic gradients against central differences on every scalar.
/// A step h is usable when no soft-threshold, ReLU or kernel-fallback
/// decision differs between theta - r*h and theta + r*h; a scalar with no
/// usable step among the refinements is skipped.
GradCheckReport gradient_check(const NetworkParams& params, const Image& y, const Image& x_true,
                               const BlurKernel& k_true, const GradCheckOptions& opt = {});

struct GradCheckInstance {
  NetworkParams params;
  Image y;
  Image x_true;
  BlurKernel k_true;
};

/// Seeded random problem for gradient checks: parameters strictly inside
/// their constraints (beta small enough that several kernel taps survive),
/// a smooth random scene with fine texture, a random 7x7 kernel and a 9x9
/// estimate support.
GradCheckInstance make_gradcheck_instance(std::size_t layers, std::size_t channels,
                                          std::size_t size, std::size_t planes,
                                          std::uint64_t seed);

}  // namespace dublid
