#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dublid/grid.hpp"
#include "dublid/hqs.hpp"
#include "dublid/image.hpp"

namespace dublid {

/// A decibel figure. Infinite ratios are reported as `kDbCap` with `capped`
/// set.
struct Decibels {
  double value = 0.0;
  bool capped = false;
};

inline constexpr double kDbCap = 99.0;

/// 10 log10(1 / MSE), peak 1.
Decibels psnr(const Image& a, const Image& b);

/// 10 log10(|y - x|^2 / |x_est - x|^2).
Decibels isnr(const Image& x_est, const Image& y, const Image& x);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over window positions fully inside
/// the image. Colour images average their planes.
double ssim(const RealGrid& a, const RealGrid& b);
double ssim(const Image& a, const Image& b);

/// RMSE between kernels after embedding both (centred) in a common grid of
/// the larger extents and aligning them with the best circular shift.
double kernel_rmse(const BlurKernel& estimate, const BlurKernel& truth);

struct EvalRow {
  std::string id;
  double psnr_db = 0.0;
  double isnr_db = 0.0;
  double ssim = 0.0;
  double kernel_rmse = 0.0;
};

/// Scores one restoration. The estimate is first shifted by the offset that
/// best aligns its kernel with the true one (the blur model cannot tell a
/// shifted kernel and oppositely shifted image apart).
EvalRow evaluate_sample(const std::string& id, const Image& x_est, const BlurKernel& k_est,
                        const Image& y, const Image& x, const BlurKernel& k);

struct EvalReport {
  std::vector<EvalRow> rows;
  /// Column means, id "mean".
  EvalRow mean() const;
};

/// sample_id,psnr_db,isnr_db,ssim,kernel_rmse rows plus a trailing mean row.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace dublid
