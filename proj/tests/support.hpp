#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dublid/grid.hpp"
#include "dublid/hqs.hpp"
#include "dublid/network.hpp"
#include "dublid/spectral.hpp"

namespace testing {

using dublid::RealGrid;

inline RealGrid random_grid(std::mt19937_64& rng, std::size_t h, std::size_t w,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealGrid g(h, w);
  for (double& v : g.data) v = u(rng);
  return g;
}

/// Random non-negative unit-sum kernel.
inline dublid::BlurKernel random_kernel(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  RealGrid t = random_grid(rng, h, w, 0.0, 1.0);
  const double s = dublid::sum(t);
  for (double& v : t.data) v /= s;
  return dublid::BlurKernel{t};
}

/// Spatial sum: out(r,c) = sum_{p,q} small(p,q) a(r-p, c-q), circular.
inline RealGrid brute_convolve(const RealGrid& a, const RealGrid& small) {
  RealGrid out(a.height, a.width);
  const long h = static_cast<long>(a.height), w = static_cast<long>(a.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::size_t p = 0; p < small.height; ++p)
        for (std::size_t q = 0; q < small.width; ++q) {
          const long rr = ((r - static_cast<long>(p)) % h + h) % h;
          const long cc = ((c - static_cast<long>(q)) % w + w) % w;
          acc += small(p, q) * a(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  return out;
}

inline double max_abs(const dublid::ComplexGrid& g) {
  double m = 0.0;
  for (const auto& v : g.data) m = std::max(m, std::abs(v));
  return m;
}

/// Circular convolution with an arbitrary full-grid operand, summing only
/// its non-zero taps. `adjoint` turns it into correlation.
inline RealGrid sparse_convolve(const RealGrid& a, const RealGrid& op, bool adjoint = false) {
  RealGrid out(a.height, a.width);
  const std::size_t h = a.height, w = a.width;
  for (std::size_t p = 0; p < h; ++p)
    for (std::size_t q = 0; q < w; ++q) {
      const double t = op(p, q);
      if (t == 0.0) continue;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          if (adjoint)
            out(r, c) += t * a((r + p) % h, (c + q) % w);
          else
            out((r + p) % h, (c + q) % w) += t * a(r, c);
        }
    }
  return out;
}

// Normal-equation residuals, per frequency bin, scaled by the largest
// right-hand side magnitude.

inline double g_residual(const RealGrid& y, const RealGrid& k_grid, const RealGrid& z, double zeta,
                         const RealGrid& g) {
  const auto Y = dublid::dft2(y), K = dublid::dft2(k_grid), Z = dublid::dft2(z),
             G = dublid::dft2(g);
  double worst = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < Y.size(); ++j) {
    const dublid::Complex rhs = zeta * std::conj(K.data[j]) * Y.data[j] + Z.data[j];
    const dublid::Complex lhs = (zeta * std::norm(K.data[j]) + 1.0) * G.data[j];
    worst = std::max(worst, std::abs(lhs - rhs));
    scale = std::max(scale, std::abs(rhs));
  }
  return worst / std::max(scale, 1e-300);
}

inline double wiener_residual(const std::vector<RealGrid>& z, const std::vector<RealGrid>& y,
                              double eps, const RealGrid& k) {
  const auto K = dublid::dft2(k);
  std::vector<dublid::ComplexGrid> Z, Y;
  for (std::size_t i = 0; i < z.size(); ++i) {
    Z.push_back(dublid::dft2(z[i]));
    Y.push_back(dublid::dft2(y[i]));
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < K.size(); ++j) {
    dublid::Complex rhs = 0.0;
    double den = eps;
    for (std::size_t i = 0; i < z.size(); ++i) {
      rhs += std::conj(Z[i].data[j]) * Y[i].data[j];
      den += std::norm(Z[i].data[j]);
    }
    worst = std::max(worst, std::abs(den * K.data[j] - rhs));
    scale = std::max(scale, std::abs(rhs));
  }
  return worst / std::max(scale, 1e-300);
}

/// Residual of C x = b with C = |K|^2 I + sum_i eta_i F_i^H F_i and
/// b_c = conj(K) Y_c + sum_i eta_i conj(F_ic) G_i; filters[i][c] are small
/// top-left anchored arrays.
inline double reconstruction_residual(const std::vector<RealGrid>& y, const RealGrid& k_grid,
                                      const std::vector<RealGrid>& g,
                                      const std::vector<std::vector<RealGrid>>& filters,
                                      const std::vector<double>& eta,
                                      const std::vector<RealGrid>& x) {
  const std::size_t h = k_grid.height, w = k_grid.width, planes = y.size();
  const auto K = dublid::dft2(k_grid);
  std::vector<dublid::ComplexGrid> Y, X, G;
  for (const auto& p : y) Y.push_back(dublid::dft2(p));
  for (const auto& p : x) X.push_back(dublid::dft2(p));
  for (const auto& p : g) G.push_back(dublid::dft2(p));
  std::vector<std::vector<dublid::ComplexGrid>> F;
  for (const auto& per : filters) {
    F.emplace_back();
    for (const auto& f : per) F.back().push_back(dublid::dft2(dublid::zero_pad(f, h, w)));
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < K.size(); ++j)
    for (std::size_t a = 0; a < planes; ++a) {
      dublid::Complex rhs = std::conj(K.data[j]) * Y[a].data[j];
      dublid::Complex lhs = std::norm(K.data[j]) * X[a].data[j];
      for (std::size_t i = 0; i < g.size(); ++i) {
        rhs += eta[i] * std::conj(F[i][a].data[j]) * G[i].data[j];
        for (std::size_t b = 0; b < planes; ++b)
          lhs += eta[i] * std::conj(F[i][a].data[j]) * F[i][b].data[j] * X[b].data[j];
      }
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max(scale, std::abs(rhs));
    }
  return worst / std::max(scale, 1e-300);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dublid_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
