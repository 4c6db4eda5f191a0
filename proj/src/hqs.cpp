#include "dublid/hqs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dublid/errors.hpp"
#include "dublid/spectral.hpp"

namespace dublid {

BlurKernel BlurKernel::delta(std::size_t h, std::size_t w) {
  BlurKernel k{RealGrid(h, w)};
  k.taps((h - 1) / 2, (w - 1) / 2) = 1.0;
  return k;
}

BlurKernel BlurKernel::from_grid(const RealGrid& grid, const SupportMask& support) {
  return BlurKernel{extract(grid, support)};
}

RealGrid BlurKernel::to_grid(std::size_t height, std::size_t width) const {
  return embed(taps, support(), height, width);
}

void validate(const HqsHyper& h, std::size_t channels) {
  if (h.zeta.size() != channels || h.b.size() != channels)
    throw InvalidArgument("hqs hyper: channel count mismatch");
  for (double z : h.zeta)
    if (!(z > 0.0)) throw InvalidArgument("hqs hyper: zeta must be positive");
  for (double b : h.b)
    if (!(b >= 0.0)) throw InvalidArgument("hqs hyper: b must be non-negative");
  if (!(h.beta >= 0.0)) throw InvalidArgument("hqs hyper: beta must be non-negative");
  if (!(h.epsilon > 0.0)) throw InvalidArgument("hqs hyper: epsilon must be positive");
}

ComplexGrid g_update_spectrum(const ComplexGrid& y_hat, const ComplexGrid& k_hat,
                              const ComplexGrid& z_hat, double zeta) {
  if (!(zeta > 0.0)) throw InvalidArgument("g_update: zeta must be positive");
  if (!y_hat.same_shape(k_hat) || !y_hat.same_shape(z_hat))
    throw InvalidArgument("g_update: shape mismatch");
  ComplexGrid out(y_hat.height, y_hat.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Complex k = k_hat.data[i];
    out.data[i] = (zeta * std::conj(k) * y_hat.data[i] + z_hat.data[i]) / (zeta * std::norm(k) + 1.0);
  }
  return out;
}

RealGrid g_update(const RealGrid& y_i, const RealGrid& k_grid, const RealGrid& z_i, double zeta) {
  if (!y_i.same_shape(k_grid) || !y_i.same_shape(z_i))
    throw InvalidArgument("g_update: shape mismatch");
  return idft2(g_update_spectrum(dft2(y_i), dft2(k_grid), dft2(z_i), zeta));
}

ComplexGrid kernel_wiener_spectrum(std::span<const ComplexGrid> z_hat,
                                   std::span<const ComplexGrid> y_hat, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("k_update: epsilon must be positive");
  if (z_hat.empty() || z_hat.size() != y_hat.size())
    throw InvalidArgument("k_update: channel count mismatch");
  const std::size_t h = z_hat[0].height, w = z_hat[0].width;
  ComplexGrid num(h, w);
  RealGrid den(h, w, epsilon);
  for (std::size_t c = 0; c < z_hat.size(); ++c) {
    if (!z_hat[c].same_shape(num) || !y_hat[c].same_shape(num))
      throw InvalidArgument("k_update: shape mismatch");
    for (std::size_t i = 0; i < num.size(); ++i) {
      num.data[i] += std::conj(z_hat[c].data[i]) * y_hat[c].data[i];
      den.data[i] += std::norm(z_hat[c].data[i]);
    }
  }
  for (std::size_t i = 0; i < num.size(); ++i) num.data[i] /= den.data[i];
  return num;
}

RealGrid kernel_wiener_step(std::span<const RealGrid> z, std::span<const RealGrid> y,
                            double epsilon) {
  std::vector<ComplexGrid> zh, yh;
  for (const auto& g : z) zh.push_back(dft2(g));
  for (const auto& g : y) yh.push_back(dft2(g));
  return idft2(kernel_wiener_spectrum(zh, yh, epsilon));
}

KernelStep threshold_and_normalize(const RealGrid& k_wiener, double beta,
                                   const SupportMask& support, bool allow_fallback) {
  if (!(beta >= 0.0)) throw InvalidArgument("k_update: beta must be non-negative");
  KernelStep step;
  step.k_third = project(k_wiener, support);
  const RealGrid taps = extract(step.k_third, support);
  step.lse = log_sum_exp(taps.data);

  step.k_two_thirds = RealGrid(k_wiener.height, k_wiener.width);
  const double shift = beta * step.lse;
  for (std::size_t r = 0; r < k_wiener.height; ++r)
    for (std::size_t c = 0; c < k_wiener.width; ++c)
      if (support.contains(r, c, k_wiener.height, k_wiener.width))
        step.k_two_thirds(r, c) = relu(step.k_third(r, c) - shift);

  RealGrid kept = step.k_two_thirds;
  step.mass = sum(kept);
  if (!(step.mass > 0.0)) {
    if (!allow_fallback)
      throw DegenerateKernel("k_update: kernel vanished after thresholding");
    step.path = KernelPath::Relu;
    for (std::size_t i = 0; i < kept.size(); ++i) kept.data[i] = relu(step.k_third.data[i]);
    step.mass = sum(kept);
    if (!(step.mass > 0.0)) {
      step.path = KernelPath::Delta;
      step.mass = 1.0;
      kept = RealGrid(k_wiener.height, k_wiener.width);
      kept(0, 0) = 1.0;
    }
  }
  step.k = std::move(kept);
  for (double& v : step.k.data) v /= step.mass;
  return step;
}

BlurKernel k_update(std::span<const RealGrid> z, std::span<const RealGrid> y, double epsilon,
                    double beta, const SupportMask& support) {
  const RealGrid kw = kernel_wiener_step(z, y, epsilon);
  return BlurKernel::from_grid(threshold_and_normalize(kw, beta, support, false).k, support);
}

LayerTape run_layers(const std::vector<std::vector<ComplexGrid>>& y_hat,
                     std::span<const HqsHyper> hyper, const SupportMask& support,
                     bool allow_fallback) {
  if (y_hat.empty()) throw InvalidArgument("hqs: need at least one layer");
  if (hyper.size() != y_hat.size()) throw InvalidArgument("hqs: one hyper set per layer");
  const std::size_t channels = y_hat[0].size();
  if (channels == 0) throw InvalidArgument("hqs: need at least one channel");
  const std::size_t h = y_hat[0][0].height, w = y_hat[0][0].width;
  if (support.height > h || support.width > w)
    throw InvalidArgument("hqs: kernel support larger than image");

  LayerTape tape;
  tape.support = support;
  RealGrid k(h, w);
  k(0, 0) = 1.0;
  std::vector<RealGrid> z(channels, RealGrid(h, w));
  std::vector<ComplexGrid> z_hat(channels, ComplexGrid(h, w));

  for (std::size_t l = 0; l < y_hat.size(); ++l) {
    const HqsHyper& hp = hyper[l];
    validate(hp, channels);
    if (y_hat[l].size() != channels) throw InvalidArgument("hqs: channel count varies by layer");
    LayerRecord rec;
    rec.y_hat = y_hat[l];
    rec.k_in = k;
    rec.k_in_hat = dft2(k);
    rec.z_in = z;
    rec.z_in_hat = z_hat;
    for (std::size_t i = 0; i < channels; ++i) {
      RealGrid g = idft2(g_update_spectrum(y_hat[l][i], rec.k_in_hat, z_hat[i], hp.zeta[i]));
      z[i] = soft_threshold(g, hp.b[i]);
      z_hat[i] = dft2(z[i]);
      rec.g.push_back(std::move(g));
    }
    rec.z = z;
    rec.z_hat = z_hat;
    rec.k_wiener_hat = kernel_wiener_spectrum(z_hat, y_hat[l], hp.epsilon);
    rec.kernel = threshold_and_normalize(idft2(rec.k_wiener_hat), hp.beta, support, allow_fallback);
    k = rec.kernel.k;
    tape.layers.push_back(std::move(rec));
  }
  return tape;
}

HqsResult run_hqs(const Image& y, const std::vector<std::vector<std::vector<RealGrid>>>& filters,
                  std::span<const HqsHyper> hyper, const SupportMask& support) {
  validate(y);
  if (filters.size() != hyper.size()) throw InvalidArgument("hqs: one filter bank per layer");
  std::vector<ComplexGrid> plane_hat;
  for (const auto& p : y.planes) plane_hat.push_back(dft2(p));
  std::vector<std::vector<ComplexGrid>> y_hat(filters.size());
  for (std::size_t l = 0; l < filters.size(); ++l) {
    for (const auto& per_plane : filters[l]) {
      if (per_plane.size() != y.plane_count())
        throw InvalidArgument("hqs: filter plane count does not match image");
      ComplexGrid acc(y.height(), y.width());
      for (std::size_t c = 0; c < per_plane.size(); ++c) {
        const ComplexGrid fh = padded_spectrum(per_plane[c], y.height(), y.width());
        for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += fh.data[i] * plane_hat[c].data[i];
      }
      y_hat[l].push_back(std::move(acc));
    }
  }
  HqsResult res;
  res.tape = run_layers(y_hat, hyper, support);
  const LayerRecord& last = res.tape.layers.back();
  res.kernel = BlurKernel::from_grid(last.kernel.k, support);
  res.features = last.z;
  return res;
}

double penalty_value(std::span<const RealGrid> y, const RealGrid& k_grid,
                     std::span<const RealGrid> g, std::span<const RealGrid> z,
                     const HqsHyper& hyper) {
  validate(hyper, y.size());
  if (g.size() != y.size() || z.size() != y.size())
    throw InvalidArgument("penalty: channel count mismatch");
  const ComplexGrid k_hat = dft2(k_grid);
  double total = 0.5 * hyper.epsilon * squared_norm(k_grid);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ComplexGrid kg = dft2(g[i]);
    for (std::size_t j = 0; j < kg.size(); ++j) kg.data[j] *= k_hat.data[j];
    const RealGrid blurred = idft2(kg);
    double fit = 0.0, l1 = 0.0, split = 0.0;
    for (std::size_t j = 0; j < blurred.size(); ++j) {
      const double r = y[i].data[j] - blurred.data[j];
      fit += r * r;
      l1 += std::abs(z[i].data[j]);
      const double d = g[i].data[j] - z[i].data[j];
      split += d * d;
    }
    total += 0.5 * fit + (hyper.b[i] / hyper.zeta[i]) * l1 + split / (2.0 * hyper.zeta[i]);
  }
  return total;
}

namespace {

// Solves the per-frequency normal system of the reconstruction for an
// arbitrary right-hand side. `rhs` holds one spectrum per image plane.
std::vector<ComplexGrid> solve_system(const ComplexGrid& k_hat,
                                      const std::vector<std::vector<ComplexGrid>>& f_hat,
                                      std::span<const double> eta,
                                      const std::vector<ComplexGrid>& rhs) {
  const std::size_t planes = rhs.size();
  const std::size_t n = k_hat.size();
  std::vector<ComplexGrid> x(planes, ComplexGrid(k_hat.height, k_hat.width));
  if (planes == 1) {
    for (std::size_t j = 0; j < n; ++j) {
      double den = std::norm(k_hat.data[j]);
      for (std::size_t i = 0; i < f_hat.size(); ++i) den += eta[i] * std::norm(f_hat[i][0].data[j]);
      if (!(den > 1e-300))
        throw IllPosedReconstruction("reconstruct: zero denominator at bin " + std::to_string(j));
      x[0].data[j] = rhs[0].data[j] / den;
    }
    return x;
  }
  if (planes != 3) throw InvalidArgument("reconstruct: only 1 or 3 planes are supported");
  for (std::size_t j = 0; j < n; ++j) {
    // c[a][b] = sum_i eta_i conj(W_ia) W_ib + |K|^2 delta_ab
    Complex c[3][3] = {};
    for (std::size_t i = 0; i < f_hat.size(); ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          c[a][b] += eta[i] * std::conj(f_hat[i][a].data[j]) * f_hat[i][b].data[j];
    const double kk = std::norm(k_hat.data[j]);
    for (int a = 0; a < 3; ++a) c[a][a] += kk;
    // Gaussian elimination with partial pivoting. The cofactor form of the
    // same solution loses accuracy when |K| is small relative to the filters.
    Complex rhs_j[3] = {rhs[0].data[j], rhs[1].data[j], rhs[2].data[j]};
    Complex det = 1.0;
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(c[r][col]) > std::abs(c[piv][col])) piv = r;
      if (piv != col) {
        std::swap(c[piv], c[col]);
        std::swap(rhs_j[piv], rhs_j[col]);
        det = -det;
      }
      det *= c[col][col];
      if (!(std::abs(c[col][col]) > 0.0)) break;
      for (int r = col + 1; r < 3; ++r) {
        const Complex f = c[r][col] / c[col][col];
        for (int k = col; k < 3; ++k) c[r][k] -= f * c[col][k];
        rhs_j[r] -= f * rhs_j[col];
      }
    }
    if (!(std::abs(det) > 1e-300))
      throw IllPosedReconstruction("reconstruct: singular 3x3 system at bin " + std::to_string(j));
    for (int r = 2; r >= 0; --r) {
      Complex v = rhs_j[r];
      for (int k = r + 1; k < 3; ++k) v -= c[r][k] * x[k].data[j];
      x[r].data[j] = v / c[r][r];
    }
  }
  return x;
}

}  // namespace

std::vector<ComplexGrid> solve_reconstruction_system(
    const ComplexGrid& k_hat, const std::vector<std::vector<ComplexGrid>>& f_hat,
    std::span<const double> eta, const std::vector<ComplexGrid>& rhs) {
  return solve_system(k_hat, f_hat, eta, rhs);
}

std::vector<ComplexGrid> reconstruct_spectrum(std::span<const ComplexGrid> y_hat,
                                              const ComplexGrid& k_hat,
                                              std::span<const ComplexGrid> g_hat,
                                              const std::vector<std::vector<ComplexGrid>>& f_hat,
                                              std::span<const double> eta) {
  const std::size_t planes = y_hat.size();
  if (f_hat.size() != g_hat.size() || eta.size() != g_hat.size())
    throw InvalidArgument("reconstruct: channel count mismatch");
  for (double e : eta)
    if (!(e > 0.0)) throw InvalidArgument("reconstruct: eta must be positive");
  for (const auto& per_plane : f_hat)
    if (per_plane.size() != planes) throw InvalidArgument("reconstruct: filter plane mismatch");
  std::vector<ComplexGrid> rhs(planes, ComplexGrid(k_hat.height, k_hat.width));
  for (std::size_t c = 0; c < planes; ++c)
    for (std::size_t j = 0; j < k_hat.size(); ++j) {
      Complex v = std::conj(k_hat.data[j]) * y_hat[c].data[j];
      for (std::size_t i = 0; i < g_hat.size(); ++i)
        v += eta[i] * std::conj(f_hat[i][c].data[j]) * g_hat[i].data[j];
      rhs[c].data[j] = v;
    }
  return solve_system(k_hat, f_hat, eta, rhs);
}

RealGrid reconstruct_gray(const RealGrid& y, const RealGrid& k_grid, std::span<const RealGrid> g,
                          std::span<const RealGrid> filters, std::span<const double> eta) {
  if (!y.same_shape(k_grid)) throw InvalidArgument("reconstruct: kernel grid mismatch");
  const ComplexGrid y_hat = dft2(y);
  std::vector<ComplexGrid> g_hat;
  std::vector<std::vector<ComplexGrid>> f_hat;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g_hat.push_back(dft2(g[i]));
    f_hat.push_back({padded_spectrum(filters[i], y.height, y.width)});
  }
  if (filters.size() != g.size()) throw InvalidArgument("reconstruct: filter count mismatch");
  return idft2(reconstruct_spectrum(std::span(&y_hat, 1), dft2(k_grid), g_hat, f_hat, eta)[0]);
}

std::vector<RealGrid> reconstruct_color(std::span<const RealGrid> y_rgb, const RealGrid& k_grid,
                                        std::span<const RealGrid> g,
                                        const std::vector<std::vector<RealGrid>>& filters,
                                        std::span<const double> eta) {
  if (y_rgb.size() != 3) throw InvalidArgument("reconstruct_color: need three planes");
  if (filters.size() != g.size()) throw InvalidArgument("reconstruct: filter count mismatch");
  const std::size_t h = k_grid.height, w = k_grid.width;
  std::vector<ComplexGrid> y_hat, g_hat;
  for (const auto& p : y_rgb) y_hat.push_back(dft2(p));
  for (const auto& p : g) g_hat.push_back(dft2(p));
  std::vector<std::vector<ComplexGrid>> f_hat;
  for (const auto& per_plane : filters) {
    std::vector<ComplexGrid> row;
    for (const auto& f : per_plane) row.push_back(padded_spectrum(f, h, w));
    f_hat.push_back(std::move(row));
  }
  std::vector<RealGrid> out;
  for (const auto& x : reconstruct_spectrum(y_hat, dft2(k_grid), g_hat, f_hat, eta))
    out.push_back(idft2(x));
  return out;
}

}  // namespace dublid
