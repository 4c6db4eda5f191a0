// Slow extended-precision re-implementation of forward + loss. It shares none
// of the production forward code, so finite differences taken through it
// check both the adjoint formulas and the forward they differentiate.
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <new>
#include <vector>

#include "dublid/backprop.hpp"
#include "dublid/errors.hpp"

namespace dublid {

namespace {

using LD = long double;
using CL = std::complex<LD>;

struct LGrid {
  std::size_t h = 0, w = 0;
  std::vector<LD> d;
  LGrid(std::size_t hh, std::size_t ww) : h(hh), w(ww), d(hh * ww, 0.0L) {}
  LD& at(std::size_t r, std::size_t c) { return d[r * w + c]; }
  LD at(std::size_t r, std::size_t c) const { return d[r * w + c]; }
};

struct CGrid {
  std::size_t h = 0, w = 0;
  std::vector<CL> d;
  CGrid(std::size_t hh, std::size_t ww) : h(hh), w(ww), d(hh * ww) {}
};

LGrid widen(const RealGrid& g) {
  LGrid out(g.height, g.width);
  for (std::size_t k = 0; k < g.size(); ++k) out.d[k] = g.data[k];
  return out;
}

// Long double transforms through the extended-precision FFTW build.
class LongDft {
 public:
  LongDft(std::size_t h, std::size_t w) : h_(h), w_(w) {
    buf_ = static_cast<fftwl_complex*>(fftwl_malloc(sizeof(fftwl_complex) * h * w));
    if (!buf_) throw std::bad_alloc();
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int hh = static_cast<int>(h), ww = static_cast<int>(w);
    fwd_ = fftwl_plan_dft_2d(hh, ww, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftwl_plan_dft_2d(hh, ww, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~LongDft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftwl_destroy_plan(fwd_);
    fftwl_destroy_plan(inv_);
    fftwl_free(buf_);
  }
  LongDft(const LongDft&) = delete;
  LongDft& operator=(const LongDft&) = delete;

  CGrid forward(const LGrid& x) const {
    for (std::size_t k = 0; k < x.d.size(); ++k) {
      buf_[k][0] = x.d[k];
      buf_[k][1] = 0.0L;
    }
    fftwl_execute(fwd_);
    CGrid out(h_, w_);
    for (std::size_t k = 0; k < out.d.size(); ++k) out.d[k] = {buf_[k][0], buf_[k][1]};
    return out;
  }

  LGrid inverse(const CGrid& x) const {
    for (std::size_t k = 0; k < x.d.size(); ++k) {
      buf_[k][0] = x.d[k].real();
      buf_[k][1] = x.d[k].imag();
    }
    fftwl_execute(inv_);
    LGrid out(h_, w_);
    const LD scale = 1.0L / static_cast<LD>(h_ * w_);
    for (std::size_t k = 0; k < out.d.size(); ++k) out.d[k] = buf_[k][0] * scale;
    return out;
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t h_, w_;
  fftwl_complex* buf_ = nullptr;
  fftwl_plan fwd_ = nullptr, inv_ = nullptr;
};

std::size_t wrap_index(long v, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

// out(r, c) = sum_{a,b} f(a, b) x(r - a, c - b), circular.
LGrid conv3(const LGrid& x, const RealGrid& f) {
  LGrid out(x.h, x.w);
  for (std::size_t r = 0; r < x.h; ++r)
    for (std::size_t c = 0; c < x.w; ++c) {
      LD acc = 0.0L;
      for (std::size_t a = 0; a < f.height; ++a)
        for (std::size_t b = 0; b < f.width; ++b)
          acc += static_cast<LD>(f(a, b)) *
                 x.at(wrap_index(static_cast<long>(r) - static_cast<long>(a), x.h),
                      wrap_index(static_cast<long>(c) - static_cast<long>(b), x.w));
      out.at(r, c) = acc;
    }
  return out;
}

// Offsets covered by a centered support of extent n along one axis.
bool in_centered(std::size_t idx, std::size_t extent, std::size_t grid) {
  const long lo = -static_cast<long>((extent - 1) / 2);
  for (std::size_t t = 0; t < extent; ++t)
    if (wrap_index(lo + static_cast<long>(t), grid) == idx) return true;
  return false;
}

// Gaussian elimination with partial pivoting on a small dense system.
std::vector<CL> solve_dense(std::vector<std::vector<CL>> a, std::vector<CL> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) == 0.0L)
      throw IllPosedReconstruction("reference: singular reconstruction system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const CL f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<CL> x(n);
  for (std::size_t r = n; r-- > 0;) {
    CL acc = b[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

}  // namespace

ReferenceLoss reference_loss(const NetworkParams& params, const Image& y, const Image& x_true,
                      const BlurKernel& k_true, double kappa0, Shift2D tau) {
  validate(params);
  validate(y);
  const std::size_t L = params.layers, C = params.channels, P = params.planes;
  if (y.plane_count() != P || x_true.plane_count() != P)
    throw InvalidArgument("reference_loss: plane count mismatch");
  const std::size_t h = y.height(), w = y.width(), n = h * w;
  const auto& v = params.values;
  const LongDft dft(h, w);

  // Filtered observations, built spatially.
  std::vector<std::vector<LGrid>> ys(L);
  for (std::size_t l = L; l-- > 0;) {
    for (std::size_t i = 0; i < C; ++i) {
      LGrid acc(h, w);
      const std::size_t inputs = (l + 1 == L) ? P : C;
      for (std::size_t j = 0; j < inputs; ++j) {
        const LGrid src = (l + 1 == L) ? widen(y.planes[j]) : ys[l + 1][j];
        const LGrid part = conv3(src, v.w[l][i][j]);
        for (std::size_t k = 0; k < n; ++k) acc.d[k] += part.d[k];
      }
      ys[l].push_back(std::move(acc));
    }
  }

  LGrid k(h, w);
  k.at(0, 0) = 1.0L;
  std::vector<LGrid> z(C, LGrid(h, w));
  for (std::size_t l = 0; l < L; ++l) {
    const CGrid K = dft.forward(k);
    std::vector<CGrid> Ys, Zs;
    for (std::size_t i = 0; i < C; ++i) {
      const CGrid Y = dft.forward(ys[l][i]);
      const CGrid Z = dft.forward(z[i]);
      const LD zeta = v.zeta[l][i], b = v.b[l][i];
      CGrid G(h, w);
      for (std::size_t q = 0; q < n; ++q)
        G.d[q] = (zeta * std::conj(K.d[q]) * Y.d[q] + Z.d[q]) / (zeta * std::norm(K.d[q]) + 1.0L);
      const LGrid g = dft.inverse(G);
      for (std::size_t q = 0; q < n; ++q) {
        const LD gv = g.d[q];
        z[i].d[q] = gv > b ? gv - b : (gv < -b ? gv + b : 0.0L);
      }
      Ys.push_back(Y);
      Zs.push_back(dft.forward(z[i]));
    }
    CGrid Kw(h, w);
    for (std::size_t q = 0; q < n; ++q) {
      CL num{};
      LD den = params.epsilon;
      for (std::size_t i = 0; i < C; ++i) {
        num += std::conj(Zs[i].d[q]) * Ys[i].d[q];
        den += std::norm(Zs[i].d[q]);
      }
      Kw.d[q] = num / den;
    }
    const LGrid kw = dft.inverse(Kw);
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        if (in_centered(r, params.kernel_h, h) && in_centered(c, params.kernel_w, w))
          idx.push_back(r * w + c);
    LD top = -INFINITY;
    for (std::size_t q : idx) top = std::max(top, kw.d[q]);
    LD se = 0.0L;
    for (std::size_t q : idx) se += std::exp(kw.d[q] - top);
    const LD lse = top + std::log(se);
    const LD shift = static_cast<LD>(v.beta[l]) * lse;

    LGrid next(h, w);
    LD mass = 0.0L;
    for (std::size_t q : idx) {
      next.d[q] = std::max(kw.d[q] - shift, 0.0L);
      mass += next.d[q];
    }
    if (!(mass > 0.0L)) {
      for (std::size_t q : idx) {
        next.d[q] = std::max(kw.d[q], 0.0L);
        mass += next.d[q];
      }
      if (!(mass > 0.0L)) {
        next.at(0, 0) = 1.0L;
        mass = 1.0L;
      }
    }
    for (LD& t : next.d) t /= mass;
    k = std::move(next);
  }

  // Reconstruction from the final auxiliaries and last-layer filters.
  const CGrid K = dft.forward(k);
  std::vector<CGrid> Yp, G, F;  // F[i * P + c]
  for (std::size_t c = 0; c < P; ++c) Yp.push_back(dft.forward(widen(y.planes[c])));
  for (std::size_t i = 0; i < C; ++i) G.push_back(dft.forward(z[i]));
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t c = 0; c < P; ++c) {
      LGrid pad(h, w);
      const RealGrid& f = v.w[L - 1][i][c];
      for (std::size_t a = 0; a < f.height; ++a)
        for (std::size_t b = 0; b < f.width; ++b) pad.at(a, b) = f(a, b);
      F.push_back(dft.forward(pad));
    }
  std::vector<CGrid> X(P, CGrid(h, w));
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::vector<CL>> A(P, std::vector<CL>(P));
    std::vector<CL> rhs(P);
    for (std::size_t a = 0; a < P; ++a) {
      A[a][a] += std::norm(K.d[q]);
      rhs[a] = std::conj(K.d[q]) * Yp[a].d[q];
      for (std::size_t i = 0; i < C; ++i) {
        const LD eta = v.eta[i];
        rhs[a] += eta * std::conj(F[i * P + a].d[q]) * G[i].d[q];
        for (std::size_t b = 0; b < P; ++b)
          A[a][b] += eta * std::conj(F[i * P + a].d[q]) * F[i * P + b].d[q];
      }
    }
    const std::vector<CL> sol = solve_dense(std::move(A), std::move(rhs));
    for (std::size_t c = 0; c < P; ++c) X[c].d[q] = sol[c];
  }

  // Loss with the alignment held at tau.
  const LGrid kt = widen(k_true.to_grid(h, w));
  LD kmax = 0.0L;
  for (double t : k_true.taps.data) kmax = std::max<LD>(kmax, t);
  if (!(kmax > 0.0L)) throw InvalidArgument("reference_loss: true kernel has no positive tap");
  const LD kappa = static_cast<LD>(kappa0) / (kmax * kmax);
  LD ksq = 0.0L;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const LD d = k.at(r, c) - kt.at(wrap_index(static_cast<long>(r) - tau.dy, h),
                                       wrap_index(static_cast<long>(c) - tau.dx, w));
      ksq += d * d;
    }
  const LD kernel_term =
      0.5L * kappa * ksq / static_cast<LD>(params.kernel_h * params.kernel_w);

  LD xsq = 0.0L;
  for (std::size_t p = 0; p < P; ++p) {
    const LGrid xe = dft.inverse(X[p]);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const LD d = xe.at(r, c) - static_cast<LD>(x_true.planes[p](
                                       wrap_index(static_cast<long>(r) + tau.dy, h),
                                       wrap_index(static_cast<long>(c) + tau.dx, w)));
        xsq += d * d;
      }
  }
  const LD image_term = 0.5L * xsq / static_cast<LD>(P * n);
  return {kernel_term, image_term};
}

}  // namespace dublid
