#include "dublid/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "dublid/errors.hpp"

namespace dublid {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plans] : plans_) {
      fftw_destroy_plan(plans.first);
      fftw_destroy_plan(plans.second);
    }
  }

  std::pair<fftw_plan, fftw_plan> get(std::size_t h, std::size_t w) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find({h, w});
    if (it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(h * w);
    auto* out = fftw_alloc_complex(h * w);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan fwd = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in, out,
                                     FFTW_FORWARD, flags);
    fftw_plan inv = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in, out,
                                     FFTW_BACKWARD, flags);
    fftw_free(in);
    fftw_free(out);
    return plans_.emplace(std::make_pair(h, w), std::make_pair(fwd, inv)).first->second;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, std::size_t>, std::pair<fftw_plan, fftw_plan>> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void transform(const ComplexGrid& in, ComplexGrid& out, bool forward) {
  auto [fwd, inv] = plan_cache().get(in.height, in.width);
  // fftw_execute_dft does not write to its input for out-of-place c2c plans.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data.data());
  fftw_execute_dft(forward ? fwd : inv, src, dst);
}

void check_dims(std::size_t h, std::size_t w, const char* what) {
  if (h == 0 || w == 0) throw InvalidArgument(std::string(what) + ": empty grid");
}

void check_finite(const ComplexGrid& g, const char* what) {
  for (const Complex& v : g.data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericalError(std::string(what) + ": non-finite sample");
}

}  // namespace

ComplexGrid dft2(const ComplexGrid& g, DftNorm norm) {
  check_dims(g.height, g.width, "dft2");
  check_finite(g, "dft2");
  ComplexGrid out(g.height, g.width);
  transform(g, out, true);
  if (norm == DftNorm::Ortho) {
    const double s = 1.0 / std::sqrt(static_cast<double>(g.size()));
    for (auto& v : out.data) v *= s;
  }
  return out;
}

ComplexGrid dft2(const RealGrid& g, DftNorm norm) {
  check_dims(g.height, g.width, "dft2");
  require_finite(g, "dft2");
  ComplexGrid in(g.height, g.width);
  for (std::size_t i = 0; i < g.size(); ++i) in.data[i] = g.data[i];
  return dft2(in, norm);
}

ComplexGrid idft2_complex(const ComplexGrid& spectrum, DftNorm norm) {
  check_dims(spectrum.height, spectrum.width, "idft2");
  check_finite(spectrum, "idft2");
  ComplexGrid out(spectrum.height, spectrum.width);
  transform(spectrum, out, false);
  const double n = static_cast<double>(spectrum.size());
  const double s = norm == DftNorm::Ortho ? 1.0 / std::sqrt(n) : 1.0 / n;
  for (auto& v : out.data) v *= s;
  return out;
}

RealGrid idft2(const ComplexGrid& spectrum, double* max_imag, DftNorm norm) {
  const ComplexGrid full = idft2_complex(spectrum, norm);
  RealGrid out(full.height, full.width);
  double imag = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    out.data[i] = full.data[i].real();
    imag = std::max(imag, std::abs(full.data[i].imag()));
  }
  if (max_imag) *max_imag = imag;
  return out;
}

ComplexGrid padded_spectrum(const RealGrid& small, std::size_t h, std::size_t w) {
  return dft2(zero_pad(small, h, w));
}

RealGrid circular_convolve(const RealGrid& a, const RealGrid& small) {
  if (small.height > a.height || small.width > a.width)
    throw InvalidArgument("circular_convolve: kernel larger than grid");
  ComplexGrid fa = dft2(a);
  const ComplexGrid fb = padded_spectrum(small, a.height, a.width);
  for (std::size_t i = 0; i < fa.size(); ++i) fa.data[i] *= fb.data[i];
  return idft2(fa);
}

}  // namespace dublid
