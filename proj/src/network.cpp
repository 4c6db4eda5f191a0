#include "dublid/network.hpp"

#include <cmath>
#include <string>

#include "dublid/errors.hpp"
#include "dublid/spectral.hpp"

namespace dublid {

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::W: return "w";
    case ParamGroup::B: return "b";
    case ParamGroup::Zeta: return "zeta";
    case ParamGroup::Beta: return "beta";
    case ParamGroup::Eta: return "eta";
  }
  return "?";
}

Learnables Learnables::zeros_like() const {
  Learnables z = *this;
  for_each_scalar(z, [](ParamGroup, double& v) { v = 0.0; });
  return z;
}

std::size_t Learnables::scalar_count() const {
  std::size_t n = 0;
  for_each_scalar(*this, [&](ParamGroup, double) { ++n; });
  return n;
}

void for_each_scalar(Learnables& v, const std::function<void(ParamGroup, double&)>& fn) {
  for (auto& layer : v.w)
    for (auto& row : layer)
      for (auto& f : row)
        for (double& x : f.data) fn(ParamGroup::W, x);
  for (auto& layer : v.b)
    for (double& x : layer) fn(ParamGroup::B, x);
  for (auto& layer : v.zeta)
    for (double& x : layer) fn(ParamGroup::Zeta, x);
  for (double& x : v.beta) fn(ParamGroup::Beta, x);
  for (double& x : v.eta) fn(ParamGroup::Eta, x);
}

void for_each_scalar(const Learnables& v, const std::function<void(ParamGroup, double)>& fn) {
  for_each_scalar(const_cast<Learnables&>(v), [&](ParamGroup g, double& x) { fn(g, x); });
}

HqsHyper NetworkParams::hyper(std::size_t layer) const {
  return HqsHyper{values.zeta.at(layer), values.b.at(layer), values.beta.at(layer), epsilon};
}

void validate(const NetworkParams& p) {
  if (p.layers == 0 || p.channels == 0) throw InvalidArgument("network: need L >= 1 and C >= 1");
  if (p.planes != 1 && p.planes != 3) throw InvalidArgument("network: planes must be 1 or 3");
  if (p.kernel_h == 0 || p.kernel_w == 0) throw InvalidArgument("network: empty kernel support");
  if (!(p.epsilon > 0.0)) throw InvalidArgument("network: epsilon must be positive");
  const auto& v = p.values;
  if (v.w.size() != p.layers || v.b.size() != p.layers || v.zeta.size() != p.layers ||
      v.beta.size() != p.layers || v.eta.size() != p.channels)
    throw InvalidArgument("network: parameter layer count mismatch");
  for (std::size_t l = 0; l < p.layers; ++l) {
    const std::size_t in = (l + 1 == p.layers) ? p.planes : p.channels;
    if (v.w[l].size() != p.channels) throw InvalidArgument("network: filter bank shape");
    for (const auto& row : v.w[l]) {
      if (row.size() != in) throw InvalidArgument("network: filter bank shape");
      for (const auto& f : row) {
        if (f.height != 3 || f.width != 3) throw InvalidArgument("network: filters must be 3x3");
        require_finite(f, "network filter");
      }
    }
    if (v.b[l].size() != p.channels || v.zeta[l].size() != p.channels)
      throw InvalidArgument("network: per-channel parameter shape");
    validate(p.hyper(l), p.channels);
  }
  for (double e : v.eta)
    if (!(e > 0.0)) throw InvalidArgument("network: eta must be positive");
}

std::size_t filter_weight_count(std::size_t layers, std::size_t channels, std::size_t planes) {
  if (layers == 0) return 0;
  return 9 * channels * planes + 9 * channels * channels * (layers - 1);
}

namespace {

// Full (non-circular) 2D convolution of two top-left anchored arrays.
RealGrid full_convolve(const RealGrid& a, const RealGrid& b) {
  RealGrid out(a.height + b.height - 1, a.width + b.width - 1);
  for (std::size_t i = 0; i < a.height; ++i)
    for (std::size_t j = 0; j < a.width; ++j)
      for (std::size_t r = 0; r < b.height; ++r)
        for (std::size_t c = 0; c < b.width; ++c) out(i + r, j + c) += a(i, j) * b(r, c);
  return out;
}

}  // namespace

std::vector<std::vector<std::vector<RealGrid>>> effective_filters(const NetworkParams& p) {
  validate(p);
  const std::size_t L = p.layers;
  std::vector<std::vector<std::vector<RealGrid>>> f(L);
  f[L - 1] = p.values.w[L - 1];
  for (std::size_t l = L - 1; l-- > 0;) {
    const std::size_t side = f[l + 1][0][0].height + 2;
    f[l].assign(p.channels, std::vector<RealGrid>(p.planes, RealGrid(side, side)));
    for (std::size_t i = 0; i < p.channels; ++i)
      for (std::size_t j = 0; j < p.channels; ++j)
        for (std::size_t c = 0; c < p.planes; ++c)
          axpy(1.0, full_convolve(p.values.w[l][i][j], f[l + 1][j][c]), f[l][i][c]);
  }
  return f;
}

PyramidSpectra filter_pyramid_spectra(const Image& y, const NetworkParams& p) {
  validate(y);
  validate(p);
  if (y.plane_count() != p.planes)
    throw InvalidArgument("network: model expects " + std::to_string(p.planes) +
                          " plane(s), image has " + std::to_string(y.plane_count()));
  const std::size_t h = y.height(), w = y.width();
  const std::size_t L = p.layers, C = p.channels;
  PyramidSpectra out;
  for (const auto& plane : y.planes) out.input_hat.push_back(dft2(plane));
  out.w_hat.resize(L);
  for (std::size_t l = 0; l < L; ++l)
    for (const auto& row : p.values.w[l]) {
      std::vector<ComplexGrid> hats;
      for (const auto& f : row) hats.push_back(padded_spectrum(f, h, w));
      out.w_hat[l].push_back(std::move(hats));
    }
  out.y_hat.assign(L, std::vector<ComplexGrid>(C, ComplexGrid(h, w)));
  for (std::size_t l = L; l-- > 0;) {
    const std::vector<ComplexGrid>& src = (l + 1 == L) ? out.input_hat : out.y_hat[l + 1];
    for (std::size_t i = 0; i < C; ++i) {
      ComplexGrid& dst = out.y_hat[l][i];
      for (std::size_t j = 0; j < src.size(); ++j) {
        const ComplexGrid& wh = out.w_hat[l][i][j];
        for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += wh.data[k] * src[j].data[k];
      }
    }
  }
  return out;
}

std::vector<std::vector<RealGrid>> filter_pyramid(const Image& y, const NetworkParams& p) {
  const PyramidSpectra s = filter_pyramid_spectra(y, p);
  std::vector<std::vector<RealGrid>> out(s.y_hat.size());
  for (std::size_t l = 0; l < s.y_hat.size(); ++l)
    for (const auto& yh : s.y_hat[l]) out[l].push_back(idft2(yh));
  return out;
}

ForwardResult forward(const Image& y, const NetworkParams& p) {
  ForwardResult res;
  res.tape.pyramid = filter_pyramid_spectra(y, p);
  const SupportMask support = p.k_support();
  if (support.height > y.height() || support.width > y.width())
    throw InvalidArgument("network: image smaller than kernel support");
  std::vector<HqsHyper> hyper;
  for (std::size_t l = 0; l < p.layers; ++l) hyper.push_back(p.hyper(l));
  res.tape.hqs = run_layers(res.tape.pyramid.y_hat, hyper, support, true);

  const LayerRecord& last = res.tape.hqs.layers.back();
  res.kernel_grid = last.kernel.k;
  res.kernel = BlurKernel::from_grid(res.kernel_grid, support);
  res.tape.x_hat = reconstruct_spectrum(res.tape.pyramid.input_hat, dft2(res.kernel_grid),
                                        last.z_hat, res.tape.pyramid.w_hat.back(), p.values.eta);
  for (const auto& xh : res.tape.x_hat) res.image.planes.push_back(idft2(xh));
  return res;
}

}  // namespace dublid
