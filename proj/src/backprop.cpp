#include "dublid/backprop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dublid/errors.hpp"
#include "dublid/spectral.hpp"

namespace dublid {

namespace {

ComplexGrid spectrum_of(const RealGrid& g) { return dft2(g); }

void add_into(ComplexGrid& dst, const ComplexGrid& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += src.data[k];
}

RealGrid top_left(const RealGrid& g, std::size_t h, std::size_t w) {
  RealGrid out(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = g(r, c);
  return out;
}

void add_into(RealGrid& dst, const RealGrid& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += src.data[k];
}

}  // namespace

Shift2D align_shift(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b) || a.size() == 0)
    throw InvalidArgument("align_shift: grids must be non-empty and equally shaped");
  const ComplexGrid ah = dft2(a), bh = dft2(b);
  ComplexGrid prod(a.height, a.width);
  for (std::size_t k = 0; k < prod.size(); ++k) prod.data[k] = ah.data[k] * std::conj(bh.data[k]);
  const RealGrid corr = idft2(prod);
  const double peak = *std::max_element(corr.data.begin(), corr.data.end());
  const double tol = 1e-9 * std::max(std::abs(peak), std::numeric_limits<double>::min());
  for (std::size_t r = 0; r < corr.height; ++r)
    for (std::size_t c = 0; c < corr.width; ++c)
      if (corr(r, c) >= peak - tol) return {static_cast<long>(r), static_cast<long>(c)};
  return {};
}

double mse(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b) || a.size() == 0)
    throw InvalidArgument("mse: grids must be non-empty and equally shaped");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mse(const Image& a, const Image& b) {
  if (a.plane_count() != b.plane_count() || a.plane_count() == 0)
    throw InvalidArgument("mse: plane count mismatch");
  double acc = 0.0;
  for (std::size_t p = 0; p < a.plane_count(); ++p) acc += mse(a.planes[p], b.planes[p]);
  return acc / static_cast<double>(a.plane_count());
}

LossEvaluation evaluate_loss(const Image& x_est, const RealGrid& k_est_grid,
                             const Image& x_true, const BlurKernel& k_true,
                             const SupportMask& support, double kappa0,
                             const Shift2D* fixed_tau) {
  if (x_est.plane_count() != x_true.plane_count() || x_est.plane_count() == 0)
    throw InvalidArgument("loss: plane count mismatch");
  const std::size_t h = x_true.height(), w = x_true.width();
  if (x_est.height() != h || x_est.width() != w || k_est_grid.height != h ||
      k_est_grid.width != w)
    throw InvalidArgument("loss: estimate and target sizes differ");
  if (!(kappa0 > 0.0)) throw InvalidArgument("loss: kappa0 must be positive");
  const double kmax = *std::max_element(k_true.taps.data.begin(), k_true.taps.data.end());
  if (!(kmax > 0.0)) throw InvalidArgument("loss: true kernel has no positive tap");

  LossEvaluation out;
  LossTerms& t = out.terms;
  t.kappa = kappa0 / (kmax * kmax);
  const RealGrid kt = k_true.to_grid(h, w);
  t.tau = fixed_tau ? normalize(*fixed_tau, h, w) : align_shift(k_est_grid, kt);

  const double area = static_cast<double>(support.height * support.width);
  const RealGrid kt_shift = circular_shift(kt, t.tau);
  out.seeds.kernel_grid = RealGrid(h, w);
  double ksq = 0.0;
  for (std::size_t k = 0; k < kt_shift.size(); ++k) {
    const double d = k_est_grid.data[k] - kt_shift.data[k];
    ksq += d * d;
    out.seeds.kernel_grid.data[k] = t.kappa * d / area;
  }
  t.kernel_term = 0.5 * t.kappa * ksq / area;

  const double n = static_cast<double>(x_true.plane_count() * h * w);
  double xsq = 0.0;
  for (std::size_t p = 0; p < x_true.plane_count(); ++p) {
    const RealGrid xs = circular_shift(x_true.planes[p], -t.tau);
    RealGrid seed(h, w);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double d = x_est.planes[p].data[k] - xs.data[k];
      xsq += d * d;
      seed.data[k] = d / n;
    }
    out.seeds.image.push_back(std::move(seed));
  }
  t.image_term = 0.5 * xsq / n;
  return out;
}

namespace vjp {

GStep g_step(const ComplexGrid& y_hat, const ComplexGrid& k_hat, const ComplexGrid& z_hat,
             const ComplexGrid& g_hat, double zeta, const ComplexGrid& g_bar) {
  const std::size_t n = y_hat.size();
  GStep out{ComplexGrid(y_hat.height, y_hat.width), ComplexGrid(y_hat.height, y_hat.width),
            ComplexGrid(y_hat.height, y_hat.width), 0.0};
  double zeta_acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Complex K = k_hat.data[k], Y = y_hat.data[k], Z = z_hat.data[k];
    const Complex G = g_hat.data[k], A = g_bar.data[k];
    const double m = std::norm(K);
    const double d = zeta * m + 1.0;
    out.y_bar.data[k] = zeta * K * A / d;
    out.z_bar.data[k] = A / d;
    out.k_bar.data[k] = -zeta * K * std::conj(G) * A / d + std::conj(A) * zeta * (Y - K * G) / d;
    zeta_acc += (std::conj(A) * (std::conj(K) * Y - m * Z)).real() / (d * d);
  }
  out.zeta_bar = zeta_acc / static_cast<double>(n);
  return out;
}

Threshold soft_threshold(const RealGrid& g, double b, const RealGrid& z_bar) {
  if (!g.same_shape(z_bar)) throw InvalidArgument("vjp::soft_threshold: shape mismatch");
  Threshold out{RealGrid(g.height, g.width), 0.0};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double v = g.data[k];
    if (v > b) {
      out.g_bar.data[k] = z_bar.data[k];
      out.b_bar -= z_bar.data[k];
    } else if (v < -b) {
      out.g_bar.data[k] = z_bar.data[k];
      out.b_bar += z_bar.data[k];
    }
  }
  return out;
}

Wiener kernel_wiener(std::span<const ComplexGrid> z_hat, std::span<const ComplexGrid> y_hat,
                     const ComplexGrid& k_hat, double epsilon, const ComplexGrid& k_bar) {
  if (z_hat.size() != y_hat.size() || z_hat.empty())
    throw InvalidArgument("vjp::kernel_wiener: channel mismatch");
  const std::size_t h = k_hat.height, w = k_hat.width;
  Wiener out;
  out.y_bar.assign(z_hat.size(), ComplexGrid(h, w));
  out.z_bar.assign(z_hat.size(), ComplexGrid(h, w));
  for (std::size_t k = 0; k < k_hat.size(); ++k) {
    double den = epsilon;
    for (const auto& z : z_hat) den += std::norm(z.data[k]);
    const Complex K = k_hat.data[k], A = k_bar.data[k];
    for (std::size_t i = 0; i < z_hat.size(); ++i) {
      const Complex Z = z_hat[i].data[k], Y = y_hat[i].data[k];
      out.y_bar[i].data[k] = Z * A / den;
      out.z_bar[i].data[k] = -std::conj(K) * Z * A / den + std::conj(A) * (Y - K * Z) / den;
    }
  }
  return out;
}

KernelPost kernel_threshold(const KernelStep& step, double beta, const SupportMask& support,
                            const RealGrid& k_bar) {
  const std::size_t h = step.k.height, w = step.k.width;
  if (k_bar.height != h || k_bar.width != w)
    throw InvalidArgument("vjp::kernel_threshold: shape mismatch");
  KernelPost out{RealGrid(h, w), 0.0};
  if (step.path == KernelPath::Delta) return out;

  const double s = step.mass;
  double inner = 0.0;
  for (std::size_t k = 0; k < k_bar.size(); ++k) inner += k_bar.data[k] * step.k.data[k];
  // d(kept/s): kept_bar = k_bar/s - <k_bar, kept>/s^2 = (k_bar - <k_bar, k>)/s
  const double shift = beta * step.lse;
  double t_sum = 0.0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (!support.contains(r, c, h, w)) continue;
      const double k3 = step.k_third(r, c);
      const bool active = step.path == KernelPath::Thresholded ? (k3 - shift > 0.0) : (k3 > 0.0);
      if (!active) continue;
      const double t = (k_bar(r, c) - inner) / s;
      out.k_wiener_bar(r, c) = t;
      t_sum += t;
    }
  if (step.path == KernelPath::Thresholded) {
    out.beta_bar = -step.lse * t_sum;
    if (beta != 0.0 && t_sum != 0.0)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          if (support.contains(r, c, h, w))
            out.k_wiener_bar(r, c) -= beta * t_sum * std::exp(step.k_third(r, c) - step.lse);
  }
  return out;
}

Reconstruction reconstruction(std::span<const ComplexGrid> y_hat, const ComplexGrid& k_hat,
                              std::span<const ComplexGrid> g_hat,
                              const std::vector<std::vector<ComplexGrid>>& f_hat,
                              std::span<const double> eta, std::span<const ComplexGrid> x_hat,
                              std::span<const ComplexGrid> x_bar) {
  const std::size_t planes = y_hat.size(), channels = g_hat.size();
  if (x_hat.size() != planes || x_bar.size() != planes || f_hat.size() != channels ||
      eta.size() != channels)
    throw InvalidArgument("vjp::reconstruction: shape mismatch");
  const std::size_t h = k_hat.height, w = k_hat.width, n = k_hat.size();
  const std::vector<ComplexGrid> lambda = solve_reconstruction_system(
      k_hat, f_hat, eta, std::vector<ComplexGrid>(x_bar.begin(), x_bar.end()));

  Reconstruction out;
  out.g_bar.assign(channels, ComplexGrid(h, w));
  out.k_bar = ComplexGrid(h, w);
  out.f_bar.assign(channels, std::vector<ComplexGrid>(planes, ComplexGrid(h, w)));
  out.eta_bar.assign(channels, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex K = k_hat.data[k];
    Complex kb{};
    for (std::size_t c = 0; c < planes; ++c) {
      const Complex L = lambda[c].data[k], X = x_hat[c].data[k];
      kb += std::conj(L) * (y_hat[c].data[k] - K * X) - K * L * std::conj(X);
    }
    out.k_bar.data[k] = kb;
    for (std::size_t i = 0; i < channels; ++i) {
      Complex wl{}, wx{};
      for (std::size_t c = 0; c < planes; ++c) {
        wl += f_hat[i][c].data[k] * lambda[c].data[k];
        wx += f_hat[i][c].data[k] * x_hat[c].data[k];
      }
      const Complex resid = g_hat[i].data[k] - wx;
      out.g_bar[i].data[k] = eta[i] * wl;
      out.eta_bar[i] += (std::conj(wl) * resid).real();
      for (std::size_t c = 0; c < planes; ++c)
        out.f_bar[i][c].data[k] =
            eta[i] * (std::conj(lambda[c].data[k]) * resid - std::conj(x_hat[c].data[k]) * wl);
    }
  }
  for (double& e : out.eta_bar) e /= static_cast<double>(n);
  return out;
}

}  // namespace vjp

GradientSet backward(const ForwardTape& tape, const NetworkParams& params,
                     const LossAdjoints& seeds) {
  validate(params);
  const std::size_t L = params.layers, C = params.channels, P = params.planes;
  const auto& layers = tape.hqs.layers;
  if (layers.size() != L || tape.pyramid.y_hat.size() != L || tape.x_hat.size() != P ||
      seeds.image.size() != P)
    throw InvalidArgument("backward: tape does not match parameters");
  const std::size_t h = tape.x_hat[0].height, w = tape.x_hat[0].width;
  if (seeds.kernel_grid.height != h || seeds.kernel_grid.width != w)
    throw InvalidArgument("backward: seed shape mismatch");
  const SupportMask support = tape.hqs.support;

  GradientSet grad = params.values.zeros_like();

  // Reconstruction.
  std::vector<ComplexGrid> x_bar;
  for (const auto& s : seeds.image) x_bar.push_back(spectrum_of(s));
  const LayerRecord& last = layers.back();
  const ComplexGrid k_last_hat = spectrum_of(last.kernel.k);
  const vjp::Reconstruction rec = vjp::reconstruction(
      tape.pyramid.input_hat, k_last_hat, last.z_hat, tape.pyramid.w_hat.back(),
      params.values.eta, tape.x_hat, x_bar);
  grad.eta = rec.eta_bar;
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t c = 0; c < P; ++c)
      add_into(grad.w[L - 1][i][c], top_left(idft2(rec.f_bar[i][c]), 3, 3));

  ComplexGrid k_bar = rec.k_bar;
  add_into(k_bar, spectrum_of(seeds.kernel_grid));
  std::vector<ComplexGrid> z_bar = rec.g_bar;
  std::vector<std::vector<ComplexGrid>> y_bar(L, std::vector<ComplexGrid>(C, ComplexGrid(h, w)));

  for (std::size_t l = L; l-- > 0;) {
    const LayerRecord& r = layers[l];
    const HqsHyper hp = params.hyper(l);

    const vjp::KernelPost post = vjp::kernel_threshold(r.kernel, hp.beta, support, idft2(k_bar));
    grad.beta[l] = post.beta_bar;
    const vjp::Wiener wi = vjp::kernel_wiener(r.z_hat, r.y_hat, r.k_wiener_hat, hp.epsilon,
                                              spectrum_of(post.k_wiener_bar));
    for (std::size_t i = 0; i < C; ++i) {
      add_into(y_bar[l][i], wi.y_bar[i]);
      add_into(z_bar[i], wi.z_bar[i]);
    }

    ComplexGrid k_in_bar(h, w);
    std::vector<ComplexGrid> z_in_bar;
    for (std::size_t i = 0; i < C; ++i) {
      const vjp::Threshold th = vjp::soft_threshold(r.g[i], hp.b[i], idft2(z_bar[i]));
      grad.b[l][i] = th.b_bar;
      const ComplexGrid g_hat =
          g_update_spectrum(r.y_hat[i], r.k_in_hat, r.z_in_hat[i], hp.zeta[i]);
      vjp::GStep gs = vjp::g_step(r.y_hat[i], r.k_in_hat, r.z_in_hat[i], g_hat, hp.zeta[i],
                                  spectrum_of(th.g_bar));
      grad.zeta[l][i] = gs.zeta_bar;
      add_into(y_bar[l][i], gs.y_bar);
      add_into(k_in_bar, gs.k_bar);
      z_in_bar.push_back(std::move(gs.z_bar));
    }
    // The first layer starts from constants.
    k_bar = std::move(k_in_bar);
    z_bar = std::move(z_in_bar);
  }

  // Filter pyramid, outermost layer first.
  for (std::size_t l = 0; l < L; ++l) {
    const bool bottom = l + 1 == L;
    const std::vector<ComplexGrid>& src = bottom ? tape.pyramid.input_hat : tape.pyramid.y_hat[l + 1];
    for (std::size_t i = 0; i < C; ++i) {
      const ComplexGrid& yb = y_bar[l][i];
      for (std::size_t j = 0; j < src.size(); ++j) {
        ComplexGrid corr(h, w);
        for (std::size_t k = 0; k < corr.size(); ++k)
          corr.data[k] = yb.data[k] * std::conj(src[j].data[k]);
        add_into(grad.w[l][i][j], top_left(idft2(corr), 3, 3));
        if (!bottom) {
          const ComplexGrid& wh = tape.pyramid.w_hat[l][i][j];
          ComplexGrid& dst = y_bar[l + 1][j];
          for (std::size_t k = 0; k < dst.size(); ++k)
            dst.data[k] += std::conj(wh.data[k]) * yb.data[k];
        }
      }
    }
  }
  return grad;
}

std::pair<std::vector<double>, std::vector<double>> grad_eta_beta(const ForwardTape& tape,
                                                                  const NetworkParams& params,
                                                                  const LossAdjoints& seeds) {
  GradientSet g = backward(tape, params, seeds);
  return {std::move(g.eta), std::move(g.beta)};
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

bool GradCheckReport::passed(double tol) const {
  for (const auto& g : groups)
    if (g.checked == 0 || !(g.max_rel_error <= tol)) return false;
  return true;
}

namespace {

// Every discrete decision taken by a forward pass.
std::vector<unsigned char> decision_signature(const NetworkParams& params, const Image& y) {
  const ForwardResult fr = forward(y, params);
  std::vector<unsigned char> sig;
  const SupportMask support = fr.tape.hqs.support;
  for (std::size_t l = 0; l < fr.tape.hqs.layers.size(); ++l) {
    const LayerRecord& r = fr.tape.hqs.layers[l];
    const HqsHyper hp = params.hyper(l);
    for (std::size_t i = 0; i < r.g.size(); ++i)
      for (double v : r.g[i].data)
        sig.push_back(v > hp.b[i] ? 1 : (v < -hp.b[i] ? 2 : 0));
    const KernelStep& ks = r.kernel;
    sig.push_back(static_cast<unsigned char>(10 + static_cast<int>(ks.path)));
    const double shift = hp.beta * ks.lse;
    for (std::size_t rr = 0; rr < ks.k_third.height; ++rr)
      for (std::size_t cc = 0; cc < ks.k_third.width; ++cc)
        if (support.contains(rr, cc, ks.k_third.height, ks.k_third.width)) {
          sig.push_back(ks.k_third(rr, cc) - shift > 0.0 ? 1 : 0);
          sig.push_back(ks.k_third(rr, cc) > 0.0 ? 1 : 0);
        }
  }
  return sig;
}

bool feasible(ParamGroup g, double v) {
  switch (g) {
    case ParamGroup::B:
    case ParamGroup::Beta: return v >= 0.0;
    case ParamGroup::Zeta:
    case ParamGroup::Eta: return v > 0.0;
    default: return true;
  }
}

}  // namespace

GradCheckReport gradient_check(const NetworkParams& params, const Image& y, const Image& x_true,
                               const BlurKernel& k_true, const GradCheckOptions& opt) {
  if (!(opt.step > 0.0)) throw InvalidArgument("gradient_check: step must be positive");
  const ForwardResult base = forward(y, params);
  const LossEvaluation le = evaluate_loss(base.image, base.kernel_grid, x_true, k_true,
                                          params.k_support(), opt.kappa0);
  const Shift2D tau = le.terms.tau;
  const GradientSet analytic = backward(base.tape, params, le.seeds);
  const std::vector<unsigned char> base_sig = decision_signature(params, y);

  std::vector<double> a_vals;
  for_each_scalar(analytic, [&](ParamGroup, double v) { a_vals.push_back(v); });

  NetworkParams work = params;
  std::vector<std::pair<ParamGroup, double*>> slots;
  for_each_scalar(work.values, [&](ParamGroup g, double& v) { slots.emplace_back(g, &v); });

  GradCheckReport report;
  for (ParamGroup g : {ParamGroup::W, ParamGroup::B, ParamGroup::Zeta, ParamGroup::Beta,
                       ParamGroup::Eta})
    report.groups.push_back({g, 0.0, 0, 0});

  for (std::size_t n = 0; n < slots.size(); ++n) {
    auto [group, ptr] = slots[n];
    GroupCheck& gc = report.groups[static_cast<std::size_t>(group)];
    const double theta = *ptr;
    report.scalars.push_back({group, a_vals[n], std::numeric_limits<double>::quiet_NaN(), 0.0, true});
    // Largest step whose +-radius window crosses no decision boundary.
    double h = opt.step;
    bool usable = false;
    for (std::size_t r = 0; r <= opt.refinements && !usable; ++r, h /= 10.0) {
      const double reach = opt.kink_radius * h;
      if (!feasible(group, theta - reach)) continue;
      usable = true;
      for (double s : {-reach, reach}) {
        *ptr = theta + s;
        if (decision_signature(work, y) != base_sig) usable = false;
      }
      *ptr = theta;
      if (usable) break;
    }
    if (!usable) {
      ++gc.skipped;
      continue;
    }
    *ptr = theta + h;
    const ReferenceLoss lp = reference_loss(work, y, x_true, k_true, opt.kappa0, tau);
    *ptr = theta - h;
    const ReferenceLoss lm = reference_loss(work, y, x_true, k_true, opt.kappa0, tau);
    *ptr = theta;
    const double numeric = static_cast<double>(
        ((lp.kernel_term - lm.kernel_term) + (lp.image_term - lm.image_term)) / (2.0L * h));
    const double a = a_vals[n];
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    report.scalars.back() = {group, a, numeric, rel, false};
    gc.max_rel_error = std::max(gc.max_rel_error, rel);
    ++gc.checked;
  }
  return report;
}

GradCheckInstance make_gradcheck_instance(std::size_t layers, std::size_t channels,
                                          std::size_t size, std::size_t planes,
                                          std::uint64_t seed) {
  if (size < 9) throw InvalidArgument("gradcheck: grid must be at least 9 pixels");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  GradCheckInstance inst;
  NetworkParams& p = inst.params;
  p.layers = layers;
  p.channels = channels;
  p.planes = planes;
  p.kernel_h = p.kernel_w = 9;
  Learnables& v = p.values;
  v.w.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = (l + 1 == layers) ? planes : channels;
    const double bound = std::sqrt(6.0 / (9.0 * static_cast<double>(in + channels)));
    for (std::size_t i = 0; i < channels; ++i) {
      std::vector<RealGrid> row;
      for (std::size_t j = 0; j < in; ++j) {
        RealGrid f(3, 3);
        for (double& t : f.data) t = uniform(-bound, bound);
        row.push_back(std::move(f));
      }
      v.w[l].push_back(std::move(row));
    }
    std::vector<double> b, zeta;
    for (std::size_t i = 0; i < channels; ++i) {
      b.push_back(uniform(0.01, 0.03));
      zeta.push_back(uniform(0.5, 2.0));
    }
    v.b.push_back(std::move(b));
    v.zeta.push_back(std::move(zeta));
    v.beta.push_back(uniform(0.001, 0.005));
  }
  for (std::size_t i = 0; i < channels; ++i) v.eta.push_back(uniform(2.0, 8.0));

  RealGrid taps(7, 7);
  for (double& t : taps.data) t = uniform(0.0, 1.0);
  const double mass = sum(taps);
  for (double& t : taps.data) t /= mass;
  inst.k_true = BlurKernel{taps};
  const ComplexGrid k_hat = dft2(inst.k_true.to_grid(size, size));

  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t c = 0; c < planes; ++c) {
    RealGrid x(size, size, 0.5);
    for (int blob = 0; blob < 6; ++blob) {
      const double cy = uniform(0.0, static_cast<double>(size));
      const double cx = uniform(0.0, static_cast<double>(size));
      const double amp = uniform(-0.3, 0.3), rad = uniform(2.0, 6.0);
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t q = 0; q < size; ++q) {
          const double d2 = (r - cy) * (r - cy) + (q - cx) * (q - cx);
          x(r, q) += amp * std::exp(-d2 / (2.0 * rad * rad));
        }
    }
    for (double& t : x.data) t += uniform(-0.1, 0.1);
    ComplexGrid y_hat = dft2(x);
    for (std::size_t k = 0; k < y_hat.size(); ++k) y_hat.data[k] *= k_hat.data[k];
    RealGrid y = idft2(y_hat);
    for (double& t : y.data) t += noise(rng);
    inst.x_true.planes.push_back(std::move(x));
    inst.y.planes.push_back(std::move(y));
  }
  return inst;
}

}  // namespace dublid
