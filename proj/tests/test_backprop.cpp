#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dublid/backprop.hpp"
#include "dublid/errors.hpp"
#include "dublid/spectral.hpp"
#include "dublid/trainer.hpp"
#include "support.hpp"

using namespace dublid;

namespace {

using CG = ComplexGrid;

CG spec(const RealGrid& g) { return dft2(g); }
RealGrid real(const CG& g) { return idft2(g); }

/// |a - b| relative to the larger magnitude.
double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

// Each dot-product test pairs a hand-written directional derivative (JVP)
// with the library's reverse map: <J u, v> must equal <u, J^T v>.

TEST_CASE("g-step adjoint") {
  std::mt19937_64 rng(1);
  const std::size_t n = 16;
  const RealGrid y = testing::random_grid(rng, n, n), z = testing::random_grid(rng, n, n);
  const RealGrid k = testing::random_kernel(rng, 5, 5).to_grid(n, n);
  const double zeta = 1.3;
  const RealGrid dy = testing::random_grid(rng, n, n), dz = testing::random_grid(rng, n, n),
                 dk = testing::random_grid(rng, n, n), v = testing::random_grid(rng, n, n);
  const double dzeta = 0.7;
  const CG Y = spec(y), Z = spec(z), K = spec(k), dY = spec(dy), dZ = spec(dz), dK = spec(dk);
  const CG G = g_update_spectrum(Y, K, Z, zeta);
  CG dG(n, n);
  for (std::size_t j = 0; j < dG.size(); ++j) {
    const double m = std::norm(K.data[j]), d = zeta * m + 1.0;
    const double dm = 2.0 * (std::conj(K.data[j]) * dK.data[j]).real();
    const Complex num = zeta * std::conj(dK.data[j]) * Y.data[j] + zeta * std::conj(K.data[j]) * dY.data[j] +
                        dZ.data[j] + dzeta * std::conj(K.data[j]) * Y.data[j];
    dG.data[j] = (num - G.data[j] * (zeta * dm + dzeta * m)) / d;
  }
  const vjp::GStep a = vjp::g_step(Y, K, Z, G, zeta, spec(v));
  const double lhs = dot(real(dG), v);
  const double rhs = dot(dy, real(a.y_bar)) + dot(dz, real(a.z_bar)) + dot(dk, real(a.k_bar)) +
                     dzeta * a.zeta_bar;
  CHECK(rel(lhs, rhs) < 1e-10);
}

TEST_CASE("kernel Wiener adjoint") {
  std::mt19937_64 rng(2);
  const std::size_t n = 12, C = 3;
  const double eps = 1e-3;
  std::vector<CG> Z, Y, dZ, dY;
  std::vector<RealGrid> dz, dy;
  for (std::size_t i = 0; i < C; ++i) {
    Z.push_back(spec(testing::random_grid(rng, n, n)));
    Y.push_back(spec(testing::random_grid(rng, n, n)));
    dz.push_back(testing::random_grid(rng, n, n));
    dy.push_back(testing::random_grid(rng, n, n));
    dZ.push_back(spec(dz.back()));
    dY.push_back(spec(dy.back()));
  }
  const RealGrid v = testing::random_grid(rng, n, n);
  const CG K = kernel_wiener_spectrum(Z, Y, eps);
  CG dK(n, n);
  for (std::size_t j = 0; j < dK.size(); ++j) {
    double den = eps, dden = 0.0;
    Complex dnum{};
    for (std::size_t i = 0; i < C; ++i) {
      den += std::norm(Z[i].data[j]);
      dden += 2.0 * (std::conj(Z[i].data[j]) * dZ[i].data[j]).real();
      dnum += std::conj(dZ[i].data[j]) * Y[i].data[j] + std::conj(Z[i].data[j]) * dY[i].data[j];
    }
    dK.data[j] = (dnum - K.data[j] * dden) / den;
  }
  const vjp::Wiener a = vjp::kernel_wiener(Z, Y, K, eps, spec(v));
  double rhs = 0.0;
  for (std::size_t i = 0; i < C; ++i) rhs += dot(dz[i], real(a.z_bar[i])) + dot(dy[i], real(a.y_bar[i]));
  CHECK(rel(dot(real(dK), v), rhs) < 1e-10);
}

TEST_CASE("soft-threshold adjoint and kink convention") {
  std::mt19937_64 rng(3);
  const double b = 0.3;
  RealGrid g = testing::random_grid(rng, 10, 10);
  g(0, 0) = b;   // kink points contribute nothing
  g(0, 1) = -b;
  const RealGrid dg = testing::random_grid(rng, 10, 10), v = testing::random_grid(rng, 10, 10);
  const double db = -0.4;
  RealGrid dz(10, 10);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.data[j];
    if (x > b) dz.data[j] = dg.data[j] - db;
    if (x < -b) dz.data[j] = dg.data[j] + db;
  }
  const vjp::Threshold a = vjp::soft_threshold(g, b, v);
  CHECK(rel(dot(dz, v), dot(dg, a.g_bar) + db * a.b_bar) < 1e-12);
  CHECK(a.g_bar(0, 0) == 0.0);
  CHECK(a.g_bar(0, 1) == 0.0);
}

TEST_CASE("kernel threshold adjoint on all three paths") {
  std::mt19937_64 rng(4);
  const std::size_t n = 16;
  const SupportMask m = SupportMask::centered(5, 5);
  const RealGrid dkw = testing::random_grid(rng, n, n), v = testing::random_grid(rng, n, n);
  const double dbeta = 0.3;

  auto jvp = [&](const RealGrid& kw, double beta, const KernelStep& s) {
    // t on the support, lse = log sum exp t, kept = [t - beta lse]_+, k = kept / sum kept
    double dlse = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        if (m.contains(r, c, n, n)) dlse += std::exp(kw(r, c) - s.lse) * dkw(r, c);
    RealGrid dkept(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        if (!m.contains(r, c, n, n)) continue;
        if (s.path == KernelPath::Thresholded && kw(r, c) - beta * s.lse > 0.0)
          dkept(r, c) = dkw(r, c) - dbeta * s.lse - beta * dlse;
        if (s.path == KernelPath::Relu && kw(r, c) > 0.0) dkept(r, c) = dkw(r, c);
      }
    RealGrid dk = dkept;
    const double total = sum(dkept);
    for (std::size_t j = 0; j < dk.size(); ++j) dk.data[j] = (dkept.data[j] - s.k.data[j] * total) / s.mass;
    return dk;
  };

  SUBCASE("thresholded") {
    const RealGrid kw = testing::random_grid(rng, n, n, -0.2, 1.0);
    const double beta = 0.05;
    const KernelStep s = threshold_and_normalize(kw, beta, m, true);
    REQUIRE(s.path == KernelPath::Thresholded);
    const vjp::KernelPost a = vjp::kernel_threshold(s, beta, m, v);
    CHECK(rel(dot(jvp(kw, beta, s), v), dot(dkw, a.k_wiener_bar) + dbeta * a.beta_bar) < 1e-10);
  }
  SUBCASE("relu fallback") {
    const RealGrid kw = testing::random_grid(rng, n, n, -0.2, 1.0);
    const KernelStep s = threshold_and_normalize(kw, 50.0, m, true);
    REQUIRE(s.path == KernelPath::Relu);
    const vjp::KernelPost a = vjp::kernel_threshold(s, 50.0, m, v);
    CHECK(a.beta_bar == 0.0);
    CHECK(rel(dot(jvp(kw, 50.0, s), v), dot(dkw, a.k_wiener_bar)) < 1e-10);
  }
  SUBCASE("delta fallback") {
    const KernelStep s = threshold_and_normalize(RealGrid(n, n, -1.0), 0.1, m, true);
    REQUIRE(s.path == KernelPath::Delta);
    const vjp::KernelPost a = vjp::kernel_threshold(s, 0.1, m, v);
    CHECK(squared_norm(a.k_wiener_bar) == 0.0);
    CHECK(a.beta_bar == 0.0);
  }
}

TEST_CASE("reconstruction adjoint") {
  std::mt19937_64 rng(5);
  const std::size_t n = 12;
  for (std::size_t planes : {1u, 3u}) {
    const std::size_t C = 3;
    std::vector<CG> Y, G, dY_unused, X_bar;
    std::vector<RealGrid> dg, v;
    std::vector<std::vector<CG>> F, dF;
    std::vector<std::vector<RealGrid>> df;
    std::vector<double> eta, deta;
    for (std::size_t c = 0; c < planes; ++c) {
      Y.push_back(spec(testing::random_grid(rng, n, n)));
      v.push_back(testing::random_grid(rng, n, n));
    }
    for (std::size_t i = 0; i < C; ++i) {
      G.push_back(spec(testing::random_grid(rng, n, n)));
      dg.push_back(testing::random_grid(rng, n, n));
      F.emplace_back();
      dF.emplace_back();
      df.emplace_back();
      for (std::size_t c = 0; c < planes; ++c) {
        F.back().push_back(padded_spectrum(testing::random_grid(rng, 3, 3), n, n));
        df.back().push_back(testing::random_grid(rng, n, n));
        dF.back().push_back(spec(df.back().back()));
      }
      eta.push_back(0.2 + 0.5 * static_cast<double>(i));
      deta.push_back(0.3 - 0.2 * static_cast<double>(i));
    }
    const RealGrid k = testing::random_kernel(rng, 3, 3).to_grid(n, n);
    const RealGrid dk = testing::random_grid(rng, n, n);
    const CG K = spec(k), dK = spec(dk);
    const auto X = reconstruct_spectrum(Y, K, G, F, eta);

    // C dX = dB - dC X
    std::vector<CG> rhs(planes, CG(n, n));
    for (std::size_t j = 0; j < K.size(); ++j)
      for (std::size_t a = 0; a < planes; ++a) {
        Complex r = std::conj(dK.data[j]) * Y[a].data[j] -
                    2.0 * (std::conj(K.data[j]) * dK.data[j]).real() * X[a].data[j];
        for (std::size_t i = 0; i < C; ++i) {
          const Complex Fa = F[i][a].data[j], dFa = dF[i][a].data[j];
          r += deta[i] * std::conj(Fa) * G[i].data[j] + eta[i] * std::conj(dFa) * G[i].data[j] +
               eta[i] * std::conj(Fa) * spec(dg[i]).data[j];
          Complex fx{}, dfx{};
          for (std::size_t b = 0; b < planes; ++b) {
            fx += F[i][b].data[j] * X[b].data[j];
            dfx += dF[i][b].data[j] * X[b].data[j];
          }
          r -= deta[i] * std::conj(Fa) * fx + eta[i] * (std::conj(dFa) * fx + std::conj(Fa) * dfx);
        }
        rhs[a].data[j] = r;
      }
    const auto dX = solve_reconstruction_system(K, F, eta, rhs);

    for (const auto& p : v) X_bar.push_back(spec(p));
    const vjp::Reconstruction a = vjp::reconstruction(Y, K, G, F, eta, X, X_bar);
    double lhs = 0.0, rhs_dot = dot(dk, real(a.k_bar));
    for (std::size_t c = 0; c < planes; ++c) lhs += dot(real(dX[c]), v[c]);
    for (std::size_t i = 0; i < C; ++i) {
      rhs_dot += dot(dg[i], real(a.g_bar[i])) + deta[i] * a.eta_bar[i];
      for (std::size_t c = 0; c < planes; ++c) rhs_dot += dot(df[i][c], real(a.f_bar[i][c]));
    }
    CHECK(rel(lhs, rhs_dot) < 1e-10);
  }
}

TEST_CASE("loss closed forms") {
  std::mt19937_64 rng(6);
  const std::size_t n = 16;
  const BlurKernel kt = testing::random_kernel(rng, 5, 5);
  const Image x(testing::random_grid(rng, n, n));
  const SupportMask sup = SupportMask::centered(7, 7);

  const LossEvaluation same = evaluate_loss(x, kt.to_grid(n, n), x, kt, sup, 1e5);
  CHECK(same.terms.total() == 0.0);
  CHECK(same.terms.tau == Shift2D{0, 0});

  const Shift2D s{3, -2};
  const RealGrid k_shift = circular_shift(kt.to_grid(n, n), s);
  const Image x_shift(circular_shift(x.planes[0], -s));
  const LossEvaluation moved = evaluate_loss(x_shift, k_shift, x, kt, sup, 1e5);
  CHECK(moved.terms.total() < 1e-20);
  CHECK(moved.terms.tau == normalize(s, n, n));

  RealGrid a(4, 4, 0.3), b(4, 4, 0.4);
  CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));

  const double kmax = *std::max_element(kt.taps.data.begin(), kt.taps.data.end());
  CHECK(same.terms.kappa == doctest::Approx(1e5 / (kmax * kmax)).epsilon(1e-14));

  // hand evaluation with a fixed alignment
  const RealGrid k_est = BlurKernel::delta(7, 7).to_grid(n, n);
  const Image x_est(testing::random_grid(rng, n, n));
  const Shift2D zero{0, 0};
  const LossEvaluation e = evaluate_loss(x_est, k_est, x, kt, sup, 2.0, &zero);
  const RealGrid ktg = kt.to_grid(n, n);
  double ks = 0.0, xs = 0.0;
  for (std::size_t j = 0; j < ktg.size(); ++j) {
    ks += (k_est.data[j] - ktg.data[j]) * (k_est.data[j] - ktg.data[j]);
    xs += (x_est.planes[0].data[j] - x.planes[0].data[j]) * (x_est.planes[0].data[j] - x.planes[0].data[j]);
  }
  CHECK(e.terms.kernel_term == doctest::Approx(0.5 * (2.0 / (kmax * kmax)) * ks / 49.0).epsilon(1e-13));
  CHECK(e.terms.image_term == doctest::Approx(0.5 * xs / 256.0).epsilon(1e-13));
  // seeds are the gradients of the two terms
  CHECK(dot(e.seeds.kernel_grid, e.seeds.kernel_grid) > 0.0);
  RealGrid kp = k_est;
  kp(0, 0) += 1e-6;
  const LossEvaluation ep = evaluate_loss(x_est, kp, x, kt, sup, 2.0, &zero);
  CHECK(rel((ep.terms.kernel_term - e.terms.kernel_term) / 1e-6, e.seeds.kernel_grid(0, 0)) < 1e-5);
}

TEST_CASE("align_shift tie-break and identities") {
  std::mt19937_64 rng(7);
  const RealGrid a = testing::random_grid(rng, 9, 11);
  CHECK(align_shift(a, a) == Shift2D{0, 0});
  CHECK(align_shift(RealGrid(6, 6, 2.0), RealGrid(6, 6, 2.0)) == Shift2D{0, 0});
  CHECK(align_shift(circular_shift(a, {4, 7}), a) == Shift2D{4, 7});
  CHECK_THROWS_AS(align_shift(a, RealGrid(9, 10)), InvalidArgument);
}

TEST_CASE("backward linearity and dead thresholds") {
  const GradCheckInstance inst = make_gradcheck_instance(2, 2, 16, 1, 3);
  const ForwardResult fr = forward(inst.y, inst.params);
  LossAdjoints zero{{RealGrid(16, 16)}, RealGrid(16, 16)};
  const GradientSet g0 = backward(fr.tape, inst.params, zero);
  for_each_scalar(g0, [](ParamGroup, double v) { CHECK(v == 0.0); });

  // Doubling the seeds doubles every gradient.
  LossEvaluation le = evaluate_loss(fr.image, fr.kernel_grid, inst.x_true, inst.k_true,
                                    inst.params.k_support(), 1e5);
  const GradientSet g1 = backward(fr.tape, inst.params, le.seeds);
  for (auto& p : le.seeds.image) for (double& v : p.data) v *= 2.0;
  for (double& v : le.seeds.kernel_grid.data) v *= 2.0;
  const GradientSet g2 = backward(fr.tape, inst.params, le.seeds);
  std::vector<double> a, b;
  for_each_scalar(g1, [&](ParamGroup, double v) { a.push_back(v); });
  for_each_scalar(g2, [&](ParamGroup, double v) { b.push_back(v); });
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == doctest::Approx(2.0 * a[j]).epsilon(1e-12));

  const auto [eta_bar, beta_bar] = grad_eta_beta(fr.tape, inst.params, le.seeds);
  CHECK(eta_bar == g2.eta);
  CHECK(beta_bar == g2.beta);

  NetworkParams dead = inst.params;
  for (double& v : dead.values.b[0]) v = 1e6;
  const ForwardResult fd = forward(inst.y, dead);
  const LossEvaluation ld = evaluate_loss(fd.image, fd.kernel_grid, inst.x_true, inst.k_true,
                                          dead.k_support(), 1e5);
  const GradientSet gd = backward(fd.tape, dead, ld.seeds);
  for (double v : gd.b[0]) CHECK(v == 0.0);

  NetworkParams wrong = inst.params;
  wrong.layers = 3;
  CHECK_THROWS_AS(backward(fr.tape, wrong, le.seeds), InvalidArgument);
}

TEST_CASE("gradient check across network shapes") {
  for (std::size_t L : {1u, 2u, 3u})
    for (std::size_t C : {1u, 2u, 4u}) {
      const std::size_t size = 16 + 8 * (L - 1);
      const GradCheckInstance inst = make_gradcheck_instance(L, C, size, 1, 100 + 10 * L + C);
      const GradCheckReport r =
          gradient_check(inst.params, inst.y, inst.x_true, inst.k_true, GradCheckOptions{});
      std::ostringstream detail;
      for (const auto& g : r.groups)
        detail << group_name(g.group) << " checked " << g.checked << " skipped " << g.skipped
               << " max " << g.max_rel_error << "; ";
      INFO("L=" << L << " C=" << C << " size=" << size << ": " << detail.str());
      CHECK(r.passed(1e-4));
    }
}

TEST_CASE("gradient check with a 1e-5 step") {
  const GradCheckInstance inst = make_gradcheck_instance(2, 2, 16, 1, 5);
  GradCheckOptions opt;
  opt.step = 1e-5;
  const GradCheckReport r = gradient_check(inst.params, inst.y, inst.x_true, inst.k_true, opt);
  std::ostringstream detail;
  for (const auto& g : r.groups)
    detail << group_name(g.group) << " checked " << g.checked << " max " << g.max_rel_error << "; ";
  INFO(detail.str());
  CHECK(r.passed(1e-4));
}

TEST_CASE("gradient check on a colour network") {
  const GradCheckInstance inst = make_gradcheck_instance(2, 2, 16, 3, 7);
  const GradCheckReport r = gradient_check(inst.params, inst.y, inst.x_true, inst.k_true);
  INFO("max rel " << r.max_rel_error());
  CHECK(r.passed(1e-4));
}
