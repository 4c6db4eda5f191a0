#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "dublid/datagen.hpp"
#include "dublid/errors.hpp"
#include "dublid/metrics.hpp"
#include "support.hpp"

using namespace dublid;

TEST_CASE("psnr closed forms") {
  const Image a(RealGrid(8, 8, 0.2)), b(RealGrid(8, 8, 0.3)), c(RealGrid(8, 8, 1.2));
  CHECK(psnr(a, b).value == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, c).value == doctest::Approx(0.0).epsilon(1e-12));
  const Decibels same = psnr(a, a);
  CHECK(same.capped);
  CHECK(same.value == kDbCap);
  std::mt19937_64 rng(1);
  const Image x(testing::random_grid(rng, 9, 9)), y(testing::random_grid(rng, 9, 9));
  CHECK(psnr(x, y).value == psnr(y, x).value);
  CHECK_THROWS_AS(psnr(x, Image(RealGrid(9, 8))), InvalidArgument);
}

TEST_CASE("isnr closed forms") {
  std::mt19937_64 rng(2);
  const RealGrid x = testing::random_grid(rng, 12, 12), e = testing::random_grid(rng, 12, 12);
  RealGrid y = x, xe = x;
  axpy(2.0, e, y);
  axpy(1.0, e, xe);
  CHECK(isnr(Image(y), Image(y), Image(x)).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(isnr(Image(x), Image(y), Image(x)).capped);
  CHECK(isnr(Image(xe), Image(y), Image(x)).value == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
  const Shift2D s{3, 5};
  CHECK(isnr(Image(circular_shift(xe, s)), Image(circular_shift(y, s)), Image(circular_shift(x, s))).value ==
        doctest::Approx(isnr(Image(xe), Image(y), Image(x)).value).epsilon(1e-12));
}

TEST_CASE("ssim identities") {
  std::mt19937_64 rng(3);
  const RealGrid a = testing::random_grid(rng, 32, 32, 0.0, 1.0);
  CHECK(ssim(a, a) == 1.0);
  const RealGrid b = testing::random_grid(rng, 32, 32, 0.0, 1.0);
  CHECK(ssim(a, b) == ssim(b, a));
  const double s = ssim(a, b);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);

  RealGrid bin(32, 32), inv(32, 32);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t j = 0; j < bin.size(); ++j) {
    bin.data[j] = coin(rng) ? 1.0 : 0.0;
    inv.data[j] = 1.0 - bin.data[j];
  }
  CHECK(ssim(bin, inv) < 0.0);
  CHECK_THROWS_AS(ssim(RealGrid(8, 8), RealGrid(8, 8)), InvalidArgument);
}

TEST_CASE("ssim decreases as noise grows") {
  const Image x = synthetic_scene(64, 64, 1, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  RealGrid unit(64, 64);
  for (double& v : unit.data) v = n01(rng);
  double prev = 1.0;
  for (double sigma : {0.01, 0.05, 0.1}) {
    RealGrid noisy = x.planes[0];
    axpy(sigma, unit, noisy);
    const double s = ssim(noisy, x.planes[0]);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("kernel rmse absorbs shifts") {
  std::mt19937_64 rng(6);
  const BlurKernel k = testing::random_kernel(rng, 7, 7);
  CHECK(kernel_rmse(k, k) == 0.0);
  RealGrid grid = k.to_grid(15, 15);
  const BlurKernel shifted = BlurKernel::from_grid(circular_shift(grid, {2, -3}),
                                                   SupportMask::centered(15, 15));
  CHECK(kernel_rmse(shifted, k) < 1e-15);
}

TEST_CASE("kernel rmse against an exhaustive shift search") {
  const BlurKernel line = linear_kernel(0.7, 15.0, 31);
  const BlurKernel d = BlurKernel::delta(1, 1);
  const RealGrid lg = line.to_grid(31, 31), dg = d.to_grid(31, 31);
  double best = 1e300;
  for (long dy = 0; dy < 31; ++dy)
    for (long dx = 0; dx < 31; ++dx) {
      const RealGrid s = circular_shift(lg, {dy, dx});
      double acc = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) acc += (dg.data[j] - s.data[j]) * (dg.data[j] - s.data[j]);
      best = std::min(best, std::sqrt(acc / 961.0));
    }
  CHECK(kernel_rmse(d, line) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("evaluation rows and report") {
  const Image x = synthetic_scene(32, 32, 1, 9);
  const BlurKernel k = linear_kernel(0.0, 5.0, 7);
  const Sample s = synthesize(x, k, 0.0, 1);
  const EvalRow perfect = evaluate_sample("a", x, k, s.y, x, k);
  CHECK(perfect.psnr_db == kDbCap);
  CHECK(perfect.kernel_rmse == 0.0);
  CHECK(perfect.ssim == 1.0);

  // a shifted estimate paired with the oppositely shifted kernel scores the same
  const Shift2D t{2, 1};
  const BlurKernel kt = BlurKernel::from_grid(circular_shift(k.to_grid(32, 32), t), SupportMask::centered(11, 11));
  const Image xt(circular_shift(x.planes[0], -t));
  const EvalRow moved = evaluate_sample("b", xt, kt, s.y, x, k);
  CHECK(moved.psnr_db == kDbCap);
  CHECK(moved.kernel_rmse < 1e-15);

  EvalReport rep;
  rep.rows = {{"p", 10.0, 1.0, 0.5, 0.1}, {"q", 20.0, 3.0, 0.7, 0.3}};
  const EvalRow m = rep.mean();
  CHECK(m.id == "mean");
  CHECK(m.psnr_db == 15.0);
  CHECK(m.isnr_db == 2.0);
  const auto dir = testing::scratch_dir("report");
  write_report_csv(dir / "r.csv", rep);
  std::ifstream in(dir / "r.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample_id,psnr_db,isnr_db,ssim,kernel_rmse");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 3);
  CHECK(last.rfind("mean,", 0) == 0);
}
