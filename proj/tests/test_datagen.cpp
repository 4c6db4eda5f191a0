#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dublid/datagen.hpp"
#include "dublid/errors.hpp"
#include "dublid/metrics.hpp"

using namespace dublid;

namespace {

void check_simplex(const BlurKernel& k) {
  CHECK(std::abs(sum(k.taps) - 1.0) <= 1e-12);
  for (double v : k.taps.data) CHECK(v >= 0.0);
}

RealGrid transpose(const RealGrid& g) {
  RealGrid t(g.width, g.height);
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c) t(c, r) = g(r, c);
  return t;
}

}  // namespace

TEST_CASE("default linear kernel bank") {
  const auto ks = linear_kernels();
  CHECK(ks.size() == 256);
  for (const auto& k : ks) {
    CHECK(k.taps.height == 31);
    check_simplex(k);
  }
  CHECK(linear_kernels(4, 3, 5, 9, 15).size() == 12);
}

TEST_CASE("horizontal kernel is confined to the central row and symmetric") {
  const BlurKernel k = linear_kernel(0.0, 5.0, 31);
  check_simplex(k);
  for (std::size_t r = 0; r < 31; ++r)
    for (std::size_t c = 0; c < 31; ++c) {
      if (r != 15) CHECK(k.taps(r, c) == 0.0);
      CHECK(k.taps(r, c) == doctest::Approx(k.taps(r, 30 - c)).epsilon(1e-12));
    }
  CHECK(k.taps(15, 15) > 0.0);
  CHECK(k.taps(15, 18) == 0.0);
}

TEST_CASE("vertical kernel is the transpose of the horizontal one") {
  for (double len : {5.0, 8.0, 12.5}) {
    const RealGrid h = linear_kernel(0.0, len, 21).taps;
    const RealGrid v = linear_kernel(M_PI / 2.0, len, 21).taps;
    CHECK(max_abs_diff(v, transpose(h)) < 1e-12);
  }
}

TEST_CASE("invalid linear kernel arguments") {
  CHECK_THROWS_AS(linear_kernel(0.0, 5.0, 30), InvalidArgument);
  CHECK_THROWS_AS(linear_kernel(0.0, 0.5, 31), InvalidArgument);
}

TEST_CASE("trajectory kernels") {
  Trajectory still{{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}, 3.0, 0.7};
  const BlurKernel d = trajectory_kernel(still, 9);
  CHECK(d.taps(4, 4) == doctest::Approx(1.0).epsilon(1e-12));
  check_simplex(d);

  const auto set = trajectory_kernels(2, 15, 77);
  CHECK(set.size() == 64);
  for (const auto& k : set) check_simplex(k);
  const auto again = trajectory_kernels(2, 15, 77);
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(set[i] == again[i]);
  CHECK_FALSE(trajectory_kernels(2, 15, 78)[5] == set[5]);

  const Trajectory t = random_trajectory(5);
  CHECK(t.points.size() >= 2);
  double radius = 0.0;
  for (const auto& p : t.points) radius = std::max(radius, std::hypot(p[0], p[1]));
  CHECK(radius == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("synthesis without noise and with a delta is the identity") {
  const Image x = synthetic_scene(24, 20, 3, 3);
  const Sample s = synthesize(x, BlurKernel::delta(5, 5), 0.0, 1);
  for (std::size_t c = 0; c < 3; ++c) CHECK(max_abs_diff(s.y.planes[c], x.planes[c]) < 1e-14);
  CHECK(s.noise_std == 0.0);
}

TEST_CASE("noise has the requested variance") {
  const Image flat(RealGrid(256, 256, 0.5));
  const Sample s = synthesize(flat, BlurKernel::delta(3, 3), 0.01, 123);
  double mean = 0.0, var = 0.0;
  for (double v : s.y.planes[0].data) mean += v - 0.5;
  mean /= 65536.0;
  for (double v : s.y.planes[0].data) var += (v - 0.5 - mean) * (v - 0.5 - mean);
  var /= 65535.0;
  CHECK(std::abs(var - 1e-4) < 0.05 * 1e-4);
}

TEST_CASE("synthesis is reproducible") {
  const Image x = synthetic_scene(32, 32, 1, 8);
  const BlurKernel k = linear_kernel(0.3, 7.0, 11);
  const Sample a = synthesize(x, k, 0.01, 55);
  const Sample b = synthesize(x, k, 0.01, 55);
  CHECK(a.y == b.y);
  CHECK(psnr(a.y, x).value == psnr(b.y, x).value);
  CHECK_FALSE(synthesize(x, k, 0.01, 56).y == a.y);
  CHECK(synthetic_scene(32, 32, 1, 8) == x);
  for (double v : x.planes[0].data) {
    CHECK(v >= 0.05);
    CHECK(v <= 0.95);
  }
}
