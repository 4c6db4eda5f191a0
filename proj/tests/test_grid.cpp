#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "dublid/errors.hpp"
#include "dublid/grid.hpp"
#include "support.hpp"

using namespace dublid;

TEST_CASE("circular_shift moves an impulse and inverts exactly") {
  RealGrid g(5, 7);
  g(0, 0) = 1.0;
  const RealGrid s = circular_shift(g, {1, 2});
  CHECK(s(1, 2) == 1.0);
  CHECK(sum(s) == 1.0);

  std::mt19937_64 rng(3);
  const RealGrid r = testing::random_grid(rng, 6, 9);
  CHECK(circular_shift(r, {0, 0}) == r);
  CHECK(circular_shift(circular_shift(r, {4, -11}), {-4, 11}) == r);
  CHECK(squared_norm(circular_shift(r, {2, 3})) == squared_norm(r));
  // composition adds offsets modulo the grid
  CHECK(circular_shift(circular_shift(r, {2, 5}), {5, 6}) == circular_shift(r, {7 - 6, 11 - 9}));
}

TEST_CASE("normalize wraps offsets into the grid") {
  CHECK(normalize({-1, -10}, 4, 7) == Shift2D{3, 4});
  CHECK(normalize({9, 7}, 4, 7) == Shift2D{1, 0});
}

TEST_CASE("project is idempotent and respects the mask") {
  std::mt19937_64 rng(5);
  const RealGrid r = testing::random_grid(rng, 8, 8);
  CHECK(project(r, SupportMask{0, 0, 8, 8}) == r);
  const SupportMask m = SupportMask::centered(3, 5);
  const RealGrid p = project(r, m);
  CHECK(project(p, m) == p);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      if (m.contains(i, j, 8, 8)) {
        ++kept;
        CHECK(p(i, j) == r(i, j));
      } else {
        CHECK(p(i, j) == 0.0);
      }
    }
  CHECK(kept == 15);
  CHECK(sum(project(r, SupportMask{0, 0, 0, 0})) == 0.0);
  CHECK_THROWS_AS(project(r, SupportMask{0, 0, 9, 1}), InvalidArgument);
}

TEST_CASE("centered mask wraps around the origin") {
  const SupportMask m = SupportMask::centered(3, 3);
  CHECK(m.contains(0, 0, 10, 10));
  CHECK(m.contains(9, 9, 10, 10));
  CHECK(m.contains(1, 9, 10, 10));
  CHECK_FALSE(m.contains(2, 0, 10, 10));
  CHECK_FALSE(m.contains(0, 8, 10, 10));
}

TEST_CASE("extract and embed are inverse on the mask") {
  std::mt19937_64 rng(7);
  const RealGrid small = testing::random_grid(rng, 5, 3);
  const SupportMask m = SupportMask::centered(5, 3);
  const RealGrid big = embed(small, m, 12, 10);
  CHECK(extract(big, m) == small);
  CHECK(big(0, 0) == small(2, 1));
  CHECK(big(10, 9) == small(0, 0));
  CHECK(zero_pad(small, 12, 10)(0, 0) == small(0, 0));
  CHECK_THROWS_AS(embed(small, SupportMask::centered(3, 3), 12, 10), InvalidArgument);
}

TEST_CASE("log_sum_exp closed forms") {
  const std::vector<double> one{0.25};
  CHECK(log_sum_exp(one) == 0.25);
  const std::vector<double> same(6, -2.0);
  CHECK(log_sum_exp(same) == doctest::Approx(-2.0 + std::log(6.0)).epsilon(1e-15));
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> mixed{-3.0, 0.5, 2.0, 1.0};
  const double v = log_sum_exp(mixed);
  CHECK(v >= 2.0);
  CHECK(v <= 2.0 + std::log(4.0));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{std::nan("")}), NumericalError);
}

TEST_CASE("soft threshold closed forms") {
  CHECK(soft_threshold(1.2, 0.5) == doctest::Approx(0.7));
  CHECK(soft_threshold(-1.2, 0.5) == doctest::Approx(-0.7));
  CHECK(soft_threshold(0.0, 0.3) == 0.0);
  CHECK(soft_threshold(0.5, 0.5) == 0.0);
  CHECK(soft_threshold(-0.5, 0.5) == 0.0);
  CHECK(soft_threshold(0.123, 0.0) == 0.123);
  CHECK(soft_threshold(-7.5, 0.0) == -7.5);
  CHECK_THROWS_AS(soft_threshold(RealGrid(2, 2), -1e-9), InvalidArgument);
}

TEST_CASE("require_finite rejects NaN and infinity") {
  RealGrid g(2, 2);
  CHECK_NOTHROW(require_finite(g, "g"));
  g(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(g, "g"), NumericalError);
}
