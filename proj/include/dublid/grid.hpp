#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dublid {

using Complex = std::complex<double>;

/// Row-major 2D array of doubles.
struct RealGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  RealGrid() = default;
  RealGrid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), data(h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * width + c]; }
  bool same_shape(const RealGrid& o) const noexcept {
    return height == o.height && width == o.width;
  }
  bool operator==(const RealGrid&) const = default;
};

/// Row-major 2D array of complex doubles (spectra).
struct ComplexGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Complex> data;

  ComplexGrid() = default;
  ComplexGrid(std::size_t h, std::size_t w, Complex fill = {})
      : height(h), width(w), data(h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  Complex& operator()(std::size_t r, std::size_t c) { return data[r * width + c]; }
  Complex operator()(std::size_t r, std::size_t c) const { return data[r * width + c]; }
  bool same_shape(const ComplexGrid& o) const noexcept {
    return height == o.height && width == o.width;
  }
};

/// Circular offset. T_s moves content at x to x + s.
struct Shift2D {
  long dy = 0;
  long dx = 0;
  Shift2D operator-() const { return {-dy, -dx}; }
  bool operator==(const Shift2D&) const = default;
};

/// Normalizes offsets into [0, height) x [0, width).
Shift2D normalize(Shift2D s, std::size_t height, std::size_t width);

/// Rectangle of a grid, allowed to wrap around the borders. A negative top
/// or left places the rectangle across the origin.
struct SupportMask {
  long top = 0;
  long left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  /// Mask of size h x w centered on the grid origin (centre tap at (0,0)).
  static SupportMask centered(std::size_t h, std::size_t w);
  bool contains(std::size_t r, std::size_t c, std::size_t grid_h, std::size_t grid_w) const;
};

void require_finite(const RealGrid& g, const char* what);

RealGrid circular_shift(const RealGrid& g, Shift2D s);
RealGrid project(const RealGrid& g, const SupportMask& m);

/// Copies the masked rectangle out as a small array (row-major from the
/// mask's top-left, following wraparound).
RealGrid extract(const RealGrid& g, const SupportMask& m);
/// Inverse of extract: writes `small` into a zero grid of the given size.
RealGrid embed(const RealGrid& small, const SupportMask& m, std::size_t height,
               std::size_t width);

/// Places a small array with its top-left tap at the grid origin.
RealGrid zero_pad(const RealGrid& small, std::size_t height, std::size_t width);

double sum(const RealGrid& g);
double dot(const RealGrid& a, const RealGrid& b);
double squared_norm(const RealGrid& g);
double max_abs_diff(const RealGrid& a, const RealGrid& b);
void axpy(double alpha, const RealGrid& x, RealGrid& y);  // y += alpha * x

/// Numerically stable log(sum(exp(v))). Throws on empty input.
double log_sum_exp(std::span<const double> values);

/// sgn(x) * max(|x| - b, 0), elementwise. Throws if b < 0.
RealGrid soft_threshold(const RealGrid& g, double b);
double soft_threshold(double x, double b);
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace dublid
