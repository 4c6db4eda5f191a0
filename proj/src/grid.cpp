#include "dublid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dublid/errors.hpp"

namespace dublid {

namespace {

std::size_t wrap(long v, std::size_t n) {
  const long m = static_cast<long>(n);
  long r = v % m;
  if (r < 0) r += m;
  return static_cast<std::size_t>(r);
}

}  // namespace

Shift2D normalize(Shift2D s, std::size_t height, std::size_t width) {
  return {static_cast<long>(wrap(s.dy, height)), static_cast<long>(wrap(s.dx, width))};
}

SupportMask SupportMask::centered(std::size_t h, std::size_t w) {
  return {-static_cast<long>((h - 1) / 2), -static_cast<long>((w - 1) / 2), h, w};
}

bool SupportMask::contains(std::size_t r, std::size_t c, std::size_t grid_h,
                           std::size_t grid_w) const {
  if (height == 0 || width == 0) return false;
  const std::size_t dr = wrap(static_cast<long>(r) - top, grid_h);
  const std::size_t dc = wrap(static_cast<long>(c) - left, grid_w);
  return dr < height && dc < width;
}

void require_finite(const RealGrid& g, const char* what) {
  if (g.data.size() != g.height * g.width)
    throw InvalidArgument(std::string(what) + ": data length does not match dimensions");
  for (double v : g.data)
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite sample");
}

RealGrid circular_shift(const RealGrid& g, Shift2D s) {
  RealGrid out(g.height, g.width);
  if (g.size() == 0) return out;
  const Shift2D n = normalize(s, g.height, g.width);
  for (std::size_t r = 0; r < g.height; ++r) {
    const std::size_t rr = (r + static_cast<std::size_t>(n.dy)) % g.height;
    for (std::size_t c = 0; c < g.width; ++c)
      out(rr, (c + static_cast<std::size_t>(n.dx)) % g.width) = g(r, c);
  }
  return out;
}

RealGrid project(const RealGrid& g, const SupportMask& m) {
  if (m.height > g.height || m.width > g.width)
    throw InvalidArgument("project: support mask larger than grid");
  RealGrid out(g.height, g.width);
  for (std::size_t i = 0; i < m.height; ++i) {
    const std::size_t r = wrap(m.top + static_cast<long>(i), g.height);
    for (std::size_t j = 0; j < m.width; ++j) {
      const std::size_t c = wrap(m.left + static_cast<long>(j), g.width);
      out(r, c) = g(r, c);
    }
  }
  return out;
}

RealGrid extract(const RealGrid& g, const SupportMask& m) {
  if (m.height > g.height || m.width > g.width)
    throw InvalidArgument("extract: support mask larger than grid");
  RealGrid out(m.height, m.width);
  for (std::size_t i = 0; i < m.height; ++i) {
    const std::size_t r = wrap(m.top + static_cast<long>(i), g.height);
    for (std::size_t j = 0; j < m.width; ++j)
      out(i, j) = g(r, wrap(m.left + static_cast<long>(j), g.width));
  }
  return out;
}

RealGrid embed(const RealGrid& small, const SupportMask& m, std::size_t height,
               std::size_t width) {
  if (small.height != m.height || small.width != m.width)
    throw InvalidArgument("embed: array does not match mask");
  if (m.height > height || m.width > width)
    throw InvalidArgument("embed: mask larger than grid");
  RealGrid out(height, width);
  for (std::size_t i = 0; i < m.height; ++i) {
    const std::size_t r = wrap(m.top + static_cast<long>(i), height);
    for (std::size_t j = 0; j < m.width; ++j)
      out(r, wrap(m.left + static_cast<long>(j), width)) = small(i, j);
  }
  return out;
}

RealGrid zero_pad(const RealGrid& small, std::size_t height, std::size_t width) {
  return embed(small, SupportMask{0, 0, small.height, small.width}, height, width);
}

double sum(const RealGrid& g) {
  double s = 0.0;
  for (double v : g.data) s += v;
  return s;
}

double dot(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double squared_norm(const RealGrid& g) { return dot(g, g); }

double max_abs_diff(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

void axpy(double alpha, const RealGrid& x, RealGrid& y) {
  if (!x.same_shape(y)) throw InvalidArgument("axpy: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) throw NumericalError("log_sum_exp: non-finite input");
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double soft_threshold(double x, double b) { return relu(x - b) - relu(-x - b); }

RealGrid soft_threshold(const RealGrid& g, double b) {
  if (!(b >= 0.0)) throw InvalidArgument("soft_threshold: negative threshold");
  RealGrid out(g.height, g.width);
  for (std::size_t i = 0; i < g.size(); ++i) out.data[i] = soft_threshold(g.data[i], b);
  return out;
}

}  // namespace dublid
