#include "dublid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dublid/errors.hpp"
#include "dublid/seeding.hpp"
#include "dublid/spectral.hpp"

namespace dublid {

namespace {

void require_odd(std::size_t size) {
  if (size == 0 || size % 2 == 0) throw InvalidArgument("kernel size must be odd");
}

// Bilinear footprint of a point at (row, col) in grid coordinates.
void splat(RealGrid& g, double row, double col, double weight) {
  const double r0 = std::floor(row), c0 = std::floor(col);
  const double fr = row - r0, fc = col - c0;
  const double wr[2] = {1.0 - fr, fr}, wc[2] = {1.0 - fc, fc};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double w = weight * wr[a] * wc[b];
      if (w == 0.0) continue;
      const double r = r0 + a, c = c0 + b;
      if (r < 0 || c < 0 || r >= static_cast<double>(g.height) || c >= static_cast<double>(g.width))
        continue;
      g(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) += w;
    }
}

BlurKernel normalized_or_delta(RealGrid g) {
  const double s = sum(g);
  if (!(s > 0.0)) return BlurKernel::delta(g.height, g.width);
  for (double& v : g.data) v /= s;
  return BlurKernel{std::move(g)};
}

double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

Point2 catmull_rom(const Point2& p0, const Point2& p1, const Point2& p2, const Point2& p3,
                   double t) {
  const double t2 = t * t, t3 = t2 * t;
  Point2 out{};
  for (int d = 0; d < 2; ++d)
    out[d] = 0.5 * (2.0 * p1[d] + (-p0[d] + p2[d]) * t +
                    (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * t2 +
                    (-p0[d] + 3.0 * p1[d] - 3.0 * p2[d] + p3[d]) * t3);
  return out;
}

}  // namespace

BlurKernel linear_kernel(double angle, double length, std::size_t size) {
  require_odd(size);
  if (!(length >= 1.0) || !std::isfinite(angle))
    throw InvalidArgument("linear kernel: length must be at least 1");
  const double centre = static_cast<double>(size - 1) / 2.0;
  const double dr = snap(-std::sin(angle)), dc = snap(std::cos(angle));
  const double half = (length - 1.0) / 2.0;
  const std::size_t n =
      half > 0.0 ? static_cast<std::size_t>(std::ceil(2.0 * half / 0.05)) + 1 : 1;
  RealGrid g(size, size);
  for (std::size_t s = 0; s < n; ++s) {
    const double t = n == 1 ? 0.0 : -half + 2.0 * half * static_cast<double>(s) / static_cast<double>(n - 1);
    splat(g, centre + t * dr, centre + t * dc, 1.0);
  }
  return normalized_or_delta(std::move(g));
}

std::vector<BlurKernel> linear_kernels(std::size_t n_angles, std::size_t n_lengths,
                                       double min_len, double max_len, std::size_t size) {
  if (n_angles == 0 || n_lengths == 0) throw InvalidArgument("linear kernels: empty grid");
  if (!(min_len >= 1.0) || !(max_len >= min_len))
    throw InvalidArgument("linear kernels: need 1 <= min_len <= max_len");
  std::vector<BlurKernel> out;
  for (std::size_t a = 0; a < n_angles; ++a) {
    const double angle = std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
    for (std::size_t l = 0; l < n_lengths; ++l) {
      const double len = n_lengths == 1 ? min_len
                                        : min_len + (max_len - min_len) * static_cast<double>(l) /
                                                        static_cast<double>(n_lengths - 1);
      out.push_back(linear_kernel(angle, len, size));
    }
  }
  return out;
}

BlurKernel trajectory_kernel(const Trajectory& t, std::size_t size) {
  require_odd(size);
  if (t.points.size() < 2) throw InvalidArgument("trajectory: need at least two points");
  const double cr = std::cos(t.rotation), sr = std::sin(t.rotation);
  std::vector<Point2> pts;
  for (const Point2& p : t.points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
      throw InvalidArgument("trajectory: non-finite point");
    pts.push_back({t.scale * (cr * p[0] - sr * p[1]), t.scale * (sr * p[0] + cr * p[1])});
  }
  const double centre = static_cast<double>(size - 1) / 2.0;
  RealGrid g(size, size);
  const std::size_t per_segment = 16;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2& p0 = pts[i == 0 ? 0 : i - 1];
    const Point2& p3 = pts[std::min(i + 2, pts.size() - 1)];
    for (std::size_t s = 0; s < per_segment; ++s) {
      const Point2 q = catmull_rom(p0, pts[i], pts[i + 1], p3,
                                   static_cast<double>(s) / static_cast<double>(per_segment));
      splat(g, centre + q[0], centre + q[1], 1.0);
    }
  }
  splat(g, centre + pts.back()[0], centre + pts.back()[1], 1.0);
  return normalized_or_delta(std::move(g));
}

Trajectory random_trajectory(std::uint64_t seed, std::size_t steps) {
  if (steps < 2) throw InvalidArgument("trajectory: need at least two steps");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double momentum = 0.85;
  Trajectory t;
  Point2 pos{0.0, 0.0}, vel{n01(rng), n01(rng)};
  for (std::size_t s = 0; s < steps; ++s) {
    t.points.push_back(pos);
    vel = {momentum * vel[0] + 0.5 * n01(rng), momentum * vel[1] + 0.5 * n01(rng)};
    pos = {pos[0] + vel[0], pos[1] + vel[1]};
  }
  Point2 mean{0.0, 0.0};
  for (const Point2& p : t.points) {
    mean[0] += p[0];
    mean[1] += p[1];
  }
  mean[0] /= static_cast<double>(steps);
  mean[1] /= static_cast<double>(steps);
  double extent = 0.0;
  for (Point2& p : t.points) {
    p = {p[0] - mean[0], p[1] - mean[1]};
    extent = std::max(extent, std::hypot(p[0], p[1]));
  }
  if (extent > 0.0)
    for (Point2& p : t.points) p = {p[0] / extent, p[1] / extent};
  return t;
}

std::vector<BlurKernel> trajectory_kernels(std::size_t count, std::size_t size,
                                           std::uint64_t seed) {
  require_odd(size);
  const double reach = static_cast<double>(size - 1) / 2.0;
  const double scales[4] = {0.25, 0.5, 0.75, 1.0};
  std::vector<BlurKernel> out;
  for (std::size_t i = 0; i < count; ++i) {
    Trajectory t = random_trajectory(derive_seed(seed, i));
    for (double s : scales)
      for (int r = 0; r < 8; ++r) {
        t.scale = s * reach;
        t.rotation = std::numbers::pi * static_cast<double>(r) / 4.0;
        out.push_back(trajectory_kernel(t, size));
      }
  }
  return out;
}

Sample synthesize(const Image& x, const BlurKernel& k, double noise_std, std::uint64_t seed) {
  validate(x);
  if (!(noise_std >= 0.0)) throw InvalidArgument("synthesize: noise_std must be non-negative");
  if (k.taps.height > x.height() || k.taps.width > x.width())
    throw InvalidArgument("synthesize: kernel larger than image");
  Sample s{x, k, Image{}, noise_std, seed};
  const ComplexGrid k_hat = dft2(k.to_grid(x.height(), x.width()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const RealGrid& plane : x.planes) {
    ComplexGrid spec = dft2(plane);
    for (std::size_t i = 0; i < spec.size(); ++i) spec.data[i] *= k_hat.data[i];
    RealGrid y = idft2(spec);
    if (noise_std > 0.0)
      for (double& v : y.data) v += noise_std * noise(rng);
    s.y.planes.push_back(std::move(y));
  }
  return s;
}

Image synthetic_scene(std::size_t height, std::size_t width, std::size_t planes,
                      std::uint64_t seed) {
  if (height == 0 || width == 0 || (planes != 1 && planes != 3))
    throw InvalidArgument("scene: bad dimensions");
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double h = static_cast<double>(height), w = static_cast<double>(width);

  Image img;
  for (std::size_t p = 0; p < planes; ++p) img.planes.emplace_back(height, width);
  std::vector<double> base(planes), gr(planes), gc(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    base[p] = u(0.3, 0.7);
    gr[p] = u(-0.2, 0.2);
    gc[p] = u(-0.2, 0.2);
  }
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        img.planes[p](r, c) = base[p] + gr[p] * (r / h - 0.5) + gc[p] * (c / w - 0.5);

  const int shapes = static_cast<int>(u(6.0, 14.0));
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = u(0.0, 1.0) < 0.5;
    const double cy = u(0.0, h), cx = u(0.0, w);
    const double ry = u(0.05, 0.3) * h, rx = u(0.05, 0.3) * w;
    std::vector<double> level(planes);
    for (double& v : level) v = u(0.05, 0.95);
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const double dy = (r - cy) / ry, dx = (c - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0
                                    : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside)
          for (std::size_t p = 0; p < planes; ++p) img.planes[p](r, c) = level[p];
      }
  }
  for (auto& plane : img.planes)
    for (double& v : plane.data) v = std::clamp(v, 0.05, 0.95);
  return img;
}

}  // namespace dublid
