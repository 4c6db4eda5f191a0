#include "dublid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dublid/backprop.hpp"
#include "dublid/errors.hpp"
#include "dublid/tensor_io.hpp"

namespace dublid {

namespace {

double squared_distance(const Image& a, const Image& b) {
  if (a.plane_count() != b.plane_count() || a.height() != b.height() || a.width() != b.width())
    throw InvalidArgument("metrics: image shapes differ");
  double acc = 0.0;
  for (std::size_t p = 0; p < a.plane_count(); ++p)
    for (std::size_t k = 0; k < a.planes[p].size(); ++k) {
      const double d = a.planes[p].data[k] - b.planes[p].data[k];
      acc += d * d;
    }
  return acc;
}

Decibels ratio_db(double num, double den) {
  if (den == 0.0) return {kDbCap, true};
  const double v = 10.0 * std::log10(num / den);
  if (v >= kDbCap) return {kDbCap, true};
  return {v, false};
}

std::vector<double> gaussian_window() {
  std::vector<double> w(11);
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Decibels psnr(const Image& a, const Image& b) {
  const double n = static_cast<double>(a.plane_count() * a.height() * a.width());
  if (n == 0.0) throw InvalidArgument("psnr: empty image");
  return ratio_db(1.0, squared_distance(a, b) / n);
}

Decibels isnr(const Image& x_est, const Image& y, const Image& x) {
  return ratio_db(squared_distance(y, x), squared_distance(x_est, x));
}

double ssim(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("ssim: shapes differ");
  if (a.height < 11 || a.width < 11) throw InvalidArgument("ssim: image smaller than the window");
  static const std::vector<double> g = gaussian_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + 11 <= a.height; ++r)
    for (std::size_t c = 0; c + 11 <= a.width; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double w = g[i] * g[j];
          const double va = a(r + i, c + j), vb = b(r + i, c + j);
          ma += w * va;
          mb += w * vb;
          saa += w * (va * va);
          sbb += w * (vb * vb);
          sab += w * (va * vb);  // same grouping for all three: exact symmetry and ssim(a, a) == 1
        }
      const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

double ssim(const Image& a, const Image& b) {
  if (a.plane_count() != b.plane_count() || a.plane_count() == 0)
    throw InvalidArgument("ssim: plane count mismatch");
  double s = 0.0;
  for (std::size_t p = 0; p < a.plane_count(); ++p) s += ssim(a.planes[p], b.planes[p]);
  return s / static_cast<double>(a.plane_count());
}

double kernel_rmse(const BlurKernel& estimate, const BlurKernel& truth) {
  if (estimate.taps.size() == 0 || truth.taps.size() == 0)
    throw InvalidArgument("kernel_rmse: empty kernel");
  const std::size_t h = std::max(estimate.taps.height, truth.taps.height);
  const std::size_t w = std::max(estimate.taps.width, truth.taps.width);
  const RealGrid a = estimate.to_grid(h, w), b = truth.to_grid(h, w);
  const RealGrid bs = circular_shift(b, align_shift(a, b));
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.data[k] - bs.data[k];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

EvalRow evaluate_sample(const std::string& id, const Image& x_est, const BlurKernel& k_est,
                        const Image& y, const Image& x, const BlurKernel& k) {
  const std::size_t h = x.height(), w = x.width();
  const Shift2D tau = align_shift(k_est.to_grid(h, w), k.to_grid(h, w));
  Image aligned;
  for (const auto& p : x_est.planes) aligned.planes.push_back(circular_shift(p, tau));
  EvalRow row{id};
  row.psnr_db = psnr(aligned, x).value;
  row.isnr_db = isnr(aligned, y, x).value;
  row.ssim = ssim(aligned, x);
  row.kernel_rmse = kernel_rmse(k_est, k);
  return row;
}

EvalRow EvalReport::mean() const {
  EvalRow m{"mean"};
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.psnr_db += r.psnr_db;
    m.isnr_db += r.isnr_db;
    m.ssim += r.ssim;
    m.kernel_rmse += r.kernel_rmse;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr_db /= n;
  m.isnr_db /= n;
  m.ssim /= n;
  m.kernel_rmse /= n;
  return m;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::string out = "sample_id,psnr_db,isnr_db,ssim,kernel_rmse\n";
  auto line = [&](const EvalRow& r) {
    out += r.id + ',' + fmt(r.psnr_db) + ',' + fmt(r.isnr_db) + ',' + fmt(r.ssim) + ',' +
           fmt(r.kernel_rmse) + '\n';
  };
  for (const auto& r : report.rows) line(r);
  line(report.mean());
  write_file_atomic(path, out);
}

}  // namespace dublid
