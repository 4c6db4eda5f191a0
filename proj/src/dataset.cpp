#include "dublid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dublid/datagen.hpp"
#include "dublid/errors.hpp"
#include "dublid/seeding.hpp"
#include "dublid/tensor_io.hpp"

namespace fs = std::filesystem;

namespace dublid {

namespace {

const char* image_ext(const Image& img) { return img.plane_count() == 3 ? ".ppm" : ".pgm"; }

fs::path find_image(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".pgm", ".ppm"}) {
    const fs::path p = dir / (id + ext);
    if (fs::exists(p)) return p;
  }
  throw IoError((dir / id).string(), "no .pgm or .ppm image for sample");
}

// Round-trips through 8 bits so stored sharp images equal what was blurred.
Image quantize(Image img) {
  for (auto& plane : img.planes)
    for (double& v : plane.data) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

std::string seed_text(std::uint64_t v) { return std::to_string(v); }

std::string noise_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_kernel(const fs::path& path, const BlurKernel& k) { save_tensor(path, to_tensor(k.taps)); }

BlurKernel load_kernel(const fs::path& path) {
  const Tensor t = load_tensor(path);
  if (t.dims.size() != 2) throw IoError(path.string(), "kernel tensor must be 2-D");
  BlurKernel k{to_grid(t)};
  if (k.taps.height % 2 == 0 || k.taps.width % 2 == 0)
    throw IoError(path.string(), "kernel extents must be odd");
  double s = 0.0;
  for (double v : k.taps.data) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw IoError(path.string(), "kernel has negative or non-finite taps");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw IoError(path.string(), "kernel does not sum to 1");
  return k;
}

std::vector<std::pair<std::string, BlurKernel>> load_kernel_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".dblt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, BlurKernel>> out;
  for (const auto& f : files) out.emplace_back(f.stem().string(), load_kernel(f));
  if (out.empty()) throw IoError(dir.string(), "no .dblt kernels found");
  return out;
}

void save_image_exact(const fs::path& path, const Image& img) {
  validate(img);
  Tensor t;
  t.dims = {img.plane_count(), img.height(), img.width()};
  for (const auto& p : img.planes) t.values.insert(t.values.end(), p.data.begin(), p.data.end());
  save_tensor(path, t);
}

Image load_image_exact(const fs::path& path) {
  const Tensor t = load_tensor(path);
  if (t.dims.size() != 3 || (t.dims[0] != 1 && t.dims[0] != 3))
    throw IoError(path.string(), "image tensor must be planes x H x W with 1 or 3 planes");
  Image img;
  const std::size_t h = t.dims[1], w = t.dims[2];
  for (std::size_t p = 0; p < t.dims[0]; ++p) {
    RealGrid g(h, w);
    std::copy(t.values.begin() + static_cast<std::ptrdiff_t>(p * h * w),
              t.values.begin() + static_cast<std::ptrdiff_t>((p + 1) * h * w), g.data.begin());
    img.planes.push_back(std::move(g));
  }
  try {
    validate(img);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string(), e.what());
  }
  return img;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  if (ds.entries.size() != ds.samples.size())
    throw InvalidArgument("dataset: entries and samples differ in length");
  std::error_code ec;
  for (const char* sub : {"kernels", "sharp", "blurred"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError((dir / sub).string(), ec.message());
  }
  std::map<std::string, const BlurKernel*> kernels;
  std::string manifest = "sample_id,kernel_id,seed,noise_std\n";
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const DatasetEntry& e = ds.entries[i];
    const TrainSample& s = ds.samples[i];
    kernels.emplace(e.kernel_id, &s.k);
    write_pnm(dir / "sharp" / (e.sample_id + image_ext(s.x)), s.x);
    write_pnm(dir / "blurred" / (e.sample_id + image_ext(s.y)), s.y);
    save_image_exact(dir / "blurred" / (e.sample_id + ".dblt"), s.y);
    manifest += e.sample_id + ',' + e.kernel_id + ',' + seed_text(e.seed) + ',' +
                noise_text(e.noise_std) + '\n';
  }
  for (const auto& [id, k] : kernels) save_kernel(dir / "kernels" / (id + ".dblt"), *k);
  write_file_atomic(dir / "manifest.csv", manifest);
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.csv";
  std::istringstream in(read_file(mpath));
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_id,kernel_id", 0) != 0)
    throw IoError(mpath.string(), "missing manifest header");
  Dataset ds;
  std::map<std::string, BlurKernel> cache;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 4)
      throw IoError(mpath.string(), "line " + std::to_string(lineno) + ": expected 4 fields");
    DatasetEntry e;
    e.sample_id = f[0];
    e.kernel_id = f[1];
    try {
      e.seed = std::stoull(f[2]);
      e.noise_std = std::stod(f[3]);
    } catch (const std::exception&) {
      throw IoError(mpath.string(), "line " + std::to_string(lineno) + ": bad number");
    }
    auto it = cache.find(e.kernel_id);
    if (it == cache.end())
      it = cache.emplace(e.kernel_id, load_kernel(dir / "kernels" / (e.kernel_id + ".dblt"))).first;
    TrainSample s;
    s.k = it->second;
    s.x = read_pnm(find_image(dir / "sharp", e.sample_id));
    const fs::path exact = dir / "blurred" / (e.sample_id + ".dblt");
    s.y = fs::exists(exact) ? load_image_exact(exact) : read_pnm(find_image(dir / "blurred", e.sample_id));
    if (s.y.plane_count() != s.x.plane_count() || s.y.height() != s.x.height() ||
        s.y.width() != s.x.width())
      throw IoError(dir.string(), "sample " + e.sample_id + ": sharp and blurred shapes differ");
    ds.entries.push_back(std::move(e));
    ds.samples.push_back(std::move(s));
  }
  if (ds.entries.empty()) throw IoError(mpath.string(), "manifest lists no samples");
  return ds;
}

Dataset synthesize_dataset(const std::vector<std::pair<std::string, BlurKernel>>& kernels,
                           std::size_t count, std::size_t size, std::size_t planes,
                           double noise_std, std::uint64_t seed) {
  if (kernels.empty()) throw InvalidArgument("dataset: no kernels to draw from");
  Dataset ds;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    const std::size_t pick = static_cast<std::size_t>(splitmix64(s) % kernels.size());
    const Image x = quantize(synthetic_scene(size, size, planes, splitmix64(s + 1)));
    const Sample smp = synthesize(x, kernels[pick].second, noise_std, s);
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    ds.entries.push_back({id, kernels[pick].first, s, noise_std});
    ds.samples.push_back({smp.y, smp.x, smp.k});
  }
  return ds;
}

}  // namespace dublid
