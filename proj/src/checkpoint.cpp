#include "dublid/checkpoint.hpp"

#include <cmath>
#include <map>
#include <string>

#include "dublid/errors.hpp"

namespace dublid {

namespace {

Tensor vector_tensor(const std::vector<double>& v) { return {{v.size()}, v}; }

Tensor filter_bank_tensor(const std::vector<std::vector<RealGrid>>& bank) {
  Tensor t;
  const std::size_t out = bank.size(), in = out ? bank[0].size() : 0;
  t.dims = {out, in, 3, 3};
  for (const auto& row : bank)
    for (const auto& f : row) t.values.insert(t.values.end(), f.data.begin(), f.data.end());
  return t;
}

std::vector<std::vector<RealGrid>> filter_bank_from(const Tensor& t, std::size_t out,
                                                    std::size_t in) {
  if (t.dims != std::vector<std::uint64_t>{out, in, 3, 3})
    throw InvalidArgument("checkpoint: filter bank has unexpected shape");
  std::vector<std::vector<RealGrid>> bank(out, std::vector<RealGrid>(in, RealGrid(3, 3)));
  std::size_t k = 0;
  for (auto& row : bank)
    for (auto& f : row)
      for (double& v : f.data) v = t.values[k++];
  return bank;
}

const Tensor& lookup(const std::map<std::string, const Tensor*>& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw InvalidArgument("checkpoint: missing tensor " + name);
  return *it->second;
}

std::vector<double> vector_from(const Tensor& t, std::size_t n, const std::string& name) {
  if (t.dims != std::vector<std::uint64_t>{n})
    throw InvalidArgument("checkpoint: tensor " + name + " has unexpected shape");
  return t.values;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e9)
    throw InvalidArgument(std::string("checkpoint: bad meta field ") + what);
  return static_cast<std::size_t>(v);
}

}  // namespace

void append_learnables(NamedTensors& out, const std::string& prefix, const Learnables& v) {
  for (std::size_t l = 0; l < v.w.size(); ++l) {
    const std::string idx = std::to_string(l + 1);
    out.emplace_back(prefix + "w." + idx, filter_bank_tensor(v.w[l]));
    out.emplace_back(prefix + "b." + idx, vector_tensor(v.b[l]));
    out.emplace_back(prefix + "zeta." + idx, vector_tensor(v.zeta[l]));
  }
  out.emplace_back(prefix + "beta", vector_tensor(v.beta));
  out.emplace_back(prefix + "eta", vector_tensor(v.eta));
}

Learnables read_learnables(const NamedTensors& in, const std::string& prefix,
                           const Learnables& shape) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : in) by_name[name] = &t;
  Learnables v = shape;
  for (std::size_t l = 0; l < shape.w.size(); ++l) {
    const std::string idx = std::to_string(l + 1);
    const std::size_t out = shape.w[l].size(), inn = out ? shape.w[l][0].size() : 0;
    v.w[l] = filter_bank_from(lookup(by_name, prefix + "w." + idx), out, inn);
    v.b[l] = vector_from(lookup(by_name, prefix + "b." + idx), shape.b[l].size(), prefix + "b." + idx);
    v.zeta[l] = vector_from(lookup(by_name, prefix + "zeta." + idx), shape.zeta[l].size(),
                            prefix + "zeta." + idx);
  }
  v.beta = vector_from(lookup(by_name, prefix + "beta"), shape.beta.size(), prefix + "beta");
  v.eta = vector_from(lookup(by_name, prefix + "eta"), shape.eta.size(), prefix + "eta");
  return v;
}

NamedTensors to_named(const NetworkParams& p) {
  validate(p);
  NamedTensors out;
  append_learnables(out, "", p.values);
  out.emplace_back("meta", vector_tensor({static_cast<double>(p.layers),
                                          static_cast<double>(p.channels),
                                          static_cast<double>(p.planes),
                                          static_cast<double>(p.kernel_h),
                                          static_cast<double>(p.kernel_w), p.epsilon}));
  return out;
}

NetworkParams from_named(const NamedTensors& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : entries) by_name[name] = &t;
  const auto meta = vector_from(lookup(by_name, "meta"), 6, "meta");
  NetworkParams p;
  p.layers = as_count(meta[0], "L");
  p.channels = as_count(meta[1], "C");
  p.planes = as_count(meta[2], "planes");
  p.kernel_h = as_count(meta[3], "k_h");
  p.kernel_w = as_count(meta[4], "k_w");
  p.epsilon = meta[5];
  if (p.layers == 0 || p.channels == 0) throw InvalidArgument("checkpoint: empty network");

  Learnables shape;
  for (std::size_t l = 0; l < p.layers; ++l) {
    const std::size_t in = (l + 1 == p.layers) ? p.planes : p.channels;
    shape.w.emplace_back(p.channels, std::vector<RealGrid>(in, RealGrid(3, 3)));
    shape.b.emplace_back(p.channels, 0.0);
    shape.zeta.emplace_back(p.channels, 0.0);
  }
  shape.beta.assign(p.layers, 0.0);
  shape.eta.assign(p.channels, 0.0);
  p.values = read_learnables(entries, "", shape);
  validate(p);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& p) {
  save_named(path, to_named(p));
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  const NamedTensors entries = load_named(path);
  try {
    return from_named(entries);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string(), e.what());
  }
}

}  // namespace dublid
