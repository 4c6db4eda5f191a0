#include "dublid/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

#include "dublid/errors.hpp"

namespace dublid {

namespace {

constexpr char kMagic[4] = {'D', 'B', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw std::runtime_error("truncated tensor stream");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor to_tensor(const RealGrid& g) { return {{g.height, g.width}, g.data}; }

RealGrid to_grid(const Tensor& t) {
  if (t.dims.size() != 2) throw InvalidArgument("tensor is not rank 2");
  RealGrid g(t.dims[0], t.dims[1]);
  g.data = t.values;
  return g;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.dims.size() > 255) throw InvalidArgument("tensor rank exceeds 255");
  if (t.element_count() != t.values.size())
    throw InvalidArgument("tensor payload does not match dims");
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(os, d);
  for (double v : t.values) put_le<double>(os, v);
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad DBLT magic");
  const int version = is.get();
  if (version != kVersion) throw std::runtime_error("unsupported DBLT version");
  const int rank = is.get();
  if (rank < 0) throw std::runtime_error("truncated DBLT header");
  Tensor t;
  t.dims.resize(static_cast<std::size_t>(rank));
  for (auto& d : t.dims) d = get_le<std::uint64_t>(is);
  const std::uint64_t n = t.element_count();
  if (n > (std::uint64_t{1} << 34)) throw std::runtime_error("DBLT tensor too large");
  t.values.resize(n);
  for (auto& v : t.values) v = get_le<double>(is);
  return t;
}

void write_named(std::ostream& os, const NamedTensors& entries) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvalidArgument("tensor name too long");
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, tensor);
  }
}

NamedTensors read_named(std::istream& is) {
  const auto count = get_le<std::uint32_t>(is);
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw std::runtime_error("truncated tensor name");
    out.emplace_back(std::move(name), read_tensor(is));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string(), "rename failed: " + ec.message());
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ostringstream os;
  write_tensor(os, t);
  write_file_atomic(path, os.str());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::istringstream is(read_file(path));
  try {
    return read_tensor(is);
  } catch (const std::runtime_error& e) {
    throw IoError(path.string(), e.what());
  }
}

void save_named(const std::filesystem::path& path, const NamedTensors& entries) {
  std::ostringstream os;
  write_named(os, entries);
  write_file_atomic(path, os.str());
}

NamedTensors load_named(const std::filesystem::path& path) {
  std::istringstream is(read_file(path));
  try {
    return read_named(is);
  } catch (const std::runtime_error& e) {
    throw IoError(path.string(), e.what());
  }
}

}  // namespace dublid
