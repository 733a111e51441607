#include "dks/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dks/errors.hpp"

namespace dks {

namespace {

template <class T>
void put(std::ofstream& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get(std::ifstream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ShapeError("tensor file is truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

void write_tensors(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(kTensorMagic, sizeof kTensorMagic);
  put<std::uint64_t>(out, tensors.size());
  for (const Tensor& t : tensors) {
    if (element_count(t.shape) != t.data.size())
      throw ShapeError("tensor '" + t.name + "' data size does not match its shape");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.data) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

std::vector<Tensor> read_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  char magic[sizeof kTensorMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kTensorMagic, sizeof magic) != 0)
    throw ShapeError("'" + path + "' is not a tensor container (bad magic)");
  const auto count = get<std::uint64_t>(in);
  std::vector<Tensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    Tensor t;
    const auto len = get<std::uint32_t>(in);
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw ShapeError("tensor file is truncated");
    if (get<std::uint32_t>(in) != kDtypeF64) throw ShapeError("unsupported dtype in tensor file");
    const auto ndim = get<std::uint32_t>(in);
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(get<std::uint64_t>(in));
    t.data.resize(element_count(t.shape));
    for (double& v : t.data) v = std::bit_cast<double>(get<std::uint64_t>(in));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace dks
