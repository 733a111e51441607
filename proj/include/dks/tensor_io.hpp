#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dks {

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;  // row-major
};

// Binary container, all integers and floats little-endian:
//   "DKSTENS1"                       8-byte magic
//   u64 count
//   count times:
//     u32 name length, name bytes (UTF-8)
//     u32 dtype (1 = f64)
//     u32 ndim, u64 dims[ndim]
//     f64 data[prod(dims)]
inline constexpr char kTensorMagic[8] = {'D', 'K', 'S', 'T', 'E', 'N', 'S', '1'};
inline constexpr std::uint32_t kDtypeF64 = 1;

void write_tensors(const std::string& path, const std::vector<Tensor>& tensors);
/// Throws ShapeError on a malformed or truncated file.
std::vector<Tensor> read_tensors(const std::string& path);

}  // namespace dks
