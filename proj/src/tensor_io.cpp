// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(const std::string& in, std::size_t& off) {
  if (off + 4 > in.size()) throw DataError("mmgt: truncated payload");
  const unsigned char* p = reinterpret_cast<const unsigned char*>(in.data() + off);
  off += 4;
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::string& in, std::size_t& off) {
  const std::uint64_t lo = get_u32(in, off);
  const std::uint64_t hi = get_u32(in, off);
  return lo | (hi << 32);
}

}  // namespace

std::string encode_tensor(const Tensor& t, int dtype_code) {
  if (dtype_code != kDtypeF32 && dtype_code != kDtypeF64)
    throw DataError("mmgt: unknown dtype code " + std::to_string(dtype_code));
  std::string out;
  out.reserve(7 + 4 * t.dims().size() + t.size() * (dtype_code == kDtypeF32 ? 4 : 8));
  out += "MMGT";
  out.push_back(1);  // version
  out.push_back(static_cast<char>(dtype_code));
  out.push_back(static_cast<char>(t.rank()));
  for (int d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (dtype_code == kDtypeF32)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
    else
      put_u64(out, std::bit_cast<std::uint64_t>(t[i]));
  }
  return out;
}

Tensor decode_tensor(const std::string& bytes, std::size_t* offset) {
  std::size_t off = offset ? *offset : 0;
  if (off + 7 > bytes.size()) throw DataError("mmgt: truncated payload");
  if (bytes.compare(off, 4, "MMGT") != 0) throw DataError("mmgt: bad magic");
  off += 4;
  const int version = static_cast<unsigned char>(bytes[off++]);
  if (version != 1) throw DataError("mmgt: unsupported version " + std::to_string(version));
  const int dtype = static_cast<unsigned char>(bytes[off++]);
  if (dtype != kDtypeF32 && dtype != kDtypeF64)
    throw DataError("mmgt: unknown dtype code " + std::to_string(dtype));
  const int rank = static_cast<unsigned char>(bytes[off++]);
  std::vector<int> dims(rank);
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t d = get_u32(bytes, off);
    if (d == 0 || d > (1u << 24)) throw DataError("mmgt: dims overflow");
    dims[i] = static_cast<int>(d);
  }
  const std::size_t n = checked_numel(dims, "mmgt");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dtype == kDtypeF32)
      data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, off)));
    else
      data[i] = std::bit_cast<double>(get_u64(bytes, off));
  }
  if (offset) *offset = off;
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t, int dtype_code) {
  const std::string bytes = encode_tensor(t, dtype_code);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("mmgt: cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("mmgt: write failed for '" + path + "'");
}

Tensor read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("mmgt: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  Tensor t = decode_tensor(bytes, &off);
  if (off != bytes.size()) throw DataError("mmgt: trailing bytes in '" + path + "'");
  return t;
}

}  // namespace xmodal
