#pragma once

// PTYF v1 binary field container.
//
//   "PTYF" | u8 version=1 | u32 nx | u32 ny | f64 dx | f64 dy | nx*ny * (f64 re, f64 im)
//
// All multi-byte values little-endian, samples row-major with y outer.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "ptyparam/grid.hpp"

namespace ptyparam {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw FormatError("PTYF: truncated input");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

inline void put_f64(std::string& out, double d) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(const std::string& in, std::size_t& pos) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
}

}  // namespace detail

inline constexpr std::uint8_t ptyf_version = 1;

inline std::string encode_ptyf(const ComplexField& f) {
  std::string out = "PTYF";
  out.reserve(4 + 1 + 8 + 16 + f.size() * 16);
  out.push_back(static_cast<char>(ptyf_version));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.nx()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.ny()));
  detail::put_f64(out, f.grid().dx);
  detail::put_f64(out, f.grid().dy);
  for (const auto& v : f) {
    detail::put_f64(out, v.real());
    detail::put_f64(out, v.imag());
  }
  return out;
}

inline ComplexField decode_ptyf(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "PTYF") != 0) throw FormatError("PTYF: bad magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint8_t>(bytes, pos);
  if (version != ptyf_version) throw FormatError("PTYF: unsupported version " + std::to_string(version));
  const auto nx = detail::get_le<std::uint32_t>(bytes, pos);
  const auto ny = detail::get_le<std::uint32_t>(bytes, pos);
  const double dx = detail::get_f64(bytes, pos);
  const double dy = detail::get_f64(bytes, pos);
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  if (bytes.size() != pos + n * 16) throw FormatError("PTYF: payload size mismatch");
  std::vector<cplx> data(n);
  for (auto& v : data) {
    const double re = detail::get_f64(bytes, pos);
    const double im = detail::get_f64(bytes, pos);
    v = {re, im};
  }
  try {
    return ComplexField(GridSpec(nx, ny, dx, dy), std::move(data));
  } catch (const InvalidField& e) {
    throw FormatError(std::string("PTYF: ") + e.what());
  }
}

inline void write_ptyf(const std::filesystem::path& path, const ComplexField& f) {
  // temp + rename so readers never see a partial file
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp.string());
    const auto bytes = encode_ptyf(f);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline ComplexField read_ptyf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_ptyf(bytes);
}

inline ComplexField to_complex(const RealField& f) {
  ComplexField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
  return out;
}

inline RealField real_part(const ComplexField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

}  // namespace ptyparam
