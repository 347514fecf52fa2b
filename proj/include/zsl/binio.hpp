#pragma once
// Little-endian primitives for the ZSLB/ZSLP/ZSLM/ZSLR binary formats.
// Readers track the byte offset so truncation and bad-magic errors can name
// the exact failure position.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "zsl/core.hpp"

namespace zsl {

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open file for writing: " + path);
  }

  void magic(const char tag[4]) { bytes(tag, 4); }

  void u8(std::uint8_t v) { bytes(&v, 1); }

  void u16(std::uint16_t v) { uint_le(v, 2); }
  void u32(std::uint32_t v) { uint_le(v, 4); }
  void u64(std::uint64_t v) { uint_le(v, 8); }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

  void f32_vec(const EmbeddingVector& v) {
    for (double x : v) f32(static_cast<float>(x));
  }

  void f64_vec(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }

  void str(const std::string& s) {
    if (s.size() > 0xffff) throw DataError("string too long for u16 length prefix");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::size_t offset() const { return offset_; }

 private:
  void uint_le(std::uint64_t v, int n) {
    unsigned char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(buf, n);
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("write failure at byte " + std::to_string(offset_));
    offset_ += n;
  }

  std::ofstream out_;
  std::size_t offset_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open file for reading: " + path);
  }

  // Checks a 4-byte magic at the current offset (normally 0).
  void expect_magic(const char tag[4]) {
    const std::size_t at = offset_;
    char got[4];
    bytes(got, 4, "magic");
    if (std::memcmp(got, tag, 4) != 0)
      throw FormatError(std::string("bad magic, expected \"") + std::string(tag, 4) + "\"", at,
                        slide_index_);
  }

  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1, "u8");
    return v;
  }

  std::uint16_t u16() { return static_cast<std::uint16_t>(uint_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
  std::uint64_t u64() { return uint_le(8); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  // Reads n f32 values, widened to double (exactly representable).
  EmbeddingVector f32_vec(std::size_t n) {
    EmbeddingVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(f32());
    return v;
  }

  std::vector<double> f64_vec(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }

  std::string str() {
    const std::size_t n = u16();
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n, "string");
    return s;
  }

  std::size_t offset() const { return offset_; }

  // The running slide index attached to truncation errors while decoding
  // slide records. -1 outside of any slide.
  void set_slide_index(long i) { slide_index_ = i; }
  long slide_index() const { return slide_index_; }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::uint64_t uint_le(int n) {
    unsigned char buf[8];
    bytes(buf, static_cast<std::size_t>(n), "integer");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(std::string("truncated file while reading ") + what, offset_,
                        slide_index_);
    offset_ += n;
  }

  std::ifstream in_;
  std::size_t offset_ = 0;
  long slide_index_ = -1;
};

// FNV-1a 64-bit content hash, used by the run manifest.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::uint64_t h = fnv1a64(buf.data(), buf.size());
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace zsl
