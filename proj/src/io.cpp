#include "mvstream/io.hpp"

#include <bit>
#include <cstring>

namespace mvstream::io {

namespace {

void put_le(std::ofstream& out, const void* src, std::size_t n) {
  out.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
}

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path.string()) {
  if (!out_) throw data_error("cannot open for writing: " + path_);
}

BinaryWriter::~BinaryWriter() = default;

void BinaryWriter::u8(std::uint8_t v) { put_le(out_, &v, 1); }

void BinaryWriter::u32(std::uint32_t v) {
  std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                       std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
  put_le(out_, b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
  put_le(out_, b, 8);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f32_array(std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    put_le(out_, v.data(), v.size() * sizeof(float));
  } else {
    for (float x : v) f32(x);
  }
}

void BinaryWriter::bytes(std::span<const std::uint8_t> v) {
  put_le(out_, v.data(), v.size());
}

void BinaryWriter::magic(const char tag[4]) { put_le(out_, tag, 4); }

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  put_le(out_, s.data(), s.size());
}

void BinaryWriter::close() {
  out_.flush();
  if (!out_) throw data_error("write failed: " + path_);
  out_.close();
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path.string()) {
  if (!in_) throw data_error("cannot open for reading: " + path_);
}

void BinaryReader::fill(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (std::size_t(in_.gcount()) != n)
    throw data_error("truncated file: " + path_);
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  fill(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint8_t b[4];
  fill(b, 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

std::uint64_t BinaryReader::u64() {
  std::uint8_t b[8];
  fill(b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

void BinaryReader::f32_array(std::span<float> dst) {
  if constexpr (std::endian::native == std::endian::little) {
    fill(dst.data(), dst.size() * sizeof(float));
  } else {
    for (float& x : dst) x = f32();
  }
}

void BinaryReader::bytes(std::span<std::uint8_t> dst) {
  fill(dst.data(), dst.size());
}

void BinaryReader::expect_magic(const char tag[4]) {
  char got[4];
  fill(got, 4);
  if (std::memcmp(got, tag, 4) != 0)
    throw data_error("bad magic in " + path_ + ": expected " +
                     std::string(tag, 4));
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  std::string s(n, '\0');
  if (n) fill(s.data(), n);
  return s;
}

bool BinaryReader::at_eof() {
  in_.peek();
  return in_.eof();
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::array<std::uint8_t, 32> config_digest(const std::string& text) {
  static constexpr std::uint64_t kLane[4] = {
      1469598103934665603ULL, 0x5bd1e9955bd1e995ULL, 0x27d4eb2f165667c5ULL,
      0x9e3779b97f4a7c15ULL};
  std::array<std::uint8_t, 32> out{};
  for (int lane = 0; lane < 4; ++lane) {
    std::uint64_t h = kLane[lane];
    for (unsigned char c : text) {
      h ^= c + std::uint64_t(lane) * 0x100u;
      h *= 1099511628211ULL;
      h ^= h >> 29;
    }
    for (int i = 0; i < 8; ++i)
      out[std::size_t(lane) * 8 + i] = std::uint8_t(h >> (8 * i));
  }
  return out;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::array<std::uint8_t, 32> unhex32(const std::string& s) {
  if (s.size() != 64) throw data_error("fingerprint must be 64 hex chars");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw data_error("invalid hex digit in fingerprint");
  };
  std::array<std::uint8_t, 32> out{};
  for (std::size_t i = 0; i < 32; ++i)
    out[i] = std::uint8_t(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
  return out;
}

}  // namespace mvstream::io
