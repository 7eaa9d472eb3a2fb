#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mvstream/types.hpp"

namespace mvstream::io {

// Little-endian binary writer. All on-disk integers and floats go through
// here so the formats are identical on every host.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);
  ~BinaryWriter();

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f32_array(std::span<const float> v);
  void bytes(std::span<const std::uint8_t> v);
  void magic(const char tag[4]);
  void str(const std::string& s);  // u32 length prefix + raw bytes

  void close();  // flushes; throws data_error on write failure

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  void f32_array(std::span<float> dst);
  void bytes(std::span<std::uint8_t> dst);
  void expect_magic(const char tag[4]);
  std::string str();

  bool at_eof();

 private:
  void fill(void* dst, std::size_t n);
  std::ifstream in_;
  std::string path_;
};

// 32-byte digest of a configuration string (four independent FNV-1a lanes).
// Not cryptographic; collision resistance is not a goal, mismatch detection is.
std::array<std::uint8_t, 32> config_digest(const std::string& text);

std::string hex(std::span<const std::uint8_t> bytes);
std::array<std::uint8_t, 32> unhex32(const std::string& s);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace mvstream::io
