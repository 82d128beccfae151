#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lightcone {

// Versioned, tagged-section binary container shared by every model kind.
//
//   "LCSM1" | u32 version | u32 section count |
//   per section: 4-byte tag | u64 payload length | payload
//
// All integers and floats are little-endian.
inline constexpr std::uint32_t kModelVersion = 1;

using Tag = std::array<char, 4>;

constexpr Tag make_tag(const char (&s)[5]) { return {s[0], s[1], s[2], s[3]}; }

struct Section {
  Tag tag;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_container(std::span<const Section> sections);
std::vector<Section> decode_container(std::span<const std::uint8_t> bytes);

// First section with the tag; throws when absent.
const Section& find_section(std::span<const Section> sections, Tag tag);

class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> v);

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::vector<double> f64s();
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::uint8_t* take(std::size_t n);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace lightcone
