#include "lightcone/model_io.hpp"

#include "lightcone/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lightcone {

namespace {
constexpr char kMagic[5] = {'L', 'C', 'S', 'M', '1'};
}

void ByteWriter::u32(std::uint32_t v) {
  for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u64(s.size());
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::f64s(std::span<const double> v) {
  u64(v.size());
  for (double x : v) f64(x);
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  require(n <= bytes_.size() - pos_, Errc::truncated, "model payload is truncated");
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint32_t ByteReader::u32() {
  const auto* p = take(4);
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

std::uint64_t ByteReader::u64() {
  const auto* p = take(8);
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  require(n <= bytes_.size() - pos_, Errc::truncated, "model payload is truncated");
  const auto* p = take(static_cast<std::size_t>(n));
  return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n));
}

std::vector<double> ByteReader::f64s() {
  const std::uint64_t n = u64();
  require(n <= (bytes_.size() - pos_) / 8, Errc::truncated, "model payload is truncated");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = f64();
  return out;
}

std::vector<std::uint8_t> encode_container(std::span<const Section> sections) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  ByteWriter w;
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  auto head = w.take();
  out.insert(out.end(), head.begin(), head.end());
  for (const auto& s : sections) {
    out.insert(out.end(), s.tag.begin(), s.tag.end());
    ByteWriter len;
    len.u64(s.payload.size());
    auto lb = len.take();
    out.insert(out.end(), lb.begin(), lb.end());
    out.insert(out.end(), s.payload.begin(), s.payload.end());
  }
  return out;
}

std::vector<Section> decode_container(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= sizeof(kMagic) &&
              std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0,
          Errc::bad_magic, "not a model file (bad magic)");
  const auto body = bytes.subspan(sizeof(kMagic));
  ByteReader r(body);
  const std::uint32_t version = r.u32();
  require(version == kModelVersion, Errc::bad_version,
          "unsupported model file version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::size_t pos = 8;
  std::vector<Section> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    require(body.size() - pos >= 12, Errc::truncated, "model section header is truncated");
    Section s;
    std::memcpy(s.tag.data(), body.data() + pos, 4);
    ByteReader len(body.subspan(pos + 4, 8));
    const std::uint64_t n = len.u64();
    pos += 12;
    require(n <= body.size() - pos, Errc::truncated, "model section payload is truncated");
    s.payload.assign(body.begin() + static_cast<std::ptrdiff_t>(pos),
                     body.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += static_cast<std::size_t>(n);
    out.push_back(std::move(s));
  }
  require(pos == body.size(), Errc::size_mismatch, "trailing bytes after the last model section");
  return out;
}

const Section& find_section(std::span<const Section> sections, Tag tag) {
  for (const auto& s : sections)
    if (s.tag == tag) return s;
  fail(Errc::size_mismatch,
       "model file has no '" + std::string(tag.begin(), tag.end()) + "' section");
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io, "write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lightcone
