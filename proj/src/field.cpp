#include "lightcone/field.hpp"

#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace lightcone {

Field::Field(std::size_t frames, std::size_t height, std::size_t width, double fill)
    : frames_(frames), height_(height), width_(width),
      values_(frames * height * width, fill) {
  require(frames > 0 && height > 0 && width > 0, Errc::invalid_argument,
          "field dimensions must be positive");
}

Field::Field(std::size_t frames, std::size_t height, std::size_t width,
             std::vector<double> values)
    : frames_(frames), height_(height), width_(width), values_(std::move(values)) {
  require(frames > 0 && height > 0 && width > 0, Errc::invalid_argument,
          "field dimensions must be positive");
  require(values_.size() == frames * height * width, Errc::size_mismatch,
          "field payload length does not match dimensions");
  for (double v : values_)
    require(std::isfinite(v), Errc::non_finite, "field contains a non-finite value");
}

Field Field::slice(std::size_t first, std::size_t count) const {
  require(first + count <= frames_ && count > 0, Errc::invalid_argument,
          "frame slice out of range");
  const auto begin = values_.begin() + static_cast<std::ptrdiff_t>(first * frame_size());
  std::vector<double> out(begin, begin + static_cast<std::ptrdiff_t>(count * frame_size()));
  return Field(count, height_, width_, std::move(out));
}

namespace {

bool inside_cone(int drow, int dcol, int reach, SpatialNorm norm) {
  if (norm == SpatialNorm::chebyshev) return std::max(std::abs(drow), std::abs(dcol)) <= reach;
  return drow * drow + dcol * dcol <= reach * reach;
}

void append_slice(std::vector<ConeOffset>& out, int dt, int reach, SpatialNorm norm) {
  for (int dr = -reach; dr <= reach; ++dr)
    for (int dc = -reach; dc <= reach; ++dc)
      if (inside_cone(dr, dc, reach, norm)) out.push_back({dt, dr, dc});
}

}  // namespace

ConeGeometry::ConeGeometry(int past_horizon, int future_horizon, int speed,
                           SpatialNorm norm)
    : past_horizon_(past_horizon), future_horizon_(future_horizon), speed_(speed),
      norm_(norm) {
  require(past_horizon >= 1, Errc::invalid_argument, "past horizon must be >= 1");
  require(future_horizon >= 0, Errc::invalid_argument, "future horizon must be >= 0");
  require(speed >= 1, Errc::invalid_argument, "propagation speed must be >= 1");
  for (int lag = past_horizon; lag >= 1; --lag) append_slice(past_offsets_, -lag, speed * lag, norm);
  for (int lead = 0; lead <= future_horizon; ++lead)
    append_slice(future_offsets_, lead, speed * lead, norm);
}

std::size_t ConeGeometry::margin() const {
  return static_cast<std::size_t>(speed_) *
         static_cast<std::size_t>(std::max(past_horizon_, future_horizon_));
}

std::size_t ConeGeometry::previous_value_index() const {
  const ConeOffset target{-1, 0, 0};
  const auto it = std::find(past_offsets_.begin(), past_offsets_.end(), target);
  return static_cast<std::size_t>(it - past_offsets_.begin());
}

const char* norm_name(SpatialNorm norm) {
  return norm == SpatialNorm::chebyshev ? "chebyshev" : "euclidean";
}

SpatialNorm parse_norm(std::string_view name) {
  if (name == "chebyshev") return SpatialNorm::chebyshev;
  if (name == "euclidean") return SpatialNorm::euclidean;
  fail(Errc::invalid_argument, "unknown spatial norm '" + std::string(name) + "'");
}

ConeSet ConeSet::select(std::span<const std::size_t> indices) const {
  ConeSet out;
  out.geometry = geometry;
  out.plcs.resize(static_cast<Eigen::Index>(indices.size()), plcs.cols());
  out.flcs.resize(static_cast<Eigen::Index>(indices.size()), flcs.cols());
  out.origins.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(indices[k]);
    require(indices[k] < size(), Errc::invalid_argument, "cone index out of range");
    out.plcs.row(static_cast<Eigen::Index>(k)) = plcs.row(i);
    out.flcs.row(static_cast<Eigen::Index>(k)) = flcs.row(i);
    out.origins.push_back(origins[indices[k]]);
  }
  return out;
}

ConeSet concat(std::span<const ConeSet> parts) {
  require(!parts.empty(), Errc::invalid_argument, "nothing to concatenate");
  ConeSet out;
  out.geometry = parts.front().geometry;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.geometry == out.geometry, Errc::dimension_mismatch,
            "cannot concatenate cone sets with different geometries");
    total += p.size();
  }
  const auto dp = static_cast<Eigen::Index>(out.geometry.past_dim());
  const auto df = static_cast<Eigen::Index>(out.geometry.future_dim());
  out.plcs.resize(static_cast<Eigen::Index>(total), dp);
  out.flcs.resize(static_cast<Eigen::Index>(total), df);
  out.origins.reserve(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const auto n = static_cast<Eigen::Index>(p.size());
    out.plcs.middleRows(at, n) = p.plcs;
    out.flcs.middleRows(at, n) = p.flcs;
    out.origins.insert(out.origins.end(), p.origins.begin(), p.origins.end());
    at += n;
  }
  return out;
}

std::size_t interior_cone_count(std::size_t frames, std::size_t height, std::size_t width,
                                const ConeGeometry& geometry) {
  const auto span_t = static_cast<std::size_t>(geometry.past_horizon() + geometry.future_horizon());
  const std::size_t m2 = 2 * geometry.margin();
  if (frames <= span_t || height <= m2 || width <= m2) return 0;
  return (frames - span_t) * (height - m2) * (width - m2);
}

std::vector<std::size_t> eligible_frames(const Field& field, const ConeGeometry& geometry) {
  std::vector<std::size_t> out;
  const auto first = static_cast<std::size_t>(geometry.past_horizon());
  const auto tail = static_cast<std::size_t>(geometry.future_horizon());
  for (std::size_t t = first; t + tail < field.frames(); ++t) out.push_back(t);
  return out;
}

ConeSet extract_cones(const Field& field, const ConeGeometry& geometry) {
  const auto frames = eligible_frames(field, geometry);
  return extract_cones(field, geometry, frames);
}

ConeSet extract_cones(const Field& field, const ConeGeometry& geometry,
                      std::span<const std::size_t> frames) {
  const std::size_t m = geometry.margin();
  require(interior_cone_count(field.frames(), field.height(), field.width(), geometry) > 0,
          Errc::no_interior_cones,
          "no interior cones: field is too small for the cone geometry");
  const auto first = static_cast<std::size_t>(geometry.past_horizon());
  const auto tail = static_cast<std::size_t>(geometry.future_horizon());
  for (std::size_t t : frames)
    require(t >= first && t + tail < field.frames(), Errc::invalid_argument,
            "frame " + std::to_string(t) + " does not admit complete light cones");

  const std::size_t rows = field.height() - 2 * m;
  const std::size_t cols = field.width() - 2 * m;
  const std::size_t per_frame = rows * cols;
  const std::size_t n = frames.size() * per_frame;

  ConeSet out;
  out.geometry = geometry;
  out.plcs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(geometry.past_dim()));
  out.flcs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(geometry.future_dim()));
  out.origins.resize(n);

  const auto& past = geometry.past_offsets();
  const auto& future = geometry.future_offsets();
  parallel_for(frames.size() * rows, [&](std::size_t job) {
    const std::size_t t = frames[job / rows];
    const std::size_t r = m + job % rows;
    for (std::size_t c = m; c < m + cols; ++c) {
      const std::size_t i = job * cols + (c - m);
      double* plc = out.plcs.data() + i * past.size();
      for (std::size_t k = 0; k < past.size(); ++k)
        plc[k] = field(t + past[k].dt, r + past[k].drow, c + past[k].dcol);
      double* flc = out.flcs.data() + i * future.size();
      for (std::size_t k = 0; k < future.size(); ++k)
        flc[k] = field(t + future[k].dt, r + future[k].drow, c + future[k].dcol);
      out.origins[i] = {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(r),
                        static_cast<std::uint32_t>(c)};
    }
  });
  return out;
}

ScalingParams fit_scaling(const ConeSet& cones) {
  const double count = static_cast<double>(cones.plcs.size() + cones.flcs.size());
  require(count > 0, Errc::invalid_argument, "cannot standardize an empty cone set");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < cones.plcs.size(); ++i) sum += cones.plcs.data()[i];
  for (Eigen::Index i = 0; i < cones.flcs.size(); ++i) sum += cones.flcs.data()[i];
  const double mean = sum / count;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < cones.plcs.size(); ++i) {
    const double d = cones.plcs.data()[i] - mean;
    ss += d * d;
  }
  for (Eigen::Index i = 0; i < cones.flcs.size(); ++i) {
    const double d = cones.flcs.data()[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / count);
  return {mean, sd > 0.0 ? sd : 1.0};
}

ConeSet apply_scaling(const ConeSet& cones, const ScalingParams& params) {
  ConeSet out = cones;
  out.plcs = (cones.plcs.array() - params.shift) / params.scale;
  out.flcs = (cones.flcs.array() - params.shift) / params.scale;
  return out;
}

ConeSet invert_scaling(const ConeSet& cones, const ScalingParams& params) {
  ConeSet out = cones;
  out.plcs = cones.plcs.array() * params.scale + params.shift;
  out.flcs = cones.flcs.array() * params.scale + params.shift;
  return out;
}

Standardized standardize(const ConeSet& cones) {
  const ScalingParams params = fit_scaling(cones);
  return {apply_scaling(cones, params), params};
}

ConeSet subsample(const ConeSet& cones, std::size_t n, std::uint64_t seed) {
  require(n >= 1, Errc::invalid_argument, "subsample size must be >= 1");
  if (n >= cones.size()) return cones;
  Rng rng(seed);
  const auto keep = sample_without_replacement(cones.size(), n, rng);
  return cones.select(keep);
}

// --- STF1 ---------------------------------------------------------------

namespace {

constexpr char kFieldMagic[4] = {'S', 'T', 'F', '1'};
constexpr std::size_t kFieldHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(v);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_field(const Field& field) {
  std::vector<std::uint8_t> out;
  out.reserve(kFieldHeader + 8 * field.values().size());
  out.insert(out.end(), std::begin(kFieldMagic), std::end(kFieldMagic));
  put_u32(out, static_cast<std::uint32_t>(field.frames()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  for (double v : field.values()) put_f64(out, v);
  return out;
}

Field decode_field(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4)
    require(std::memcmp(bytes.data(), kFieldMagic, 4) == 0, Errc::bad_magic,
            "not an STF1 field file (bad magic)");
  require(bytes.size() >= kFieldHeader, Errc::truncated, "STF1 header is truncated");
  const std::uint64_t t = get_u32(bytes.data() + 4);
  const std::uint64_t h = get_u32(bytes.data() + 8);
  const std::uint64_t w = get_u32(bytes.data() + 12);
  require(t > 0 && h > 0 && w > 0, Errc::size_mismatch, "STF1 dimensions must be positive");
  const std::uint64_t count = t * h * w;
  const std::uint64_t payload = bytes.size() - kFieldHeader;
  require(payload >= 8 * count, Errc::truncated,
          "STF1 payload is truncated: expected " + std::to_string(8 * count) + " bytes, got " +
              std::to_string(payload));
  require(payload == 8 * count, Errc::size_mismatch,
          "STF1 payload is longer than the header dimensions imply");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = get_f64(bytes.data() + kFieldHeader + 8 * i);
    require(std::isfinite(values[i]), Errc::non_finite,
            "STF1 payload contains a non-finite value at index " + std::to_string(i));
  }
  return Field(t, h, w, std::move(values));
}

void write_field(const Field& field, const std::filesystem::path& path) {
  const auto bytes = encode_field(field);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io, "write failed for '" + path.string() + "'");
}

Field read_field(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return decode_field(bytes);
}

// --- CSV frames ---------------------------------------------------------

namespace {

std::vector<double> parse_csv_row(const std::string& line, const std::filesystem::path& path,
                                  std::size_t lineno) {
  std::vector<double> row;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (true) {
    const char* comma = std::find(p, end, ',');
    const char* b = p;
    const char* e = comma;
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double v = 0.0;
    const auto res = std::from_chars(b, e, v);
    require(res.ec == std::errc() && res.ptr == e && b != e, Errc::invalid_argument,
            path.string() + ":" + std::to_string(lineno) + ": malformed number");
    require(std::isfinite(v), Errc::non_finite,
            path.string() + ":" + std::to_string(lineno) + ": non-finite value");
    row.push_back(v);
    if (comma == end) break;
    p = comma + 1;
  }
  return row;
}

}  // namespace

Field read_csv_frames(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), Errc::io,
          "'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  require(!files.empty(), Errc::io, "no .csv frames in '" + dir.string() + "'");

  std::size_t height = 0, width = 0;
  std::vector<double> values;
  for (const auto& file : files) {
    std::ifstream in(file);
    require(static_cast<bool>(in), Errc::io, "cannot open '" + file.string() + "'");
    std::string line;
    std::size_t rows = 0, lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto row = parse_csv_row(line, file, lineno);
      if (width == 0) width = row.size();
      require(row.size() == width, Errc::size_mismatch,
              file.string() + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(width) + " columns");
      values.insert(values.end(), row.begin(), row.end());
      ++rows;
    }
    if (height == 0) height = rows;
    require(rows == height && rows > 0, Errc::size_mismatch,
            file.string() + ": expected " + std::to_string(height) + " rows");
  }
  return Field(files.size(), height, width, std::move(values));
}

void write_csv_frame(std::span<const double> values, std::size_t height, std::size_t width,
                     const std::filesystem::path& path) {
  require(values.size() == height * width, Errc::size_mismatch, "frame size mismatch");
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot write '" + path.string() + "'");
  out.precision(17);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c) out << ',';
      out << values[r * width + c];
    }
    out << '\n';
  }
}

}  // namespace lightcone
