#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lightcone {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A T x H x W grid of finite real scalars stored in (t, row, col) row-major
/// order.
class Field {
 public:
  Field() = default;
  Field(std::size_t frames, std::size_t height, std::size_t width, double fill = 0.0);
  Field(std::size_t frames, std::size_t height, std::size_t width,
        std::vector<double> values);

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t frame_size() const { return height_ * width_; }

  double& operator()(std::size_t t, std::size_t row, std::size_t col) {
    return values_[(t * height_ + row) * width_ + col];
  }
  double operator()(std::size_t t, std::size_t row, std::size_t col) const {
    return values_[(t * height_ + row) * width_ + col];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * frame_size(), frame_size());
  }

  // Copies frames [first, first + count).
  Field slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

enum class SpatialNorm { chebyshev, euclidean };

struct ConeOffset {
  int dt;  // past offsets are negative, future offsets nonnegative
  int drow;
  int dcol;
  friend bool operator==(const ConeOffset&, const ConeOffset&) = default;
};

/// Light cone template. The past cone covers 1 <= dt <= past_horizon with
/// spatial reach speed * dt; the future cone covers 0 <= dt <= future_horizon,
/// where dt = 0 is the target pixel itself.
///
/// Offsets are listed oldest time slice first (past: dt descending in
/// lag, then row, then col; future: dt ascending, then row, then col).
class ConeGeometry {
 public:
  ConeGeometry() : ConeGeometry(1, 0, 1, SpatialNorm::chebyshev) {}
  ConeGeometry(int past_horizon, int future_horizon, int speed,
               SpatialNorm norm = SpatialNorm::chebyshev);

  int past_horizon() const { return past_horizon_; }
  int future_horizon() const { return future_horizon_; }
  int speed() const { return speed_; }
  SpatialNorm norm() const { return norm_; }

  std::size_t past_dim() const { return past_offsets_.size(); }
  std::size_t future_dim() const { return future_offsets_.size(); }
  const std::vector<ConeOffset>& past_offsets() const { return past_offsets_; }
  const std::vector<ConeOffset>& future_offsets() const { return future_offsets_; }

  // Spatial margin excluded on every side: speed * max(h_p, h_f).
  std::size_t margin() const;

  // Index of the (dt = -1, 0, 0) entry in the PLC, the previous value of the
  // target pixel.
  std::size_t previous_value_index() const;

  friend bool operator==(const ConeGeometry& a, const ConeGeometry& b) {
    return a.past_horizon_ == b.past_horizon_ &&
           a.future_horizon_ == b.future_horizon_ && a.speed_ == b.speed_ &&
           a.norm_ == b.norm_;
  }

 private:
  int past_horizon_;
  int future_horizon_;
  int speed_;
  SpatialNorm norm_;
  std::vector<ConeOffset> past_offsets_;
  std::vector<ConeOffset> future_offsets_;
};

const char* norm_name(SpatialNorm norm);
SpatialNorm parse_norm(std::string_view name);

struct Origin {
  std::uint32_t t;
  std::uint32_t row;
  std::uint32_t col;
  friend bool operator==(const Origin&, const Origin&) = default;
  friend auto operator<=>(const Origin&, const Origin&) = default;
};

/// N extracted (PLC, FLC) pairs with their space-time origins.
struct ConeSet {
  Matrix plcs;  // N x d_p
  Matrix flcs;  // N x d_f
  std::vector<Origin> origins;
  ConeGeometry geometry;

  std::size_t size() const { return origins.size(); }

  // Rows at the given indices, in the given order.
  ConeSet select(std::span<const std::size_t> indices) const;
};

// Concatenates cone sets sharing one geometry.
ConeSet concat(std::span<const ConeSet> parts);

/// Single pooled affine transform z = (x - shift) / scale.
struct ScalingParams {
  double shift = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - shift) / scale; }
  double invert(double z) const { return z * scale + shift; }
  friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

// Number of interior cones, (T - h_p - h_f) (H - 2 c m) (W - 2 c m), or 0.
std::size_t interior_cone_count(std::size_t frames, std::size_t height,
                                std::size_t width, const ConeGeometry& geometry);

// Origin frames that admit complete cones: h_p <= t < T - h_f.
std::vector<std::size_t> eligible_frames(const Field& field, const ConeGeometry& geometry);

ConeSet extract_cones(const Field& field, const ConeGeometry& geometry);

// Cones whose origin lies in one of the listed frames (each must be eligible).
ConeSet extract_cones(const Field& field, const ConeGeometry& geometry,
                      std::span<const std::size_t> frames);

// Pooled z-score over all PLC and FLC entries jointly.
ScalingParams fit_scaling(const ConeSet& cones);
ConeSet apply_scaling(const ConeSet& cones, const ScalingParams& params);
ConeSet invert_scaling(const ConeSet& cones, const ScalingParams& params);

struct Standardized {
  ConeSet cones;
  ScalingParams params;
};
Standardized standardize(const ConeSet& cones);

// Uniform random subset of n cones in original order; the input unchanged
// when n >= N.
ConeSet subsample(const ConeSet& cones, std::size_t n, std::uint64_t seed);

// STF1 binary field format.
void write_field(const Field& field, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_field(const Field& field);
Field decode_field(std::span<const std::uint8_t> bytes);

// Directory of frame_*.csv files, one H x W frame each, lexicographic order.
Field read_csv_frames(const std::filesystem::path& dir);
void write_csv_frame(std::span<const double> values, std::size_t height,
                     std::size_t width, const std::filesystem::path& path);

}  // namespace lightcone
