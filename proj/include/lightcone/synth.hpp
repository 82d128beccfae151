#pragma once

#include "lightcone/field.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lightcone {

enum class SynthKind { linear_diffusion, k_regime, moving_blob };

const char* synth_kind_name(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

struct SynthSpec {
  SynthKind kind = SynthKind::linear_diffusion;
  std::size_t frames = 20;
  std::size_t height = 64;
  std::size_t width = 64;
  double noise = 0.1;
  std::uint64_t seed = 0;

  // linear_diffusion: 3x3 past-patch weights, row-major.
  std::array<double, 9> coefficients{0.05, 0.1, 0.05, 0.1, 0.3, 0.1, 0.05, 0.1, 0.05};

  // k_regime: one mean per regime, AR(1) pull towards it, vertical stripes
  // of `block` columns assigned to regimes in rotation.
  std::vector<double> regime_means{0.0, 10.0};
  double persistence = 0.1;
  std::size_t block = 16;

  // moving_blob
  double blob_radius = 6.0;
  std::array<double, 2> velocity{1.0, 0.0};  // pixels per frame (row, col)
  std::array<double, 2> start{-1.0, -1.0};   // negative = frame centre
};

struct LinearDiffusionData {
  Field field;
  std::array<double, 9> coefficients;
};

struct RegimeData {
  Field field;
  std::vector<int> labels;  // H x W, row-major
};

// Largest |eigenvalue| of the periodic 3x3 convolution on an H x W torus.
double diffusion_spectral_radius(const std::array<double, 9>& coefficients,
                                 std::size_t height, std::size_t width);

// Frame 0 is N(0, 1); each later pixel is the weighted 3x3 patch of the
// previous frame (periodic edges) plus N(0, noise^2). Throws if the map is
// not contractive.
LinearDiffusionData gen_linear_diffusion(const SynthSpec& spec);

// Each pixel follows x_t = m + persistence * (x_{t-1} - m) + noise * e_t with
// m the mean of its stripe's regime.
RegimeData gen_k_regime(const SynthSpec& spec);

// Unit-height Gaussian blob moving at constant velocity with wraparound,
// plus noise, clamped to [0, 1].
Field gen_moving_blob(const SynthSpec& spec);

// Pixels whose Chebyshev neighbourhood of the given radius (periodic in the
// column direction, clipped in rows) holds more than one label.
std::vector<bool> regime_boundary(std::span<const int> labels, std::size_t height,
                                  std::size_t width, std::size_t radius);

struct PurityReport {
  std::vector<double> per_group;          // majority share per predicted group
  std::vector<std::size_t> group_sizes;   // counted members per group
  double minimum = 0.0;                   // over non-empty groups
  double overall = 0.0;                   // majority members / all members
};

// Purity of a partition against ground truth, counting only entries whose
// `include` flag is set (all when empty).
PurityReport purity(std::span<const int> predicted, std::span<const int> truth,
                    const std::vector<bool>& include = {});

void write_labels_csv(const std::filesystem::path& path, std::span<const int> labels,
                      std::size_t height, std::size_t width);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

}  // namespace lightcone
