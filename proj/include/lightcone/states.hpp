#pragma once

#include "lightcone/cluster.hpp"
#include "lightcone/field.hpp"
#include "lightcone/kde.hpp"
#include "lightcone/model_io.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lightcone {

inline constexpr double kDensityFloor = 1e-300;

/// One reconstructed predictive state. KDEs and the mean future live in the
/// model's standardized units.
struct PredictiveState {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // indices into the training cone set
  Kde plc_kde;
  Kde flc_kde;
  std::vector<double> mean_flc;

  std::size_t count() const { return members.size(); }
  friend bool operator==(const PredictiveState&, const PredictiveState&) = default;
};

enum class StateMethod { moonshine, ohp };

const char* state_method_name(StateMethod m);

struct StateModel {
  std::vector<PredictiveState> states;
  ConeGeometry geometry;
  ScalingParams scaling;
  StateMethod method = StateMethod::ohp;
  std::size_t training_size = 0;
  std::uint64_t seed = 0;
  std::size_t requested_states = 0;  // K_max for Moonshine, K for OHP
  std::size_t signature_pairs = 0;   // K_sig (Moonshine only)
  std::size_t initial_clusters = 0;  // density clusters before merging
  double density_coverage = 0.0;

  std::size_t state_count() const { return states.size(); }
  friend bool operator==(const StateModel&, const StateModel&) = default;
};

struct MoonshineOptions {
  std::size_t max_states = 10;
  std::size_t signature_pairs = 10;
  DbscanOptions dbscan;
  std::size_t kde_cap = kDefaultKdeCap;
  // Reuse an existing scaling instead of fitting one on the training cones.
  std::optional<ScalingParams> scaling;
};

struct OhpOptions {
  std::size_t states = 10;
  KMeansOptions kmeans;
  std::size_t kde_cap = kDefaultKdeCap;
  std::optional<ScalingParams> scaling;
};

// Both fitters take cones in raw units and standardize them internally.
StateModel fit_moonshine(const ConeSet& cones, const MoonshineOptions& options,
                         std::uint64_t seed);
StateModel fit_ohp(const ConeSet& cones, const OhpOptions& options, std::uint64_t seed);

// Log-density ratios log f(z_i) - log f(z_0), i = 1..rows-1, with densities
// floored at kDensityFloor.
std::vector<double> cluster_signature(const Kde& flc_kde, const Matrix& eval_points);

// Builds one state per label from standardized cones. Labels must cover
// [0, k) with no empty label.
std::vector<PredictiveState> assemble_states(const ConeSet& standardized,
                                             std::span<const std::size_t> labels,
                                             std::size_t k, std::size_t kde_cap,
                                             std::uint64_t seed);

// Soft map from a standardized PLC to state weights,
// w_j proportional to N_j * P(plc | S_j).
std::vector<double> map_plc_to_states(const StateModel& model, std::span<const double> plc);

// Per-cone state label (argmax of the hard membership) for training cones.
std::vector<std::size_t> membership_labels(const StateModel& model);

std::vector<Section> state_model_sections(const StateModel& model);
StateModel state_model_from_sections(std::span<const Section> sections);
std::vector<std::uint8_t> encode_state_model(const StateModel& model);
StateModel decode_state_model(std::span<const std::uint8_t> bytes);

// Shared section codecs, also used by other model kinds.
Section geometry_section(const ConeGeometry& geometry);
ConeGeometry geometry_from_section(const Section& section);
Section scaling_section(const ScalingParams& scaling);
ScalingParams scaling_from_section(const Section& section);
std::string model_method_tag(std::span<const Section> sections);

}  // namespace lightcone
