#pragma once

#include "lightcone/field.hpp"
#include "lightcone/states.hpp"

#include <span>
#include <vector>

namespace lightcone {

enum class Units { standardized, raw };

/// Mixture predictive distribution for one PLC: the state weights from the
/// soft map and the per-state future KDEs they mix.
struct PredictiveDistribution {
  const StateModel* model = nullptr;
  std::vector<double> weights;

  // Mixture density at a standardized future x.
  double density(std::span<const double> x) const;
  // Mixture of the per-state mean futures, standardized units.
  std::vector<double> mean() const;
};

PredictiveDistribution predictive_distribution(const StateModel& model,
                                               std::span<const double> plc,
                                               Units units = Units::standardized);

// sum_j w_j(plc) P(x | S_j). With Units::raw both inputs are standardized
// here and the result carries the 1 / scale^d_f Jacobian, so it is a density
// over raw future values.
double predictive_density(const StateModel& model, std::span<const double> plc,
                          std::span<const double> x, Units units = Units::standardized);

// sum_j w_j(plc) xbar_j, returned in raw units. `units` describes the PLC.
std::vector<double> point_predict(const StateModel& model, std::span<const double> plc,
                                  Units units = Units::standardized);

struct FramePrediction {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // H x W; masked pixels hold -0.0
  std::vector<std::uint8_t> mask;  // 1 where a prediction was made
};

inline constexpr double kMaskFill = -0.0;

// Point prediction for every interior pixel of frame t (first future
// component); marginal pixels are masked.
FramePrediction predict_frame(const StateModel& model, const Field& field, std::size_t t);

struct LikelihoodReport {
  std::vector<double> per_pixel;  // log2 density, raw units
  double average = 0.0;
  double perplexity = 0.0;
  std::size_t floored = 0;
};

double perplexity_from_average(double average_log2_likelihood);

// Raw-unit log2 likelihood of each cone's observed future given its PLC,
// with densities below `floor` replaced by `floor`. Cones are in raw units.
LikelihoodReport cone_log_likelihood(const StateModel& model, const ConeSet& cones,
                                     double floor = kDensityFloor);

// Same over every interior cone of the field.
LikelihoodReport field_log_likelihood(const StateModel& model, const Field& field,
                                      double floor = kDensityFloor);

// Point predictions (raw units, first future component) for raw cones.
std::vector<double> predict_cones(const StateModel& model, const ConeSet& cones);

}  // namespace lightcone
