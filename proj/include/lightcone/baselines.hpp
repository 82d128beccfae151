#pragma once

#include "lightcone/field.hpp"
#include "lightcone/model_io.hpp"

#include <span>
#include <vector>

namespace lightcone {

inline constexpr double kRidgeFallback = 1e-8;

/// Least-squares map from PLC to the (scalar) future, in raw units.
struct LinearConeModel {
  std::vector<double> coefficients;  // d_p
  double intercept = 0.0;
  ConeGeometry geometry;
  ScalingParams scaling;  // pooled scaling of the training cones, informational
  bool ridge_used = false;

  friend bool operator==(const LinearConeModel&, const LinearConeModel&) = default;
};

// Ordinary least squares with intercept, solved from centered normal
// equations. A singular Gram matrix falls back to ridge with
// lambda = kRidgeFallback (scaled by the mean Gram diagonal when that exceeds
// one); the intercept is never penalized. Requires d_f = 1 and N > d_p + 1.
LinearConeModel fit_lclr(const ConeSet& cones);

double predict_lclr(const LinearConeModel& model, std::span<const double> plc);
std::vector<double> predict_lclr(const LinearConeModel& model, const ConeSet& cones);

// Previous-frame value X(r, t - 1). Requires t >= 1 (0-based frames).
double fltp_predict(const Field& field, std::size_t t, std::size_t row, std::size_t col);

// The same baseline read from cones: the PLC entry at (dt = -1, 0, 0).
std::vector<double> fltp_predict(const ConeSet& cones);

enum class KnnWeighting { uniform, distance };

struct KnnOptions {
  std::size_t k = 5;
  KnnWeighting weighting = KnnWeighting::uniform;
};

// Mean future of the k Euclidean-nearest training PLCs; distance ties go to
// the lower training index. Distance weighting uses 1/d and, when some
// neighbours coincide with the query, averages just those.
double knn_predict(const ConeSet& train, std::span<const double> plc,
                   const KnnOptions& options = {});
std::vector<double> knn_predict(const ConeSet& train, const ConeSet& queries,
                                const KnnOptions& options = {});

std::vector<Section> linear_model_sections(const LinearConeModel& model);
LinearConeModel linear_model_from_sections(std::span<const Section> sections);

}  // namespace lightcone
