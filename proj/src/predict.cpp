#include "lightcone/predict.hpp"

#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"

#include <cmath>

namespace lightcone {

namespace {

std::vector<double> to_standard(std::span<const double> v, const ScalingParams& s) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = s.apply(v[i]);
  return out;
}

}  // namespace

double PredictiveDistribution::density(std::span<const double> x) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j)
    if (weights[j] > 0.0) acc += weights[j] * model->states[j].flc_kde.density(x);
  return acc;
}

std::vector<double> PredictiveDistribution::mean() const {
  std::vector<double> out(model->geometry.future_dim(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j)
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] += weights[j] * model->states[j].mean_flc[k];
  return out;
}

PredictiveDistribution predictive_distribution(const StateModel& model,
                                               std::span<const double> plc, Units units) {
  PredictiveDistribution dist;
  dist.model = &model;
  if (units == Units::raw) {
    const auto z = to_standard(plc, model.scaling);
    dist.weights = map_plc_to_states(model, z);
  } else {
    dist.weights = map_plc_to_states(model, plc);
  }
  return dist;
}

double predictive_density(const StateModel& model, std::span<const double> plc,
                          std::span<const double> x, Units units) {
  require(x.size() == model.geometry.future_dim(), Errc::dimension_mismatch,
          "future value has dimension " + std::to_string(x.size()) + ", model expects " +
              std::to_string(model.geometry.future_dim()));
  const auto dist = predictive_distribution(model, plc, units);
  if (units == Units::standardized) return dist.density(x);
  const auto z = to_standard(x, model.scaling);
  const double jacobian =
      std::pow(model.scaling.scale, -static_cast<double>(model.geometry.future_dim()));
  return dist.density(z) * jacobian;
}

std::vector<double> point_predict(const StateModel& model, std::span<const double> plc,
                                  Units units) {
  auto mean = predictive_distribution(model, plc, units).mean();
  for (auto& v : mean) v = model.scaling.invert(v);
  return mean;
}

double perplexity_from_average(double average_log2_likelihood) {
  return std::exp2(-average_log2_likelihood);
}

std::vector<double> predict_cones(const StateModel& model, const ConeSet& cones) {
  require(cones.geometry == model.geometry, Errc::dimension_mismatch,
          "cone geometry differs from the model geometry");
  const auto dp = static_cast<std::size_t>(cones.plcs.cols());
  std::vector<double> out(cones.size());
  parallel_for(cones.size(), [&](std::size_t i) {
    std::span<const double> plc(cones.plcs.data() + i * dp, dp);
    out[i] = point_predict(model, plc, Units::raw)[0];
  });
  return out;
}

LikelihoodReport cone_log_likelihood(const StateModel& model, const ConeSet& cones,
                                     double floor) {
  require(cones.geometry == model.geometry, Errc::dimension_mismatch,
          "cone geometry differs from the model geometry");
  require(floor > 0.0, Errc::invalid_argument, "likelihood floor must be positive");
  const auto dp = static_cast<std::size_t>(cones.plcs.cols());
  const auto df = static_cast<std::size_t>(cones.flcs.cols());
  LikelihoodReport report;
  report.per_pixel.resize(cones.size());
  std::vector<char> floored(cones.size(), 0);
  parallel_for(cones.size(), [&](std::size_t i) {
    std::span<const double> plc(cones.plcs.data() + i * dp, dp);
    std::span<const double> flc(cones.flcs.data() + i * df, df);
    double density = predictive_density(model, plc, flc, Units::raw);
    if (!(density >= floor)) {
      density = floor;
      floored[i] = 1;
    }
    report.per_pixel[i] = std::log2(density);
  });
  double sum = 0.0;
  for (std::size_t i = 0; i < cones.size(); ++i) {
    sum += report.per_pixel[i];
    report.floored += static_cast<std::size_t>(floored[i]);
  }
  report.average = cones.size() ? sum / static_cast<double>(cones.size()) : 0.0;
  report.perplexity = perplexity_from_average(report.average);
  return report;
}

LikelihoodReport field_log_likelihood(const StateModel& model, const Field& field,
                                      double floor) {
  return cone_log_likelihood(model, extract_cones(field, model.geometry), floor);
}

FramePrediction predict_frame(const StateModel& model, const Field& field, std::size_t t) {
  const auto& g = model.geometry;
  require(t >= static_cast<std::size_t>(g.past_horizon()) && t < field.frames(),
          Errc::invalid_argument,
          "frame " + std::to_string(t) + " has no complete past light cones");
  // Only the PLC is needed for prediction, so the future horizon does not
  // restrict which frame can be predicted.
  const ConeGeometry past_only(g.past_horizon(), 0, g.speed(), g.norm());
  const std::size_t m = g.margin();
  require(field.height() > 2 * m && field.width() > 2 * m, Errc::no_interior_cones,
          "no interior cones: frame is too small for the cone geometry");

  FramePrediction out;
  out.height = field.height();
  out.width = field.width();
  out.values.assign(field.frame_size(), kMaskFill);
  out.mask.assign(field.frame_size(), 0);
  const auto& past = past_only.past_offsets();
  const std::size_t rows = field.height() - 2 * m;
  parallel_for(rows, [&](std::size_t job) {
    const std::size_t r = m + job;
    std::vector<double> plc(past.size());
    for (std::size_t c = m; c + m < field.width(); ++c) {
      for (std::size_t k = 0; k < past.size(); ++k)
        plc[k] = field(t + past[k].dt, r + past[k].drow, c + past[k].dcol);
      out.values[r * field.width() + c] = point_predict(model, plc, Units::raw)[0];
      out.mask[r * field.width() + c] = 1;
    }
  });
  return out;
}

}  // namespace lightcone
