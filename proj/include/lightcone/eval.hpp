#pragma once

#include "lightcone/field.hpp"
#include "lightcone/forecaster.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lightcone {

double mse(std::span<const double> pred, std::span<const double> truth);

// Sample correlation; throws Errc::undefined_statistic when either side has
// zero variance.
double pearson(std::span<const double> pred, std::span<const double> truth);

// |t - p| / |max(T u P) - min(T u P)| per pixel, with the range pooled over
// both inputs; all zeros when the pooled range is zero.
std::vector<double> err_pct_map(std::span<const double> truth, std::span<const double> pred);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap interval for the mean of `values`.
Interval bootstrap_ci(std::span<const double> values, const BootstrapOptions& options);

// Resampling unit for metric confidence intervals.
enum class CiUnit { pixel, frame };

const char* ci_unit_name(CiUnit unit);
CiUnit parse_ci_unit(std::string_view name);

struct MetricsReport {
  std::string method;
  std::optional<std::size_t> k_max;
  double mse = 0.0;
  Interval mse_ci;
  double rho = 0.0;
  Interval rho_ci;
  std::optional<double> avg_ll;
  std::optional<Interval> ll_ci;
  std::optional<double> perplexity;
  std::size_t fold = 0;
  std::size_t pixels = 0;
};

struct ScoreOptions {
  BootstrapOptions bootstrap;
  CiUnit unit = CiUnit::pixel;
};

// MSE, Pearson rho and (when given) average log2 likelihood, each with a
// bootstrap interval from one shared set of resamples. `groups` labels each
// pixel's resampling unit when unit == frame.
MetricsReport score(std::string method, std::span<const double> pred,
                    std::span<const double> truth, std::span<const double> log_lik,
                    std::span<const std::uint32_t> groups, const ScoreOptions& options);

// Column order: method, K_max, MSE, MSE_CI_lo, MSE_CI_hi, rho, rho_CI_lo,
// rho_CI_hi, avg_ll, ll_CI_lo, ll_CI_hi, perplexity. Absent values are empty.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsReport& report);
// Per-fold rows: a leading `fold` column, then the metrics columns.
void write_fold_header(std::ostream& out);
void write_fold_row(std::ostream& out, const MetricsReport& report);
std::string format_number(double v);

// Per-fold scores plus one score over the pooled held-out pixels of all
// folds (frame-unit intervals resample (fold, frame) pairs).
struct CvResult {
  std::vector<MetricsReport> folds;
  MetricsReport pooled;
};

struct CvOptions {
  std::size_t budget = 20000;
  std::uint64_t seed = 0;
  ScoreOptions scoring;
};

// Leave-one-experiment-out: each dataset in turn is held out, the rest pool
// their cones for training.
CvResult loo_experiment_cv(std::span<const Field> datasets, const ConeGeometry& geometry,
                           const MethodConfig& method, const CvOptions& options);

// Frames kept by the frame protocol: every skip-th frame (the 1-based
// multiples of skip) that admits complete cones.
std::vector<std::size_t> retained_frames(const Field& field, const ConeGeometry& geometry,
                                         std::size_t skip);

// Leave-one-frame-out over the retained frames; training cones come from the
// other retained frames only.
CvResult loo_frame_cv(const Field& field, const ConeGeometry& geometry, std::size_t skip,
                      const MethodConfig& method, const CvOptions& options);

}  // namespace lightcone
