#include "lightcone/kde.hpp"

#include "lightcone/error.hpp"
#include "lightcone/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace lightcone {

double gaussian_kernel_at_zero(double bandwidth, std::size_t dim) {
  return std::pow(2.0 * std::numbers::pi * bandwidth * bandwidth,
                  -0.5 * static_cast<double>(dim));
}

Kde::Kde(Matrix support, std::vector<double> weights, double bandwidth)
    : support_(std::move(support)), weights_(std::move(weights)), bandwidth_(bandwidth) {
  validate(true);
}

Kde Kde::restore(Matrix support, std::vector<double> weights, double bandwidth) {
  Kde kde;
  kde.support_ = std::move(support);
  kde.weights_ = std::move(weights);
  kde.bandwidth_ = bandwidth;
  kde.validate(false);
  return kde;
}

void Kde::validate(bool renormalize) {
  require(support_.rows() > 0 && support_.cols() > 0, Errc::invalid_argument,
          "KDE support must be non-empty");
  require(static_cast<Eigen::Index>(weights_.size()) == support_.rows(),
          Errc::dimension_mismatch, "KDE weight count does not match support size");
  require(std::isfinite(bandwidth_) && bandwidth_ > 0.0, Errc::invalid_argument,
          "KDE bandwidth must be positive");
  require(support_.allFinite(), Errc::non_finite, "KDE support must be finite");
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, Errc::invalid_argument,
            "KDE weights must be nonnegative");
    total += w;
  }
  require(total > 0.0, Errc::invalid_argument, "KDE weights are all zero");
  if (renormalize)
    for (double& w : weights_) w /= total;
  else
    require(std::abs(total - 1.0) < 1e-9, Errc::invalid_argument,
            "restored KDE weights do not sum to one");
  log_norm_ = -0.5 * static_cast<double>(dim()) *
              std::log(2.0 * std::numbers::pi * bandwidth_ * bandwidth_);
}

void Kde::check_query(std::span<const double> x) const {
  require(x.size() == dim(), Errc::dimension_mismatch,
          "KDE query has dimension " + std::to_string(x.size()) + ", expected " +
              std::to_string(dim()));
}

double Kde::density(std::span<const double> x) const {
  check_query(x);
  const std::size_t d = dim();
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  const double* s = support_.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i, s += d) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = s[k] - x[k];
      sq += diff * diff;
    }
    acc += weights_[i] * std::exp(-sq * inv);
  }
  return acc * std::exp(log_norm_);
}

double Kde::log_density(std::span<const double> x) const {
  check_query(x);
  const double linear = density(x);
  if (linear > 1e-280) return std::log(linear);
  // Underflow regime: running log-sum-exp over the support.
  const std::size_t d = dim();
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  double top = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  const double* s = support_.data();
  for (std::size_t i = 0; i < size(); ++i, s += d) {
    if (weights_[i] <= 0.0) continue;
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = s[k] - x[k];
      sq += diff * diff;
    }
    const double e = std::log(weights_[i]) - sq * inv;
    if (e > top) {
      acc = acc * std::exp(top - e) + 1.0;
      top = e;
    } else {
      acc += std::exp(e - top);
    }
  }
  return top + std::log(acc) + log_norm_;
}

double Kde::kernel_at_zero() const { return std::exp(log_norm_); }

double silverman_bandwidth(const Matrix& points, std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  if (!weights.empty()) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) p[i] = weights[i] / total;
  }
  double sum_sq = 0.0;
  for (double v : p) sum_sq += v * v;
  const double n_eff = 1.0 / sum_sq;
  const double factor = std::pow(4.0 / ((static_cast<double>(d) + 2.0) * n_eff),
                                 1.0 / (static_cast<double>(d) + 4.0));
  double h = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += p[i] * points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) - mean;
      var += p[i] * diff * diff;
    }
    h += std::sqrt(var) * factor;
  }
  return std::max(h / static_cast<double>(d), kMinBandwidth);
}

Kde fit_kde(const Matrix& points, std::span<const double> weights, const KdeOptions& options) {
  require(points.rows() >= 1 && points.cols() >= 1, Errc::invalid_argument,
          "KDE needs at least one point");
  require(points.allFinite(), Errc::non_finite, "KDE points must be finite");
  require(options.cap >= 1, Errc::invalid_argument, "KDE cap must be >= 1");
  const auto n = static_cast<std::size_t>(points.rows());

  std::vector<std::size_t> candidates;
  std::vector<double> w;
  if (weights.empty()) {
    candidates.resize(n);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  } else {
    require(weights.size() == n, Errc::dimension_mismatch,
            "KDE weight count does not match point count");
    // Zero-weight points carry no mass, so they never take a support slot.
    for (std::size_t i = 0; i < n; ++i) {
      require(std::isfinite(weights[i]) && weights[i] >= 0.0, Errc::invalid_argument,
              "KDE weights must be nonnegative");
      if (weights[i] > 0.0) candidates.push_back(i);
    }
    require(!candidates.empty(), Errc::invalid_argument, "KDE weights are all zero");
  }

  std::vector<std::size_t> keep = candidates;
  if (candidates.size() > options.cap) {
    Rng rng(options.seed);
    const auto picked = sample_without_replacement(candidates.size(), options.cap, rng);
    keep.clear();
    for (std::size_t k : picked) keep.push_back(candidates[k]);
  }

  Matrix support(static_cast<Eigen::Index>(keep.size()), points.cols());
  w.resize(keep.size(), 1.0);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    support.row(static_cast<Eigen::Index>(k)) = points.row(static_cast<Eigen::Index>(keep[k]));
    if (!weights.empty()) w[k] = weights[keep[k]];
  }
  const double h = options.bandwidth ? *options.bandwidth
                                     : silverman_bandwidth(support, weights.empty() ? std::span<const double>{} : std::span<const double>(w));
  return Kde(std::move(support), std::move(w), h);
}

}  // namespace lightcone
