#pragma once

#include "lightcone/field.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace lightcone {

inline constexpr std::size_t kDefaultKdeCap = 500;
inline constexpr double kMinBandwidth = 1e-6;

/// Weighted Gaussian product-kernel density estimate with a single isotropic
/// bandwidth:
///
///   f(x) = sum_i w_i (2 pi h^2)^(-d/2) exp(-|x_i - x|^2 / (2 h^2)),
///
/// with weights normalized to sum to one.
class Kde {
 public:
  Kde() = default;

  // Takes support and weights as given (no subsampling); weights are
  // renormalized. Weights must be nonnegative with a positive sum.
  Kde(Matrix support, std::vector<double> weights, double bandwidth);

  // Rebuilds a serialized estimator; weights are kept bit-for-bit and must
  // already sum to one.
  static Kde restore(Matrix support, std::vector<double> weights, double bandwidth);

  std::size_t size() const { return static_cast<std::size_t>(support_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(support_.cols()); }
  double bandwidth() const { return bandwidth_; }
  const Matrix& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }

  double density(std::span<const double> x) const;
  // log f(x) computed with a shifted exponent sum, finite wherever the
  // support is non-empty.
  double log_density(std::span<const double> x) const;

  // K_h(0) = (2 pi h^2)^(-d/2).
  double kernel_at_zero() const;

  friend bool operator==(const Kde& a, const Kde& b) {
    return a.bandwidth_ == b.bandwidth_ && a.weights_ == b.weights_ &&
           a.support_.rows() == b.support_.rows() && a.support_.cols() == b.support_.cols() &&
           a.support_ == b.support_;
  }

 private:
  void check_query(std::span<const double> x) const;
  void validate(bool renormalize);

  Matrix support_;
  std::vector<double> weights_;
  double bandwidth_ = 1.0;
  double log_norm_ = 0.0;  // log K_h(0)
};

struct KdeOptions {
  std::optional<double> bandwidth;
  std::size_t cap = kDefaultKdeCap;
  std::uint64_t seed = 0;
};

// Fits a KDE to the rows of `points`. When there are more than `cap` points,
// a seeded uniform subsample of size `cap` is retained and its weights
// renormalized. Without an explicit bandwidth, Silverman's rule is applied
// per dimension on the retained points and averaged into one scalar,
// floored at kMinBandwidth.
Kde fit_kde(const Matrix& points, std::span<const double> weights = {},
            const KdeOptions& options = {});

double silverman_bandwidth(const Matrix& points, std::span<const double> weights);

// (2 pi h^2)^(-d/2)
double gaussian_kernel_at_zero(double bandwidth, std::size_t dim);

}  // namespace lightcone
