#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace lightcone {

// Both sides of the single-weight perturbation inequality for one
// configuration: |f_hat(x) - f_star(x)| against eps / (N* + eps) * K_h(0).
struct PerturbationCase {
  double difference = 0.0;
  double bound = 0.0;
  double weight_sum = 0.0;  // N*
};

// `support` is n x d row-major; weight `index` is raised by `eps`.
PerturbationCase perturbation_case(std::span<const double> support, std::size_t dim,
                                   std::span<const double> weights, std::size_t index,
                                   double eps, std::span<const double> query, double bandwidth);

inline constexpr double kLemmaSlack = 1e-12;

struct BoundTrialReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // largest difference / bound over trials with bound > 0
  std::size_t max_points = 0;
  std::size_t max_dim = 0;
  double bandwidth = 0.0;
  double min_weight_sum = 0.0;
  double max_weight_sum = 0.0;
  double max_eps = 0.0;
};

// Randomized trials of the perturbation inequality. Each trial draws its own
// support size in [2, max_points], dimension in [1, max_dim], support points,
// weights, perturbed index, eps (zero in one trial out of 64) and query.
BoundTrialReport check_lemma1(std::size_t trials, std::size_t max_points, std::size_t max_dim,
                              double bandwidth, std::uint64_t seed);

// 2 exp{-2 (1 + N*)^2 a^2 / (N K_h(0)^2)}.
double concentration_bound(double a, double weight_sum, std::size_t n, double kernel_zero);

struct ConcentrationPoint {
  double a = 0.0;
  double empirical = 0.0;    // fraction of trials with |difference| >= a
  double std_error = 0.0;    // sqrt(p (1 - p) / n_mc)
  double bound = 0.0;
  bool vacuous = false;      // bound >= 1; not scored
  bool pass = true;          // empirical <= bound + 3 standard errors
  double bound_min_sum = 0.0;  // the bound using the smallest state weight sum
  double bound_max_sum = 0.0;  // the bound using the largest state weight sum
};

struct ConcentrationReport {
  std::size_t trials = 0;
  std::size_t points = 0;
  std::size_t dim = 0;
  std::size_t states = 0;
  double bandwidth = 0.0;
  double kernel_zero = 0.0;
  double weight_sum = 0.0;       // N* of the perturbed state
  std::vector<double> state_weight_sums;
  double max_eps = 0.0;
  double lemma1_limit = 0.0;     // max_eps / (N* + max_eps) * K_h(0)
  std::vector<ConcentrationPoint> grid;
  bool pass = true;
  // Whether the smallest-sum bound is >= every per-state bound, and whether
  // the largest-sum bound is, at every grid point.
  bool min_sum_dominates = true;
  bool max_sum_dominates = true;
};

struct ConcentrationOptions {
  std::size_t dim = 2;
  std::size_t states = 3;
  double bandwidth = 0.5;
  double max_eps = 1.0;
};

// Fixes one sample (points, a soft assignment of them to `states` states and
// a query), then perturbs a uniformly chosen weight of state 0 by
// eps ~ U(0, max_eps) in each Monte Carlo trial.
ConcentrationReport check_concentration(std::size_t trials, std::size_t points,
                                        std::span<const double> a_grid, std::uint64_t seed,
                                        const ConcentrationOptions& options = {});

void write_lemma1_csv(std::ostream& out, const BoundTrialReport& report);
void write_concentration_csv(std::ostream& out, const ConcentrationReport& report);
void write_bounds_summary(std::ostream& out, const BoundTrialReport& lemma,
                          const ConcentrationReport& concentration);

}  // namespace lightcone
