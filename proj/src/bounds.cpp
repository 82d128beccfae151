#include "lightcone/bounds.hpp"

#include "lightcone/error.hpp"
#include "lightcone/eval.hpp"
#include "lightcone/kde.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lightcone {

PerturbationCase perturbation_case(std::span<const double> support, std::size_t dim,
                                   std::span<const double> weights, std::size_t index,
                                   double eps, std::span<const double> query, double bandwidth) {
  require(dim >= 1 && support.size() % dim == 0, Errc::dimension_mismatch,
          "support size is not a multiple of the dimension");
  const std::size_t n = support.size() / dim;
  require(weights.size() == n && index < n, Errc::dimension_mismatch,
          "weight column does not match the support");
  require(eps >= 0.0, Errc::invalid_argument, "perturbation must be nonnegative");

  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::copy(support.begin(), support.end(), pts.data());
  std::vector<double> base(weights.begin(), weights.end());
  std::vector<double> moved = base;
  moved[index] += eps;

  PerturbationCase out;
  for (double w : base) out.weight_sum += w;
  const Kde before(pts, std::move(base), bandwidth);
  const Kde after(std::move(pts), std::move(moved), bandwidth);
  out.difference = std::abs(after.density(query) - before.density(query));
  out.bound = eps / (out.weight_sum + eps) * before.kernel_at_zero();
  return out;
}

BoundTrialReport check_lemma1(std::size_t trials, std::size_t max_points, std::size_t max_dim,
                              double bandwidth, std::uint64_t seed) {
  require(max_points >= 2, Errc::invalid_argument, "trials need N >= 2");
  require(max_dim >= 1, Errc::invalid_argument, "trials need d >= 1");
  require(bandwidth > 0.0, Errc::invalid_argument, "bandwidth must be positive");

  std::vector<PerturbationCase> cases(trials);
  std::vector<double> eps_used(trials);
  parallel_for(trials, [&](std::size_t trial) {
    Rng rng(derive_seed(seed, trial));
    const std::size_t n = 2 + uniform_index(rng, max_points - 1);
    const std::size_t d = 1 + uniform_index(rng, max_dim);
    std::vector<double> support(n * d);
    for (auto& v : support) v = standard_normal(rng);
    std::vector<double> w(n);
    for (auto& v : w) v = uniform_index(rng, 5) == 0 ? 0.0 : uniform_unit(rng);
    w[uniform_index(rng, n)] += 0.5;  // keeps N* positive
    const std::size_t i = uniform_index(rng, n);
    const double eps = uniform_index(rng, 64) == 0 ? 0.0 : std::pow(10.0, -3.0 + 5.0 * uniform_unit(rng));
    std::vector<double> x(d);
    if (uniform_index(rng, 2) == 0) {
      // Query near a support point, where the kernel term is largest.
      const std::size_t k = uniform_index(rng, n);
      for (std::size_t a = 0; a < d; ++a)
        x[a] = support[k * d + a] + 0.1 * bandwidth * standard_normal(rng);
    } else {
      for (auto& v : x) v = 2.0 * standard_normal(rng);
    }
    cases[trial] = perturbation_case(support, d, w, i, eps, x, bandwidth);
    eps_used[trial] = eps;
  });

  BoundTrialReport rep;
  rep.trials = trials;
  rep.max_points = max_points;
  rep.max_dim = max_dim;
  rep.bandwidth = bandwidth;
  rep.min_weight_sum = trials ? cases[0].weight_sum : 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& c = cases[t];
    if (c.difference > c.bound + kLemmaSlack) ++rep.violations;
    if (c.bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, c.difference / c.bound);
    rep.min_weight_sum = std::min(rep.min_weight_sum, c.weight_sum);
    rep.max_weight_sum = std::max(rep.max_weight_sum, c.weight_sum);
    rep.max_eps = std::max(rep.max_eps, eps_used[t]);
  }
  return rep;
}

double concentration_bound(double a, double weight_sum, std::size_t n, double kernel_zero) {
  const double s = 1.0 + weight_sum;
  return 2.0 * std::exp(-2.0 * s * s * a * a / (static_cast<double>(n) * kernel_zero * kernel_zero));
}

ConcentrationReport check_concentration(std::size_t trials, std::size_t points,
                                        std::span<const double> a_grid, std::uint64_t seed,
                                        const ConcentrationOptions& options) {
  require(points >= 2, Errc::invalid_argument, "concentration check needs N >= 2");
  require(trials >= 1, Errc::invalid_argument, "concentration check needs trials");
  require(options.states >= 1 && options.dim >= 1, Errc::invalid_argument,
          "states and dimension must be positive");
  require(options.bandwidth > 0.0 && options.max_eps > 0.0, Errc::invalid_argument,
          "bandwidth and eps range must be positive");

  const std::size_t d = options.dim;
  Rng rng(seed);
  std::vector<double> support(points * d);
  for (auto& v : support) v = standard_normal(rng);
  // Soft assignment: each point's weights over the states sum to one.
  std::vector<double> assign(points * options.states);
  for (std::size_t l = 0; l < points; ++l) {
    double total = 0.0;
    for (std::size_t j = 0; j < options.states; ++j)
      total += assign[l * options.states + j] = 0.05 + uniform_unit(rng);
    for (std::size_t j = 0; j < options.states; ++j) assign[l * options.states + j] /= total;
  }
  std::vector<double> column(points);
  for (std::size_t l = 0; l < points; ++l) column[l] = assign[l * options.states];
  std::vector<double> query(d);
  for (std::size_t a = 0; a < d; ++a) query[a] = support[a];

  ConcentrationReport rep;
  rep.trials = trials;
  rep.points = points;
  rep.dim = d;
  rep.states = options.states;
  rep.bandwidth = options.bandwidth;
  rep.kernel_zero = gaussian_kernel_at_zero(options.bandwidth, d);
  rep.max_eps = options.max_eps;
  rep.state_weight_sums.assign(options.states, 0.0);
  for (std::size_t l = 0; l < points; ++l)
    for (std::size_t j = 0; j < options.states; ++j)
      rep.state_weight_sums[j] += assign[l * options.states + j];
  rep.weight_sum = rep.state_weight_sums[0];
  rep.lemma1_limit = options.max_eps / (rep.weight_sum + options.max_eps) * rep.kernel_zero;

  std::vector<double> diffs(trials);
  parallel_for(trials, [&](std::size_t trial) {
    Rng local(derive_seed(seed, trial + 1));
    const std::size_t i = uniform_index(local, points);
    const double eps = options.max_eps * uniform_unit(local);
    diffs[trial] = perturbation_case(support, d, column, i, eps, query, options.bandwidth).difference;
  });

  const double min_sum = *std::min_element(rep.state_weight_sums.begin(), rep.state_weight_sums.end());
  const double max_sum = *std::max_element(rep.state_weight_sums.begin(), rep.state_weight_sums.end());
  for (double a : a_grid) {
    ConcentrationPoint p;
    p.a = a;
    std::size_t hits = 0;
    for (double v : diffs)
      if (v >= a) ++hits;
    p.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    p.std_error = std::sqrt(p.empirical * (1.0 - p.empirical) / static_cast<double>(trials));
    p.bound = concentration_bound(a, rep.weight_sum, points, rep.kernel_zero);
    p.vacuous = p.bound >= 1.0;
    p.pass = p.vacuous || p.empirical <= p.bound + 3.0 * p.std_error;
    if (!p.pass) rep.pass = false;

    p.bound_min_sum = concentration_bound(a, min_sum, points, rep.kernel_zero);
    p.bound_max_sum = concentration_bound(a, max_sum, points, rep.kernel_zero);
    for (double s : rep.state_weight_sums) {
      const double b = concentration_bound(a, s, points, rep.kernel_zero);
      if (p.bound_min_sum < b) rep.min_sum_dominates = false;
      if (p.bound_max_sum < b) rep.max_sum_dominates = false;
    }
    rep.grid.push_back(p);
  }
  return rep;
}

void write_lemma1_csv(std::ostream& out, const BoundTrialReport& r) {
  out << "trials,violations,max_ratio,max_N,max_d,h,min_weight_sum,max_weight_sum,max_eps\n"
      << r.trials << ',' << r.violations << ',' << format_number(r.max_ratio) << ','
      << r.max_points << ',' << r.max_dim << ',' << format_number(r.bandwidth) << ','
      << format_number(r.min_weight_sum) << ',' << format_number(r.max_weight_sum) << ','
      << format_number(r.max_eps) << '\n';
}

void write_concentration_csv(std::ostream& out, const ConcentrationReport& r) {
  out << "a,empirical,std_error,bound,vacuous,pass,bound_min_sum,bound_max_sum\n";
  for (const auto& p : r.grid)
    out << format_number(p.a) << ',' << format_number(p.empirical) << ','
        << format_number(p.std_error) << ',' << format_number(p.bound) << ','
        << (p.vacuous ? 1 : 0) << ',' << (p.pass ? 1 : 0) << ',' << format_number(p.bound_min_sum)
        << ',' << format_number(p.bound_max_sum) << '\n';
}

void write_bounds_summary(std::ostream& out, const BoundTrialReport& lemma,
                          const ConcentrationReport& c) {
  out << "perturbation bound: " << lemma.trials << " trials, " << lemma.violations
      << " violations, max difference/bound " << format_number(lemma.max_ratio) << '\n';
  std::size_t scored = 0;
  for (const auto& p : c.grid)
    if (!p.vacuous) ++scored;
  out << "concentration: " << c.trials << " trials, N=" << c.points << ", N*="
      << format_number(c.weight_sum) << ", K_h(0)=" << format_number(c.kernel_zero) << ", "
      << scored << " of " << c.grid.size() << " grid points non-vacuous, "
      << (c.pass ? "pass" : "FAIL") << '\n';
  out << "perturbation ceiling for eps <= " << format_number(c.max_eps) << ": "
      << format_number(c.lemma1_limit) << '\n';
  out << "smallest-weight-sum bound dominates all states: " << (c.min_sum_dominates ? "yes" : "no")
      << "; largest-weight-sum bound does: " << (c.max_sum_dominates ? "yes" : "no") << '\n';
}

}  // namespace lightcone
