#include "lightcone/cluster.hpp"

#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace lightcone {

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

const double* row_ptr(const Matrix& m, std::size_t i) {
  return m.data() + i * static_cast<std::size_t>(m.cols());
}

bool all_rows_identical(const Matrix& points) {
  for (Eigen::Index i = 1; i < points.rows(); ++i)
    if (points.row(i) != points.row(0)) return false;
  return true;
}

Matrix rows_of(const Matrix& points, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), points.cols());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = points.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

// Starting radius: a low percentile of the pairwise distances on a probe
// sample, moved up to the smallest positive distance when duplicates push
// the percentile to zero.
double starting_radius(const Matrix& sample, const DbscanOptions& options, Rng& rng) {
  const auto n = static_cast<std::size_t>(sample.rows());
  const auto probe_idx = sample_without_replacement(n, std::min(n, options.probe_size), rng);
  const std::size_t m = probe_idx.size();
  const auto d = static_cast<std::size_t>(sample.cols());
  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  double smallest_positive = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double v = std::sqrt(squared_distance(row_ptr(sample, probe_idx[a]),
                                                  row_ptr(sample, probe_idx[b]), d));
      dist.push_back(v);
      if (v > 0.0) smallest_positive = std::min(smallest_positive, v);
    }
  double eps = 0.0;
  if (!dist.empty()) {
    const auto at = static_cast<std::size_t>(options.probe_percentile *
                                             static_cast<double>(dist.size() - 1));
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(at), dist.end());
    eps = dist[at];
  }
  if (eps > 0.0) return eps;
  if (std::isfinite(smallest_positive)) return smallest_positive;
  // The probe is all duplicates; fall back to the spread of the full sample.
  double far = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    far = std::max(far, std::sqrt(squared_distance(row_ptr(sample, i), row_ptr(sample, 0), d)));
  return far > 0.0 ? far * 1e-3 : 1.0;
}

}  // namespace

std::vector<std::size_t> dbscan(const Matrix& points, double radius, std::size_t min_pts) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  const double r2 = radius * radius;

  std::vector<char> core(n, 0);
  parallel_for(n, [&](std::size_t i) {
    std::size_t count = 0;
    const double* p = row_ptr(points, i);
    for (std::size_t j = 0; j < n && count < min_pts; ++j)
      if (squared_distance(p, row_ptr(points, j), d) <= r2) ++count;
    core[i] = count >= min_pts;
  });

  std::vector<std::size_t> labels(n, kNoise);
  std::size_t next_id = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (labels[seed] != kNoise || !core[seed]) continue;
    const std::size_t id = next_id++;
    labels[seed] = id;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t cur = frontier.front();
      frontier.pop_front();
      const double* p = row_ptr(points, cur);
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] != kNoise) continue;
        if (squared_distance(p, row_ptr(points, j), d) > r2) continue;
        labels[j] = id;
        if (core[j]) frontier.push_back(j);
      }
    }
  }
  return labels;
}

std::vector<std::size_t> assign_nearest_center(const Matrix& points, const Matrix& centers) {
  require(centers.rows() >= 1, Errc::invalid_argument, "need at least one center");
  require(centers.cols() == points.cols(), Errc::dimension_mismatch,
          "points and centers differ in dimension");
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(centers.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  std::vector<std::size_t> labels(n, 0);
  parallel_for(n, [&](std::size_t i) {
    const double* p = row_ptr(points, i);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double v = squared_distance(p, row_ptr(centers, c), d);
      if (v < best) {
        best = v;
        arg = c;
      }
    }
    labels[i] = arg;
  });
  return labels;
}

Matrix cluster_means(const Matrix& points, std::span<const std::size_t> labels, std::size_t k) {
  require(labels.size() == static_cast<std::size_t>(points.rows()), Errc::dimension_mismatch,
          "label count does not match point count");
  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < k, Errc::invalid_argument, "label out of range");
    sums.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    require(counts[c] > 0, Errc::invalid_argument, "empty cluster");
    sums.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  return sums;
}

double within_cluster_sse(const Matrix& points, std::span<const std::size_t> labels,
                          const Matrix& centers) {
  const auto d = static_cast<std::size_t>(points.cols());
  double sse = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    sse += squared_distance(row_ptr(points, i), row_ptr(centers, labels[i]), d);
  return sse;
}

Clustering dbscan_adaptive(const Matrix& points, const DbscanOptions& options,
                           std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(n >= 1, Errc::invalid_argument, "cannot cluster an empty point set");
  require(options.min_pts >= 1, Errc::invalid_argument, "min_pts must be >= 1");
  require(options.target_coverage > 0.0 && options.target_coverage < 1.0,
          Errc::invalid_argument, "target coverage must lie in (0, 1)");
  require(options.growth > 1.0, Errc::invalid_argument, "radius growth must exceed 1");

  Clustering out;
  if (all_rows_identical(points)) {
    out.labels.assign(n, 0);
    out.centers = points.topRows(1);
    out.coverage = 1.0;
    return out;
  }
  require(n >= options.min_pts, Errc::invalid_argument,
          "density clustering needs at least min_pts points");

  Rng rng(seed);
  std::vector<std::size_t> seed_idx;
  if (n > options.seed_budget) {
    seed_idx = sample_without_replacement(n, options.seed_budget, rng);
  } else {
    seed_idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) seed_idx[i] = i;
  }
  const Matrix sample = rows_of(points, seed_idx);
  const std::size_t m = seed_idx.size();

  double radius = starting_radius(sample, options, rng);
  std::vector<std::size_t> labels;
  double coverage = 0.0;
  for (std::size_t pass = 0; pass < options.max_passes; ++pass, radius *= options.growth) {
    labels = dbscan(sample, radius, std::min(options.min_pts, m));
    const auto clustered = static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](std::size_t l) { return l != kNoise; }));
    coverage = static_cast<double>(clustered) / static_cast<double>(m);
    if (coverage >= options.target_coverage) break;
  }
  require(coverage > 0.0, Errc::invalid_argument, "density clustering found no clusters");

  std::size_t k = 0;
  for (std::size_t l : labels)
    if (l != kNoise) k = std::max(k, l + 1);
  std::vector<std::size_t> core_members;
  std::vector<std::size_t> core_labels;
  for (std::size_t i = 0; i < m; ++i)
    if (labels[i] != kNoise) {
      core_members.push_back(i);
      core_labels.push_back(labels[i]);
    }
  const Matrix seed_centers = cluster_means(rows_of(sample, core_members), core_labels, k);

  // Every point outside the density clusters, including the ones never
  // offered to DBSCAN, goes to its nearest density-cluster centroid.
  out.labels = assign_nearest_center(points, seed_centers);
  for (std::size_t i = 0; i < m; ++i)
    if (labels[i] != kNoise) out.labels[seed_idx[i]] = labels[i];
  out.centers = cluster_means(points, out.labels, k);
  out.coverage = coverage;
  return out;
}

Clustering kmeanspp(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  require(k >= 1, Errc::invalid_argument, "k must be >= 1");
  require(k <= n, Errc::invalid_argument,
          "k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<char> taken(n, 0);
  chosen.push_back(uniform_index(rng, n));
  taken[chosen.back()] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = squared_distance(row_ptr(points, i), row_ptr(points, chosen[0]), d);
  while (chosen.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform_unit(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) free.push_back(i);
      pick = free[uniform_index(rng, free.size())];
    }
    chosen.push_back(pick);
    taken[pick] = 1;
    parallel_for(n, [&](std::size_t i) {
      d2[i] = std::min(d2[i], squared_distance(row_ptr(points, i), row_ptr(points, pick), d));
    });
  }

  Matrix centers = rows_of(points, chosen);
  Clustering out;

  auto fix_empty = [&](std::vector<std::size_t>& labels) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t l : labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double far = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        const double v = squared_distance(row_ptr(points, i), row_ptr(centers, labels[i]), d);
        if (v > far) {
          far = v;
          arg = i;
        }
      }
      --counts[labels[arg]];
      labels[arg] = c;
      counts[c] = 1;
    }
  };

  std::vector<std::size_t> labels = assign_nearest_center(points, centers);
  fix_empty(labels);
  centers = cluster_means(points, labels, k);
  out.sse_trace.push_back(within_cluster_sse(points, labels, centers));
  for (std::size_t iter = 1; iter < options.max_iters; ++iter) {
    auto next = assign_nearest_center(points, centers);
    if (next == labels) break;
    labels = std::move(next);
    fix_empty(labels);
    centers = cluster_means(points, labels, k);
    out.sse_trace.push_back(within_cluster_sse(points, labels, centers));
  }
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  out.coverage = 1.0;
  return out;
}

}  // namespace lightcone
