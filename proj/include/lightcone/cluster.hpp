#pragma once

#include "lightcone/field.hpp"

#include <cstdint>
#include <vector>

namespace lightcone {

struct Clustering {
  std::vector<std::size_t> labels;  // one per point, in [0, K)
  Matrix centers;                   // K x d, mean of each cluster's members
  // Fraction of points clustered by the density stage before nearest-center
  // fallback (1.0 for k-means).
  double coverage = 1.0;
  // Within-cluster sum of squares after each Lloyd update (k-means only).
  std::vector<double> sse_trace;

  std::size_t cluster_count() const { return static_cast<std::size_t>(centers.rows()); }
};

struct DbscanOptions {
  std::size_t min_pts = 4;
  double target_coverage = 0.9;
  double growth = 1.5;
  std::size_t probe_size = 2000;    // points used for the starting-radius percentile
  double probe_percentile = 0.01;
  std::size_t seed_budget = 5000;   // DBSCAN runs on at most this many points
  std::size_t max_passes = 200;
};

// Density-based clustering with a growing neighbourhood radius
// eps_0 * growth^i, where eps_0 is a low percentile of pairwise distances on a
// probe sample. The first radius whose clustered fraction reaches
// target_coverage is kept; the remaining noise points, and every point left
// out of the seed sample, go to the nearest cluster centroid.
Clustering dbscan_adaptive(const Matrix& points, const DbscanOptions& options,
                           std::uint64_t seed);

// Plain DBSCAN at a fixed radius. Labels are cluster ids in discovery order
// or kNoise.
inline constexpr std::size_t kNoise = static_cast<std::size_t>(-1);
std::vector<std::size_t> dbscan(const Matrix& points, double radius, std::size_t min_pts);

struct KMeansOptions {
  std::size_t max_iters = 100;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing. Empty clusters are reseeded at the point farthest from its
// center.
Clustering kmeanspp(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

// Euclidean nearest center; ties go to the lowest center index.
std::vector<std::size_t> assign_nearest_center(const Matrix& points, const Matrix& centers);

// Mean of each label's members; labels must cover [0, k).
Matrix cluster_means(const Matrix& points, std::span<const std::size_t> labels, std::size_t k);

double within_cluster_sse(const Matrix& points, std::span<const std::size_t> labels,
                          const Matrix& centers);

}  // namespace lightcone
