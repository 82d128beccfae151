#include "lightcone/cluster.hpp"
#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <numeric>

using namespace lightcone;
using lightcone::testing::random_points;
using lightcone::testing::rows;

namespace {

Matrix two_blobs(std::size_t per_blob, double distance, double spread, std::uint64_t seed,
                 std::vector<std::size_t>* truth = nullptr) {
  Matrix m = random_points(2 * per_blob, 2, seed) * spread;
  for (std::size_t i = per_blob; i < 2 * per_blob; ++i) m(long(i), 0) += distance;
  if (truth) {
    truth->assign(2 * per_blob, 0);
    for (std::size_t i = per_blob; i < 2 * per_blob; ++i) (*truth)[i] = 1;
  }
  return m;
}

// True when the two labelings induce the same partition.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::size_t, std::size_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fresh] = ab.emplace(a[i], b[i]);
    if (!fresh && x->second != b[i]) return false;
    auto [y, fresh2] = ba.emplace(b[i], a[i]);
    if (!fresh2 && y->second != a[i]) return false;
  }
  return true;
}

double sq(const Matrix& m, long i, long j) { return (m.row(i) - m.row(j)).squaredNorm(); }

}  // namespace

TEST_CASE("fixed-radius DBSCAN agrees with a brute-force core graph") {
  const Matrix pts = random_points(150, 2, 21);
  for (double radius : {0.15, 0.3, 0.6}) {
    const std::size_t min_pts = 4;
    const long n = pts.rows();
    std::vector<bool> core(n);
    for (long i = 0; i < n; ++i) {
      std::size_t c = 0;
      for (long j = 0; j < n; ++j) c += sq(pts, i, j) <= radius * radius;
      core[i] = c >= min_pts;
    }
    // Union-find over core-core edges.
    std::vector<long> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](long x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j)
        if (core[i] && core[j] && sq(pts, i, j) <= radius * radius) parent[find(i)] = find(j);

    const auto labels = dbscan(pts, radius, min_pts);
    std::vector<std::size_t> core_labels, core_roots;
    for (long i = 0; i < n; ++i) {
      if (core[i]) {
        core_labels.push_back(labels[i]);
        core_roots.push_back(std::size_t(find(i)));
        continue;
      }
      bool near_core = false;
      for (long j = 0; j < n; ++j)
        if (core[j] && sq(pts, i, j) <= radius * radius) {
          near_core = true;
          if (labels[i] == labels[j]) break;
        }
      if (!near_core) {
        CHECK(labels[i] == kNoise);
      } else {
        // A border point joins the cluster of one of its core neighbours.
        bool ok = false;
        for (long j = 0; j < n; ++j)
          ok = ok || (core[j] && sq(pts, i, j) <= radius * radius && labels[j] == labels[i]);
        CHECK(ok);
      }
    }
    CHECK(same_partition(core_labels, core_roots));
  }
}

TEST_CASE("adaptive DBSCAN separates two distant blobs") {
  std::vector<std::size_t> truth;
  const Matrix pts = two_blobs(200, 10.0, 0.5, 3, &truth);
  const Clustering c = dbscan_adaptive(pts, {}, 1);
  CHECK(c.cluster_count() == 2);
  CHECK(c.coverage >= 0.9);
  CHECK(c.labels.size() == pts.rows());
  CHECK(same_partition(c.labels, truth));
  const Matrix means = cluster_means(pts, c.labels, c.cluster_count());
  CHECK((means - c.centers).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adaptive DBSCAN reaches the coverage target") {
  const Matrix pts = random_points(800, 3, 8);
  for (double target : {0.5, 0.9}) {
    DbscanOptions o;
    o.target_coverage = target;
    const Clustering c = dbscan_adaptive(pts, o, 2);
    CHECK(c.coverage >= target);
    for (auto l : c.labels) CHECK(l < c.cluster_count());
  }
}

TEST_CASE("adaptive DBSCAN with a seed budget labels every point without mixing blobs") {
  std::vector<std::size_t> truth;
  const Matrix pts = two_blobs(3000, 10.0, 0.5, 4, &truth);
  DbscanOptions o;
  o.seed_budget = 1000;
  const Clustering c = dbscan_adaptive(pts, o, 6);
  REQUIRE(c.labels.size() == 6000);
  // Tails may split off into small clusters, but none straddles the blobs.
  std::map<std::size_t, std::size_t> blob_of;
  bool pure = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto [it, fresh] = blob_of.emplace(c.labels[i], truth[i]);
    pure = pure && (fresh || it->second == truth[i]);
  }
  CHECK(pure);
}

TEST_CASE("identical points form one cluster with full coverage") {
  const Matrix pts = Matrix::Constant(50, 3, 1.25);
  const Clustering c = dbscan_adaptive(pts, {}, 0);
  CHECK(c.cluster_count() == 1);
  CHECK(c.coverage == 1.0);
}

TEST_CASE("k-means examples") {
  const Matrix line = rows({{0}, {0}, {0}, {10}, {10}, {10}});
  const Clustering two = kmeanspp(line, 2, 5);
  std::vector<double> centers{two.centers(0, 0), two.centers(1, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK(centers == std::vector<double>{0.0, 10.0});
  CHECK(within_cluster_sse(line, two.labels, two.centers) == 0.0);

  // Exhaustive minimum over all 2-partitions is also 0.
  double best = INFINITY;
  for (unsigned mask = 1; mask < (1u << 6) - 1; ++mask) {
    std::vector<std::size_t> lab(6);
    for (unsigned i = 0; i < 6; ++i) lab[i] = (mask >> i) & 1u;
    const Matrix m = cluster_means(line, lab, 2);
    best = std::min(best, within_cluster_sse(line, lab, m));
  }
  CHECK(best == 0.0);

  const Matrix pts = random_points(40, 2, 2);
  const Clustering single = kmeanspp(pts, 1, 0);
  CHECK((single.centers.row(0) - pts.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);

  const Clustering full = kmeanspp(pts, 40, 0);
  CHECK(within_cluster_sse(pts, full.labels, full.centers) == doctest::Approx(0.0));
  CHECK_THROWS_AS(kmeanspp(pts, 41, 0), Error);
}

TEST_CASE("k-means matches the exhaustive optimum on small separated sets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix pts = random_points(9, 1, seed) * 0.3;
    for (long i = 0; i < 4; ++i) pts(i, 0) += 5.0;
    const Clustering c = kmeanspp(pts, 2, seed);
    double best = INFINITY;
    for (unsigned mask = 1; mask < (1u << 9) - 1; ++mask) {
      std::vector<std::size_t> lab(9);
      for (unsigned i = 0; i < 9; ++i) lab[i] = (mask >> i) & 1u;
      best = std::min(best, within_cluster_sse(pts, lab, cluster_means(pts, lab, 2)));
    }
    CHECK(within_cluster_sse(pts, c.labels, c.centers) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("Lloyd iterations never increase the SSE") {
  const Matrix pts = random_points(600, 3, 17);
  const Clustering c = kmeanspp(pts, 7, 3);
  REQUIRE(!c.sse_trace.empty());
  for (std::size_t i = 1; i < c.sse_trace.size(); ++i)
    CHECK(c.sse_trace[i] <= c.sse_trace[i - 1] * (1 + 1e-12));
  const Matrix means = cluster_means(pts, c.labels, 7);
  CHECK((means - c.centers).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("k-means recovers well-separated blobs in at least 95 of 100 seeds") {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<std::size_t> truth;
    const Matrix pts = two_blobs(50, 10.0, 0.5, 1000 + seed, &truth);
    hits += same_partition(kmeanspp(pts, 2, seed).labels, truth);
  }
  CHECK(hits >= 95);
}

TEST_CASE("nearest-center assignment") {
  const Matrix centers = rows({{0}, {10}});
  CHECK(assign_nearest_center(rows({{5}}), centers)[0] == 0);
  CHECK(assign_nearest_center(rows({{10}}), centers)[0] == 1);

  const Matrix pts = random_points(300, 3, 1);
  const Matrix cs = random_points(6, 3, 2);
  const auto labels = assign_nearest_center(pts, cs);
  for (long i = 0; i < pts.rows(); ++i) {
    long arg = 0;
    for (long c = 1; c < cs.rows(); ++c)
      if ((pts.row(i) - cs.row(c)).squaredNorm() < (pts.row(i) - cs.row(arg)).squaredNorm()) arg = c;
    CHECK(labels[i] == std::size_t(arg));
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Matrix pts = random_points(3000, 4, 5);
  set_thread_count(1);
  const Clustering a = dbscan_adaptive(pts, {}, 9);
  const Clustering ka = kmeanspp(pts, 5, 9);
  set_thread_count(4);
  const Clustering b = dbscan_adaptive(pts, {}, 9);
  const Clustering kb = kmeanspp(pts, 5, 9);
  set_thread_count(0);
  CHECK(a.labels == b.labels);
  CHECK(a.centers == b.centers);
  CHECK(ka.labels == kb.labels);
  CHECK(ka.sse_trace == kb.sse_trace);
}
