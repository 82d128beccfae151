#include "lightcone/baselines.hpp"
#include "lightcone/error.hpp"
#include "lightcone/states.hpp"
#include "lightcone/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace lightcone;
using lightcone::testing::random_field;
using lightcone::testing::random_points;
using lightcone::testing::rows;

namespace {

ConeSet plain_cones(Matrix plcs, Matrix flcs) {
  ConeSet c;
  c.origins.resize(static_cast<std::size_t>(plcs.rows()));
  for (std::size_t i = 0; i < c.origins.size(); ++i) c.origins[i] = {1, 0, std::uint32_t(i)};
  c.plcs = std::move(plcs);
  c.flcs = std::move(flcs);
  return c;
}

double brute_knn(const ConeSet& train, std::span<const double> q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (long i = 0; i < train.plcs.rows(); ++i) {
    double s = 0.0;
    for (long j = 0; j < train.plcs.cols(); ++j) s += std::pow(train.plcs(i, j) - q[j], 2);
    d.emplace_back(s, std::size_t(i));
  }
  std::sort(d.begin(), d.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += train.flcs(long(d[i].second), 0);
  return acc / double(k);
}

}  // namespace

TEST_CASE("LCLR recovers an exact linear rule") {
  SynthSpec spec;
  spec.frames = 4;
  spec.height = 24;
  spec.width = 24;
  spec.noise = 0.0;
  spec.coefficients.fill(0.5 / 9.0);
  const auto data = gen_linear_diffusion(spec);
  const auto cones = extract_cones(data.field, ConeGeometry());
  const auto m = fit_lclr(cones);
  CHECK(!m.ridge_used);
  for (double b : m.coefficients) CHECK(std::abs(b - 0.5 / 9.0) < 1e-9);
  CHECK(std::abs(m.intercept) < 1e-9);
  const auto pred = predict_lclr(m, cones);
  double mse = 0.0;
  for (std::size_t i = 0; i < cones.size(); ++i) mse += std::pow(pred[i] - cones.flcs(long(i), 0), 2);
  CHECK(mse / double(cones.size()) < 1e-18);
}

TEST_CASE("LCLR on a constant field falls back to ridge and fits the intercept") {
  const auto cones = extract_cones(Field(4, 8, 8, 2.5), ConeGeometry());
  const auto m = fit_lclr(cones);
  CHECK(m.ridge_used);
  for (double b : m.coefficients) CHECK(std::abs(b) < 1e-12);
  CHECK(m.intercept == doctest::Approx(2.5).epsilon(1e-12));
  for (double p : predict_lclr(m, cones)) CHECK(std::abs(p - 2.5) < 1e-12);
}

TEST_CASE("LCLR residuals are orthogonal to the design") {
  const auto cones = extract_cones(random_field(4, 15, 15, 2), ConeGeometry());
  const auto m = fit_lclr(cones);
  const auto pred = predict_lclr(m, cones);
  std::vector<double> res(cones.size());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = cones.flcs(long(i), 0) - pred[i];
  CHECK(std::abs(std::accumulate(res.begin(), res.end(), 0.0)) < 1e-6);
  for (long j = 0; j < 9; ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) dot += res[i] * cones.plcs(long(i), j);
    CHECK(std::abs(dot) < 1e-6);
  }
}

TEST_CASE("LCLR held-out error sits at the noise floor") {
  SynthSpec spec;
  spec.frames = 12;
  spec.height = 40;
  spec.width = 40;
  spec.noise = 0.3;
  spec.seed = 5;
  const auto data = gen_linear_diffusion(spec);
  const std::size_t train_frames[] = {1, 2, 3, 4, 5, 6, 7};
  const std::size_t test_frames[] = {8, 9, 10, 11};
  const auto train = extract_cones(data.field, ConeGeometry(), train_frames);
  const auto test = extract_cones(data.field, ConeGeometry(), test_frames);
  const auto m = fit_lclr(train);
  const auto pred = predict_lclr(m, test);
  double mse = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) mse += std::pow(pred[i] - test.flcs(long(i), 0), 2);
  mse /= double(test.size());
  CHECK(std::abs(mse / (0.3 * 0.3) - 1.0) < 0.1);
}

TEST_CASE("LCLR prediction is affine and validates input") {
  LinearConeModel m;
  m.coefficients = {0.5, -1.0, 2.0, 0, 0, 0, 0, 0, 0.25};
  m.intercept = 1.5;
  std::vector<double> p1(9), p2(9), mix(9);
  Rng rng(3);
  for (std::size_t i = 0; i < 9; ++i) {
    p1[i] = standard_normal(rng);
    p2[i] = standard_normal(rng);
    mix[i] = 0.3 * p1[i] + 0.7 * p2[i];
  }
  CHECK(predict_lclr(m, mix) ==
        doctest::Approx(0.3 * predict_lclr(m, p1) + 0.7 * predict_lclr(m, p2)).epsilon(1e-12));
  CHECK(predict_lclr(m, std::vector<double>(9, 0.0)) == 1.5);
  LinearConeModel zero;
  zero.coefficients.assign(9, 0.0);
  zero.intercept = -2.0;
  CHECK(predict_lclr(zero, p1) == -2.0);
  CHECK_THROWS_AS(predict_lclr(m, std::vector<double>(3, 0.0)), Error);
  CHECK_THROWS_AS(fit_lclr(extract_cones(random_field(2, 4, 4, 1), ConeGeometry())), Error);
}

TEST_CASE("linear model serialization round-trips") {
  const auto cones = extract_cones(random_field(4, 10, 10, 9), ConeGeometry());
  const auto m = fit_lclr(cones);
  const auto back = linear_model_from_sections(linear_model_sections(m));
  CHECK(back == m);
}

TEST_CASE("FLTP") {
  Field two(2, 1, 1, std::vector<double>{1.0, 2.0});
  CHECK(fltp_predict(two, 1, 0, 0) == 1.0);
  CHECK_THROWS_AS(fltp_predict(two, 0, 0, 0), Error);

  const Field f = random_field(6, 7, 9, 3);
  const auto cones = extract_cones(f, ConeGeometry());
  const auto pred = fltp_predict(cones);
  double mse = 0.0, diff = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cones.size(); ++i) {
    const auto& o = cones.origins[i];
    CHECK(pred[i] == fltp_predict(f, o.t, o.row, o.col));
    mse += std::pow(pred[i] - cones.flcs(long(i), 0), 2);
  }
  for (std::size_t t = 1; t < 6; ++t)
    for (std::size_t r = 1; r + 1 < 7; ++r)
      for (std::size_t c = 1; c + 1 < 9; ++c, ++n) diff += std::pow(f(t, r, c) - f(t - 1, r, c), 2);
  CHECK(n == cones.size());
  CHECK(mse / double(cones.size()) == diff / double(n));

  for (double p : fltp_predict(extract_cones(Field(3, 5, 5, 4.0), ConeGeometry()))) CHECK(p == 4.0);
}

TEST_CASE("kNN examples") {
  const ConeSet line = plain_cones(rows({{0}, {1}, {10}}), rows({{0}, {2}, {100}}));
  KnnOptions k2;
  k2.k = 2;
  CHECK(knn_predict(line, std::vector<double>{0.4}, k2) == 1.0);
  KnnOptions k1;
  k1.k = 1;
  CHECK(knn_predict(line, std::vector<double>{10.0}, k1) == 100.0);
  KnnOptions all;
  all.k = 3;
  CHECK(knn_predict(line, std::vector<double>{-7.0}, all) == doctest::Approx(34.0));
  KnnOptions too_many;
  too_many.k = 4;
  CHECK_THROWS_AS(knn_predict(line, std::vector<double>{0.0}, too_many), Error);

  // Ties go to the lower training index.
  const ConeSet tie = plain_cones(rows({{-1}, {1}, {5}}), rows({{3}, {7}, {0}}));
  CHECK(knn_predict(tie, std::vector<double>{0.0}, k1) == 3.0);
}

TEST_CASE("kNN matches a brute-force scan") {
  const ConeSet train = plain_cones(random_points(2000, 9, 1), random_points(2000, 1, 2));
  const ConeSet queries = plain_cones(random_points(300, 9, 3), random_points(300, 1, 4));
  const auto batch = knn_predict(train, queries);
  const double lo = train.flcs.minCoeff(), hi = train.flcs.maxCoeff();
  for (long i = 0; i < queries.plcs.rows(); ++i) {
    const std::span<const double> q(queries.plcs.row(i).data(), 9);
    CHECK(batch[i] == brute_knn(train, q, 5));
    CHECK(batch[i] == knn_predict(train, q));
    CHECK(batch[i] >= lo);
    CHECK(batch[i] <= hi);
  }
}

TEST_CASE("distance-weighted kNN") {
  const ConeSet line = plain_cones(rows({{0}, {1}, {3}}), rows({{0}, {6}, {9}}));
  KnnOptions o;
  o.k = 2;
  o.weighting = KnnWeighting::distance;
  // Neighbours at distance 0.5 (value 0) and 0.5 (value 6).
  CHECK(knn_predict(line, std::vector<double>{0.5}, o) == doctest::Approx(3.0));
  // Distances 0.25 and 0.75 -> weights 4 and 4/3.
  CHECK(knn_predict(line, std::vector<double>{0.25}, o) == doctest::Approx(6.0 * (4.0 / 3) / (4 + 4.0 / 3)));
  // Exact hit averages the coincident neighbours only.
  CHECK(knn_predict(line, std::vector<double>{1.0}, o) == 6.0);
}
