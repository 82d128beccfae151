#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/predict.hpp"
#include "lightcone/states.hpp"
#include "lightcone/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace lightcone;
using lightcone::testing::random_field;
using lightcone::testing::rows;

namespace {

// Two single-member states over 9-D PLCs, supports at `a` and `b` along the
// first axis, unit bandwidth and identity scaling.
StateModel two_point_model(double a, double b, double mean_a, double mean_b) {
  StateModel m;
  m.geometry = ConeGeometry();
  m.training_size = 2;
  for (std::size_t j = 0; j < 2; ++j) {
    PredictiveState s;
    s.id = j;
    s.members = {j};
    Matrix plc = Matrix::Zero(1, 9);
    plc(0, 0) = j == 0 ? a : b;
    s.plc_kde = Kde(plc, {1.0}, 1.0);
    s.flc_kde = Kde(rows({{j == 0 ? mean_a : mean_b}}), {1.0}, 1.0);
    s.mean_flc = {j == 0 ? mean_a : mean_b};
    m.states.push_back(s);
  }
  return m;
}

ConeSet regime_cones(double spacing, double sigma, std::uint64_t seed, std::vector<int>* truth,
                     std::vector<bool>* interior) {
  SynthSpec spec;
  spec.kind = SynthKind::k_regime;
  spec.frames = 8;
  spec.height = 32;
  spec.width = 64;
  spec.noise = sigma;
  spec.regime_means = {0.0, spacing};
  spec.seed = seed;
  const auto data = gen_k_regime(spec);
  const auto cones = extract_cones(data.field, ConeGeometry());
  const auto boundary = regime_boundary(data.labels, spec.height, spec.width, 1);
  truth->clear();
  interior->clear();
  for (const auto& o : cones.origins) {
    truth->push_back(data.labels[o.row * spec.width + o.col]);
    interior->push_back(!boundary[o.row * spec.width + o.col]);
  }
  return cones;
}

std::vector<int> as_int(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

void check_partition(const StateModel& m) {
  std::size_t total = 0;
  std::set<std::size_t> seen;
  for (const auto& s : m.states) {
    CHECK(s.count() >= 1);
    total += s.count();
    for (auto i : s.members) CHECK(seen.insert(i).second);
  }
  CHECK(total == m.training_size);
}

}  // namespace

TEST_CASE("soft map: kernel-ratio example, symmetry and single state") {
  const StateModel m = two_point_model(0.0, 2.0, 0.0, 1.0);
  const std::vector<double> q(9, 0.0);
  const auto w = map_plc_to_states(m, q);
  CHECK(w[0] == doctest::Approx(0.8807970779778823).epsilon(1e-14));
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));

  const StateModel sym = two_point_model(-1.0, 1.0, 0.0, 1.0);
  const auto ws = map_plc_to_states(sym, q);
  CHECK(ws[0] == doctest::Approx(0.5).epsilon(1e-15));

  StateModel single = m;
  single.states.resize(1);
  CHECK(map_plc_to_states(single, q) == std::vector<double>{1.0});
  CHECK_THROWS_AS(map_plc_to_states(m, std::vector<double>(5, 0.0)), Error);
}

TEST_CASE("soft map stays a distribution far from every state") {
  const StateModel m = two_point_model(0.0, 2.0, 0.0, 1.0);
  std::vector<double> q(9, 0.0);
  q[0] = 80.0;  // both kernel terms underflow in linear space
  const auto w = map_plc_to_states(m, q);
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] > 0.999999);  // the nearer state takes the weight
}

TEST_CASE("signatures") {
  const Kde single(rows({{0.0}}), {1.0}, 0.7);
  const auto sig = cluster_signature(single, rows({{0.0}, {0.7}, {-0.7}}));
  REQUIRE(sig.size() == 2);
  CHECK(sig[0] == doctest::Approx(-0.5).epsilon(1e-13));
  CHECK(sig[1] == doctest::Approx(-0.5).epsilon(1e-13));

  const auto flat = cluster_signature(single, rows({{0.3}, {-0.3}, {0.3}, {-0.3}, {0.3}}));
  for (double v : flat) CHECK(v == 0.0);

  const Kde twin(rows({{0.0}}), {1.0}, 0.7);
  const Matrix eval = rows({{0.1}, {0.5}, {2.0}});
  CHECK(cluster_signature(single, eval) == cluster_signature(twin, eval));

  // K_sig = 5 uses 11 evaluation points and gives 10 entries.
  CHECK(cluster_signature(single, Matrix::Zero(11, 1)).size() == 10);

  // Far points hit the density floor rather than producing infinities.
  const auto floored = cluster_signature(Kde(rows({{0.0}}), {1.0}, 0.01), rows({{0.0}, {100.0}}));
  CHECK(std::isfinite(floored[0]));
}

TEST_CASE("OHP: requested K, partition and variance decomposition") {
  const auto cones = extract_cones(random_field(6, 12, 12, 3), ConeGeometry());
  for (std::size_t k : {1u, 3u, 7u}) {
    OhpOptions o;
    o.states = k;
    const auto m = fit_ohp(cones, o, 11);
    CHECK(m.state_count() == k);
    check_partition(m);
    const auto std_cones = apply_scaling(cones, m.scaling);
    double total = 0.0, within = 0.0;
    const double mean = std_cones.flcs.mean();
    total = (std_cones.flcs.array() - mean).square().sum();
    for (const auto& s : m.states) {
      double acc = 0.0;
      for (auto i : s.members) acc += std_cones.flcs(long(i), 0);
      CHECK(s.mean_flc[0] == doctest::Approx(acc / double(s.count())).epsilon(1e-9));
      for (auto i : s.members) within += std::pow(std_cones.flcs(long(i), 0) - s.mean_flc[0], 2);
    }
    CHECK(within <= total * (1 + 1e-12));
    if (k == 1) CHECK(m.scaling.invert(m.states[0].mean_flc[0]) ==
                      doctest::Approx(cones.flcs.mean()).epsilon(1e-12));
  }
  OhpOptions too_many;
  too_many.states = cones.size() + 1;
  CHECK_THROWS_AS(fit_ohp(cones, too_many, 0), Error);
}

TEST_CASE("OHP splits two regimes by future value") {
  std::vector<int> truth;
  std::vector<bool> interior;
  const auto cones = regime_cones(10.0, 0.1, 5, &truth, &interior);
  OhpOptions o;
  o.states = 2;
  const auto m = fit_ohp(cones, o, 3);
  const auto rep = purity(as_int(membership_labels(m)), truth, interior);
  CHECK(rep.minimum >= 0.95);
  std::vector<double> means{m.scaling.invert(m.states[0].mean_flc[0]),
                            m.scaling.invert(m.states[1].mean_flc[0])};
  std::sort(means.begin(), means.end());
  CHECK(means[0] == doctest::Approx(0.0).epsilon(0.05).scale(1));
  CHECK(means[1] == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("Moonshine: merge to K_max with pure states") {
  std::vector<int> truth;
  std::vector<bool> interior;
  const auto cones = regime_cones(6.0, 1.0, 8, &truth, &interior);
  MoonshineOptions o;
  o.max_states = 2;
  const auto m = fit_moonshine(cones, o, 4);
  CHECK(m.state_count() <= 2);
  CHECK(m.initial_clusters >= m.state_count());
  check_partition(m);
  const auto rep = purity(as_int(membership_labels(m)), truth, interior);
  CHECK(rep.minimum >= 0.95);
}

TEST_CASE("Moonshine with few clusters skips the merge") {
  const auto cones = extract_cones(random_field(5, 14, 14, 9), ConeGeometry());
  MoonshineOptions o;
  o.max_states = 500;
  const auto m = fit_moonshine(cones, o, 2);
  REQUIRE(m.initial_clusters <= o.max_states);
  CHECK(m.state_count() == m.initial_clusters);
  const auto std_cones = apply_scaling(cones, m.scaling);
  const auto initial = dbscan_adaptive(std_cones.plcs, o.dbscan, derive_seed(2, 1));
  CHECK(membership_labels(m) == initial.labels);
  CHECK_THROWS_AS(fit_moonshine(cones.select(std::vector<std::size_t>{}), o, 0), Error);
}

TEST_CASE("state models are deterministic and serialize bit-exactly") {
  const auto cones = extract_cones(random_field(6, 20, 20, 1), ConeGeometry());
  MoonshineOptions mo;
  mo.max_states = 4;
  OhpOptions oo;
  oo.states = 5;
  set_thread_count(1);
  const auto a = fit_moonshine(cones, mo, 7);
  const auto oa = fit_ohp(cones, oo, 7);
  set_thread_count(3);
  const auto b = fit_moonshine(cones, mo, 7);
  const auto ob = fit_ohp(cones, oo, 7);
  set_thread_count(0);
  CHECK(a == b);
  CHECK(oa == ob);
  for (const auto* m : {&a, &oa}) {
    const auto bytes = encode_state_model(*m);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "LCSM1");
    const auto back = decode_state_model(bytes);
    CHECK(back == *m);
    CHECK(encode_state_model(back) == bytes);
  }
  auto broken = encode_state_model(a);
  broken.resize(broken.size() - 3);
  CHECK_THROWS_AS(decode_state_model(broken), Error);
}

TEST_CASE("relabeling states leaves predictions unchanged") {
  const auto cones = extract_cones(random_field(6, 16, 16, 4), ConeGeometry());
  OhpOptions o;
  o.states = 4;
  const auto m = fit_ohp(cones, o, 1);
  StateModel r = m;
  std::reverse(r.states.begin(), r.states.end());
  for (std::size_t j = 0; j < r.states.size(); ++j) r.states[j].id = j;
  const auto std_cones = apply_scaling(cones, m.scaling);
  for (long i = 0; i < 50; ++i) {
    const std::span<const double> plc(std_cones.plcs.row(i).data(), 9);
    CHECK(point_predict(m, plc)[0] == doctest::Approx(point_predict(r, plc)[0]).epsilon(1e-12));
    const std::vector<double> x{std_cones.flcs(i, 0)};
    CHECK(predictive_density(m, plc, x) ==
          doctest::Approx(predictive_density(r, plc, x)).epsilon(1e-12));
  }
}
