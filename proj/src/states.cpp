#include "lightcone/states.hpp"

#include "lightcone/error.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lightcone {

const char* state_method_name(StateMethod m) {
  return m == StateMethod::moonshine ? "moonshine" : "ohp";
}

namespace {

// Stream ids for derived seeds.
enum : std::uint64_t {
  kStreamCluster = 1,
  kStreamEvalPoints = 2,
  kStreamMerge = 3,
  kStreamClusterKde = 4,
  kStreamStateKde = 1u << 20,
};

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

std::vector<std::vector<std::size_t>> members_by_label(std::span<const std::size_t> labels,
                                                       std::size_t k) {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < k, Errc::invalid_argument, "state label out of range");
    out[labels[i]].push_back(i);
  }
  for (const auto& m : out) require(!m.empty(), Errc::invalid_argument, "empty state");
  return out;
}

ScalingParams resolve_scaling(const ConeSet& cones, const std::optional<ScalingParams>& given) {
  return given ? *given : fit_scaling(cones);
}

}  // namespace

std::vector<PredictiveState> assemble_states(const ConeSet& standardized,
                                             std::span<const std::size_t> labels,
                                             std::size_t k, std::size_t kde_cap,
                                             std::uint64_t seed) {
  const auto groups = members_by_label(labels, k);
  std::vector<PredictiveState> states(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto& s = states[j];
    s.id = j;
    s.members = groups[j];
    const Matrix plcs = gather_rows(standardized.plcs, s.members);
    const Matrix flcs = gather_rows(standardized.flcs, s.members);
    s.plc_kde = fit_kde(plcs, {}, {std::nullopt, kde_cap, derive_seed(seed, kStreamStateKde + 2 * j)});
    s.flc_kde =
        fit_kde(flcs, {}, {std::nullopt, kde_cap, derive_seed(seed, kStreamStateKde + 2 * j + 1)});
    const Eigen::RowVectorXd mean = flcs.colwise().mean();
    s.mean_flc.assign(mean.data(), mean.data() + mean.size());
  }
  return states;
}

std::vector<double> cluster_signature(const Kde& flc_kde, const Matrix& eval_points) {
  require(eval_points.rows() >= 2, Errc::invalid_argument,
          "signature needs at least two evaluation points");
  require(eval_points.allFinite(), Errc::non_finite, "signature evaluation points must be finite");
  auto log_floored = [&](Eigen::Index i) {
    const auto row = eval_points.row(i);
    const double f = flc_kde.density(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    return std::log(std::max(f, kDensityFloor));
  };
  const double base = log_floored(0);
  std::vector<double> sig(static_cast<std::size_t>(eval_points.rows() - 1));
  for (Eigen::Index i = 1; i < eval_points.rows(); ++i)
    sig[static_cast<std::size_t>(i - 1)] = log_floored(i) - base;
  return sig;
}

StateModel fit_moonshine(const ConeSet& cones, const MoonshineOptions& options,
                         std::uint64_t seed) {
  require(cones.size() >= 1, Errc::invalid_argument, "cannot fit states on an empty cone set");
  require(options.max_states >= 1, Errc::invalid_argument, "K_max must be >= 1");
  require(options.signature_pairs >= 1, Errc::invalid_argument, "K_sig must be >= 1");
  require(cones.size() >= options.max_states, Errc::invalid_argument,
          "K_max exceeds the number of training cones");

  const ScalingParams scaling = resolve_scaling(cones, options.scaling);
  const ConeSet std_cones = apply_scaling(cones, scaling);

  const Clustering initial = dbscan_adaptive(std_cones.plcs, options.dbscan,
                                             derive_seed(seed, kStreamCluster));
  const std::size_t c = initial.cluster_count();
  std::vector<std::size_t> labels = initial.labels;
  std::size_t k = c;

  if (c > options.max_states) {
    // Shared evaluation points drawn from the pooled training futures.
    Rng rng(derive_seed(seed, kStreamEvalPoints));
    const std::size_t n_eval = 2 * options.signature_pairs + 1;
    Matrix eval(static_cast<Eigen::Index>(n_eval), std_cones.flcs.cols());
    for (std::size_t i = 0; i < n_eval; ++i)
      eval.row(static_cast<Eigen::Index>(i)) =
          std_cones.flcs.row(static_cast<Eigen::Index>(uniform_index(rng, std_cones.size())));

    const auto groups = members_by_label(labels, c);
    Matrix signatures(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n_eval - 1));
    for (std::size_t g = 0; g < c; ++g) {
      const Kde kde = fit_kde(gather_rows(std_cones.flcs, groups[g]), {},
                              {std::nullopt, options.kde_cap,
                               derive_seed(seed, kStreamClusterKde + (g << 8))});
      const auto sig = cluster_signature(kde, eval);
      for (std::size_t i = 0; i < sig.size(); ++i)
        signatures(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i)) = sig[i];
    }
    const Clustering merged =
        kmeanspp(signatures, options.max_states, derive_seed(seed, kStreamMerge));
    for (auto& l : labels) l = merged.labels[l];
    k = options.max_states;
  }

  StateModel model;
  model.states = assemble_states(std_cones, labels, k, options.kde_cap, seed);
  model.geometry = cones.geometry;
  model.scaling = scaling;
  model.method = StateMethod::moonshine;
  model.training_size = cones.size();
  model.seed = seed;
  model.requested_states = options.max_states;
  model.signature_pairs = options.signature_pairs;
  model.initial_clusters = c;
  model.density_coverage = initial.coverage;
  return model;
}

StateModel fit_ohp(const ConeSet& cones, const OhpOptions& options, std::uint64_t seed) {
  require(options.states >= 1, Errc::invalid_argument, "K must be >= 1");
  require(options.states <= cones.size(), Errc::invalid_argument,
          "K = " + std::to_string(options.states) + " exceeds the number of training cones " +
              std::to_string(cones.size()));
  const ScalingParams scaling = resolve_scaling(cones, options.scaling);
  const ConeSet std_cones = apply_scaling(cones, scaling);
  const Clustering futures =
      kmeanspp(std_cones.flcs, options.states, derive_seed(seed, kStreamCluster), options.kmeans);

  StateModel model;
  model.states = assemble_states(std_cones, futures.labels, options.states, options.kde_cap, seed);
  model.geometry = cones.geometry;
  model.scaling = scaling;
  model.method = StateMethod::ohp;
  model.training_size = cones.size();
  model.seed = seed;
  model.requested_states = options.states;
  model.initial_clusters = options.states;
  model.density_coverage = 1.0;
  return model;
}

std::vector<double> map_plc_to_states(const StateModel& model, std::span<const double> plc) {
  const std::size_t k = model.states.size();
  require(k >= 1, Errc::invalid_argument, "model has no states");
  require(plc.size() == model.geometry.past_dim(), Errc::dimension_mismatch,
          "PLC has dimension " + std::to_string(plc.size()) + ", model expects " +
              std::to_string(model.geometry.past_dim()));
  // Evaluated as log N_j + log P(plc | S_j) and normalized with a shifted
  // exponent, which is the same ratio without underflow for PLCs far from
  // every state.
  std::vector<double> w(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const auto& s = model.states[j];
    w[j] = std::log(static_cast<double>(s.count())) + s.plc_kde.log_density(plc);
    top = std::max(top, w[j]);
  }
  if (!std::isfinite(top)) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  double total = 0.0;
  for (auto& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<std::size_t> membership_labels(const StateModel& model) {
  std::vector<std::size_t> labels(model.training_size, 0);
  for (const auto& s : model.states)
    for (std::size_t i : s.members) labels.at(i) = s.id;
  return labels;
}

// --- serialization ------------------------------------------------------

namespace {

constexpr Tag kMetaTag = make_tag("META");
constexpr Tag kGeomTag = make_tag("GEOM");
constexpr Tag kScaleTag = make_tag("SCAL");
constexpr Tag kStateTag = make_tag("STAT");

void write_kde(ByteWriter& w, const Kde& kde) {
  w.u64(kde.size());
  w.u64(kde.dim());
  w.f64(kde.bandwidth());
  w.f64s(std::span<const double>(kde.support().data(), static_cast<std::size_t>(kde.support().size())));
  w.f64s(kde.weights());
}

Kde read_kde(ByteReader& r) {
  const auto rows = r.u64();
  const auto cols = r.u64();
  const double h = r.f64();
  const auto support = r.f64s();
  const auto weights = r.f64s();
  require(support.size() == rows * cols && weights.size() == rows, Errc::size_mismatch,
          "KDE block dimensions are inconsistent");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(support.begin(), support.end(), m.data());
  return Kde::restore(std::move(m), weights, h);
}

}  // namespace

Section geometry_section(const ConeGeometry& geometry) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(geometry.past_horizon()));
  w.u32(static_cast<std::uint32_t>(geometry.future_horizon()));
  w.u32(static_cast<std::uint32_t>(geometry.speed()));
  w.str(norm_name(geometry.norm()));
  return {kGeomTag, w.take()};
}

ConeGeometry geometry_from_section(const Section& section) {
  ByteReader r(section.payload);
  const auto hp = static_cast<int>(r.u32());
  const auto hf = static_cast<int>(r.u32());
  const auto c = static_cast<int>(r.u32());
  return ConeGeometry(hp, hf, c, parse_norm(r.str()));
}

Section scaling_section(const ScalingParams& scaling) {
  ByteWriter w;
  w.f64(scaling.shift);
  w.f64(scaling.scale);
  return {kScaleTag, w.take()};
}

ScalingParams scaling_from_section(const Section& section) {
  ByteReader r(section.payload);
  ScalingParams p;
  p.shift = r.f64();
  p.scale = r.f64();
  require(p.scale > 0.0 && std::isfinite(p.shift), Errc::non_finite, "invalid scaling block");
  return p;
}

std::string model_method_tag(std::span<const Section> sections) {
  ByteReader r(find_section(sections, kMetaTag).payload);
  return r.str();
}

std::vector<Section> state_model_sections(const StateModel& model) {
  std::vector<Section> sections;
  ByteWriter meta;
  meta.str(state_method_name(model.method));
  meta.u64(model.training_size);
  meta.u64(model.seed);
  meta.u64(model.requested_states);
  meta.u64(model.signature_pairs);
  meta.u64(model.initial_clusters);
  meta.f64(model.density_coverage);
  meta.u64(model.states.size());
  sections.push_back({kMetaTag, meta.take()});
  sections.push_back(geometry_section(model.geometry));
  sections.push_back(scaling_section(model.scaling));
  for (const auto& s : model.states) {
    ByteWriter w;
    w.u64(s.id);
    w.u64(s.members.size());
    for (std::size_t m : s.members) w.u64(m);
    write_kde(w, s.plc_kde);
    write_kde(w, s.flc_kde);
    w.f64s(s.mean_flc);
    sections.push_back({kStateTag, w.take()});
  }
  return sections;
}

StateModel state_model_from_sections(std::span<const Section> sections) {
  StateModel model;
  ByteReader meta(find_section(sections, kMetaTag).payload);
  const std::string method = meta.str();
  if (method == "moonshine")
    model.method = StateMethod::moonshine;
  else if (method == "ohp")
    model.method = StateMethod::ohp;
  else
    fail(Errc::unsupported, "model holds method '" + method + "', not a state model");
  model.training_size = meta.u64();
  model.seed = meta.u64();
  model.requested_states = meta.u64();
  model.signature_pairs = meta.u64();
  model.initial_clusters = meta.u64();
  model.density_coverage = meta.f64();
  const auto k = meta.u64();
  model.geometry = geometry_from_section(find_section(sections, kGeomTag));
  model.scaling = scaling_from_section(find_section(sections, kScaleTag));
  for (const auto& section : sections) {
    if (section.tag != kStateTag) continue;
    ByteReader r(section.payload);
    PredictiveState s;
    s.id = r.u64();
    const auto n = r.u64();
    s.members.resize(static_cast<std::size_t>(n));
    for (auto& m : s.members) m = r.u64();
    s.plc_kde = read_kde(r);
    s.flc_kde = read_kde(r);
    s.mean_flc = r.f64s();
    require(s.plc_kde.dim() == model.geometry.past_dim() &&
                s.flc_kde.dim() == model.geometry.future_dim() &&
                s.mean_flc.size() == model.geometry.future_dim(),
            Errc::size_mismatch, "state block does not match the model geometry");
    model.states.push_back(std::move(s));
  }
  require(model.states.size() == k && k >= 1, Errc::size_mismatch,
          "model state count does not match its state blocks");
  return model;
}

std::vector<std::uint8_t> encode_state_model(const StateModel& model) {
  return encode_container(state_model_sections(model));
}

StateModel decode_state_model(std::span<const std::uint8_t> bytes) {
  return state_model_from_sections(decode_container(bytes));
}

}  // namespace lightcone
