#include "lightcone/forecaster.hpp"

#include "lightcone/error.hpp"

namespace lightcone {

const char* method_name(Method m) {
  switch (m) {
    case Method::fltp: return "fltp";
    case Method::knn: return "knn";
    case Method::lclr: return "lclr";
    case Method::moonshine: return "moonshine";
    case Method::ohp: return "ohp";
    case Method::mixed_licors: return "mixed_licors";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::fltp, Method::knn, Method::lclr, Method::moonshine, Method::ohp,
                   Method::mixed_licors})
    if (name == method_name(m)) return m;
  fail(Errc::config, "unknown method '" + std::string(name) +
                         "' (expected fltp, knn, lclr, moonshine, ohp)");
}

LikelihoodReport Forecaster::log_likelihood(const ConeSet&) const {
  fail(Errc::unsupported, std::string(method_name(method())) + " has no likelihood model");
}

namespace {

constexpr Tag kMetaTag = make_tag("META");
constexpr Tag kKnnTag = make_tag("KNNT");

void check_geometry(const ConeGeometry& model, const ConeSet& cones) {
  require(model == cones.geometry, Errc::dimension_mismatch,
          "cone geometry differs from the model geometry");
}

class FltpForecaster final : public Forecaster {
 public:
  explicit FltpForecaster(ConeGeometry g) : geometry_(std::move(g)) {}
  Method method() const override { return Method::fltp; }
  const ConeGeometry& geometry() const override { return geometry_; }
  std::vector<double> predict(const ConeSet& cones) const override {
    check_geometry(geometry_, cones);
    return fltp_predict(cones);
  }
  std::vector<Section> sections() const override {
    ByteWriter meta;
    meta.str("fltp");
    return {{kMetaTag, meta.take()}, geometry_section(geometry_)};
  }

 private:
  ConeGeometry geometry_;
};

class KnnForecaster final : public Forecaster {
 public:
  KnnForecaster(ConeSet train, KnnOptions options)
      : train_(std::move(train)), options_(options) {}
  Method method() const override { return Method::knn; }
  const ConeGeometry& geometry() const override { return train_.geometry; }
  std::vector<double> predict(const ConeSet& cones) const override {
    check_geometry(train_.geometry, cones);
    return knn_predict(train_, cones, options_);
  }
  std::vector<Section> sections() const override {
    ByteWriter meta;
    meta.str("knn");
    ByteWriter w;
    w.u64(options_.k);
    w.u32(options_.weighting == KnnWeighting::distance ? 1u : 0u);
    w.u64(train_.size());
    w.f64s(std::span<const double>(train_.plcs.data(), static_cast<std::size_t>(train_.plcs.size())));
    w.f64s(std::span<const double>(train_.flcs.data(), static_cast<std::size_t>(train_.flcs.size())));
    for (const auto& o : train_.origins) {
      w.u32(o.t);
      w.u32(o.row);
      w.u32(o.col);
    }
    return {{kMetaTag, meta.take()}, geometry_section(train_.geometry), {kKnnTag, w.take()}};
  }

  static std::unique_ptr<Forecaster> load(std::span<const Section> sections) {
    ConeSet train;
    train.geometry = geometry_from_section(find_section(sections, make_tag("GEOM")));
    ByteReader r(find_section(sections, kKnnTag).payload);
    KnnOptions options;
    options.k = static_cast<std::size_t>(r.u64());
    options.weighting = r.u32() ? KnnWeighting::distance : KnnWeighting::uniform;
    const auto n = static_cast<Eigen::Index>(r.u64());
    const auto plcs = r.f64s();
    const auto flcs = r.f64s();
    const auto dp = static_cast<Eigen::Index>(train.geometry.past_dim());
    const auto df = static_cast<Eigen::Index>(train.geometry.future_dim());
    require(static_cast<Eigen::Index>(plcs.size()) == n * dp &&
                static_cast<Eigen::Index>(flcs.size()) == n * df,
            Errc::size_mismatch, "kNN training block does not match the model geometry");
    train.plcs = Eigen::Map<const Matrix>(plcs.data(), n, dp);
    train.flcs = Eigen::Map<const Matrix>(flcs.data(), n, df);
    train.origins.resize(static_cast<std::size_t>(n));
    for (auto& o : train.origins) {
      o.t = r.u32();
      o.row = r.u32();
      o.col = r.u32();
    }
    return std::make_unique<KnnForecaster>(std::move(train), options);
  }

 private:
  ConeSet train_;
  KnnOptions options_;
};

class LinearForecaster final : public Forecaster {
 public:
  explicit LinearForecaster(LinearConeModel m) : model_(std::move(m)) {}
  Method method() const override { return Method::lclr; }
  const ConeGeometry& geometry() const override { return model_.geometry; }
  std::vector<double> predict(const ConeSet& cones) const override {
    check_geometry(model_.geometry, cones);
    return predict_lclr(model_, cones);
  }
  std::vector<Section> sections() const override { return linear_model_sections(model_); }
  const LinearConeModel& model() const { return model_; }

 private:
  LinearConeModel model_;
};

class StateForecaster final : public Forecaster {
 public:
  explicit StateForecaster(StateModel m) : model_(std::move(m)) {}
  Method method() const override {
    return model_.method == StateMethod::moonshine ? Method::moonshine : Method::ohp;
  }
  const ConeGeometry& geometry() const override { return model_.geometry; }
  std::optional<std::size_t> state_budget() const override { return model_.requested_states; }
  bool distributional() const override { return true; }
  std::vector<double> predict(const ConeSet& cones) const override {
    return predict_cones(model_, cones);
  }
  LikelihoodReport log_likelihood(const ConeSet& cones) const override {
    return cone_log_likelihood(model_, cones);
  }
  std::vector<Section> sections() const override { return state_model_sections(model_); }
  const StateModel& model() const { return model_; }

 private:
  StateModel model_;
};

}  // namespace

std::unique_ptr<Forecaster> fit_forecaster(const MethodConfig& config, const ConeSet& train,
                                           std::uint64_t seed) {
  switch (config.method) {
    case Method::fltp:
      return std::make_unique<FltpForecaster>(train.geometry);
    case Method::knn:
      require(config.knn.k <= train.size(), Errc::invalid_argument,
              "k-neighbours exceeds the training size");
      return std::make_unique<KnnForecaster>(train, config.knn);
    case Method::lclr:
      return std::make_unique<LinearForecaster>(fit_lclr(train));
    case Method::moonshine: {
      MoonshineOptions o;
      o.max_states = config.max_states;
      o.signature_pairs = config.signature_pairs;
      o.dbscan = config.dbscan;
      o.kde_cap = config.kde_cap;
      return std::make_unique<StateForecaster>(fit_moonshine(train, o, seed));
    }
    case Method::ohp: {
      OhpOptions o;
      o.states = config.states;
      o.kde_cap = config.kde_cap;
      return std::make_unique<StateForecaster>(fit_ohp(train, o, seed));
    }
    case Method::mixed_licors:
      break;
  }
  fail(Errc::unsupported, "mixed_licors is not implemented");
}

std::vector<std::uint8_t> encode_forecaster(const Forecaster& model) {
  return encode_container(model.sections());
}

std::unique_ptr<Forecaster> decode_forecaster(std::span<const std::uint8_t> bytes) {
  const auto sections = decode_container(bytes);
  const std::string tag = model_method_tag(sections);
  if (tag == "moonshine" || tag == "ohp")
    return std::make_unique<StateForecaster>(state_model_from_sections(sections));
  if (tag == "lclr")
    return std::make_unique<LinearForecaster>(linear_model_from_sections(sections));
  if (tag == "knn") return KnnForecaster::load(sections);
  if (tag == "fltp")
    return std::make_unique<FltpForecaster>(
        geometry_from_section(find_section(sections, make_tag("GEOM"))));
  fail(Errc::unsupported, "model file holds unknown method '" + tag + "'");
}

const StateModel* as_state_model(const Forecaster& f) {
  const auto* s = dynamic_cast<const StateForecaster*>(&f);
  return s ? &s->model() : nullptr;
}

const LinearConeModel* as_linear_model(const Forecaster& f) {
  const auto* s = dynamic_cast<const LinearForecaster*>(&f);
  return s ? &s->model() : nullptr;
}

}  // namespace lightcone
