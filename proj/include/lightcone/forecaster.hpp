#pragma once

#include "lightcone/baselines.hpp"
#include "lightcone/cluster.hpp"
#include "lightcone/field.hpp"
#include "lightcone/model_io.hpp"
#include "lightcone/predict.hpp"
#include "lightcone/states.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace lightcone {

// mixed_licors is a reserved name: it parses, but fitting it is unsupported.
enum class Method { fltp, knn, lclr, moonshine, ohp, mixed_licors };

const char* method_name(Method m);
Method parse_method(std::string_view name);

struct MethodConfig {
  Method method = Method::ohp;
  std::size_t max_states = 10;      // Moonshine K_max
  std::size_t states = 10;          // OHP K
  std::size_t signature_pairs = 10; // Moonshine K_sig
  KnnOptions knn;
  std::size_t kde_cap = kDefaultKdeCap;
  DbscanOptions dbscan;
};

/// A fitted forecasting method behind one interface: point predictions for
/// raw cones, likelihoods for the distributional methods, and a model-file
/// encoding.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual Method method() const = 0;
  virtual const ConeGeometry& geometry() const = 0;
  virtual std::optional<std::size_t> state_budget() const { return std::nullopt; }
  virtual bool distributional() const { return false; }

  virtual std::vector<double> predict(const ConeSet& cones) const = 0;
  virtual LikelihoodReport log_likelihood(const ConeSet& cones) const;

  virtual std::vector<Section> sections() const = 0;
};

std::unique_ptr<Forecaster> fit_forecaster(const MethodConfig& config, const ConeSet& train,
                                           std::uint64_t seed);

std::vector<std::uint8_t> encode_forecaster(const Forecaster& model);
std::unique_ptr<Forecaster> decode_forecaster(std::span<const std::uint8_t> bytes);

// Access to the underlying models for callers that need more than the
// common interface; nullptr when the forecaster is of another kind.
const StateModel* as_state_model(const Forecaster& f);
const LinearConeModel* as_linear_model(const Forecaster& f);

}  // namespace lightcone
