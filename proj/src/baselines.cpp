#include "lightcone/baselines.hpp"

#include "lightcone/error.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/states.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lightcone {

LinearConeModel fit_lclr(const ConeSet& cones) {
  const auto n = static_cast<std::size_t>(cones.plcs.rows());
  const auto d = static_cast<std::size_t>(cones.plcs.cols());
  require(cones.flcs.cols() == 1, Errc::invalid_argument,
          "light cone regression needs a scalar future (h_f = 0)");
  require(n > d + 1, Errc::invalid_argument,
          "light cone regression needs more than d_p + 1 = " + std::to_string(d + 1) + " cones");

  const Eigen::RowVectorXd x_mean = cones.plcs.colwise().mean();
  const double y_mean = cones.flcs.col(0).mean();
  const Matrix xc = cones.plcs.rowwise() - x_mean;
  const Eigen::VectorXd yc = cones.flcs.col(0).array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  LinearConeModel model;
  model.geometry = cones.geometry;
  model.scaling = fit_scaling(cones);

  Eigen::VectorXd beta;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                        ldlt.rcond() < 1e-13 || gram.trace() == 0.0;
  if (!singular) {
    beta = ldlt.solve(rhs);
  } else {
    const double mean_diag = gram.trace() / static_cast<double>(d);
    const double lambda = kRidgeFallback * std::max(1.0, mean_diag);
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ridge(gram);
    require(ridge.info() == Eigen::Success, Errc::invalid_argument,
            "rank-deficient design: ridge fallback failed");
    beta = ridge.solve(rhs);
    model.ridge_used = true;
  }
  require(beta.allFinite(), Errc::invalid_argument, "regression produced non-finite coefficients");
  model.coefficients.assign(beta.data(), beta.data() + beta.size());
  model.intercept = y_mean - x_mean.dot(beta);
  return model;
}

double predict_lclr(const LinearConeModel& model, std::span<const double> plc) {
  require(plc.size() == model.coefficients.size(), Errc::dimension_mismatch,
          "PLC has dimension " + std::to_string(plc.size()) + ", model expects " +
              std::to_string(model.coefficients.size()));
  double acc = model.intercept;
  for (std::size_t k = 0; k < plc.size(); ++k) acc += model.coefficients[k] * plc[k];
  return acc;
}

std::vector<double> predict_lclr(const LinearConeModel& model, const ConeSet& cones) {
  const auto d = static_cast<std::size_t>(cones.plcs.cols());
  std::vector<double> out(cones.size());
  for (std::size_t i = 0; i < cones.size(); ++i)
    out[i] = predict_lclr(model, std::span<const double>(cones.plcs.data() + i * d, d));
  return out;
}

double fltp_predict(const Field& field, std::size_t t, std::size_t row, std::size_t col) {
  require(t >= 1 && t < field.frames(), Errc::invalid_argument,
          "future-like-the-past needs a previous frame (t >= 1)");
  require(row < field.height() && col < field.width(), Errc::invalid_argument,
          "pixel out of range");
  return field(t - 1, row, col);
}

std::vector<double> fltp_predict(const ConeSet& cones) {
  const std::size_t at = cones.geometry.previous_value_index();
  std::vector<double> out(cones.size());
  for (std::size_t i = 0; i < cones.size(); ++i)
    out[i] = cones.plcs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(at));
  return out;
}

namespace {

double knn_single(const ConeSet& train, const double* q, std::size_t d,
                  const KnnOptions& options, std::vector<std::pair<double, std::size_t>>& scratch) {
  const std::size_t n = train.size();
  scratch.resize(n);
  const double* p = train.plcs.data();
  for (std::size_t i = 0; i < n; ++i, p += d) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = p[k] - q[k];
      sq += diff * diff;
    }
    scratch[i] = {sq, i};
  }
  const auto kth = scratch.begin() + static_cast<std::ptrdiff_t>(options.k);
  std::partial_sort(scratch.begin(), kth, scratch.end());

  if (options.weighting == KnnWeighting::distance) {
    double exact_sum = 0.0;
    std::size_t exact = 0;
    for (auto it = scratch.begin(); it != kth; ++it)
      if (it->first == 0.0) {
        exact_sum += train.flcs(static_cast<Eigen::Index>(it->second), 0);
        ++exact;
      }
    if (exact > 0) return exact_sum / static_cast<double>(exact);
    double num = 0.0, den = 0.0;
    for (auto it = scratch.begin(); it != kth; ++it) {
      const double w = 1.0 / std::sqrt(it->first);
      num += w * train.flcs(static_cast<Eigen::Index>(it->second), 0);
      den += w;
    }
    return num / den;
  }
  double sum = 0.0;
  for (auto it = scratch.begin(); it != kth; ++it)
    sum += train.flcs(static_cast<Eigen::Index>(it->second), 0);
  return sum / static_cast<double>(options.k);
}

void check_knn(const ConeSet& train, std::size_t dim, const KnnOptions& options) {
  require(options.k >= 1, Errc::invalid_argument, "k must be >= 1");
  require(options.k <= train.size(), Errc::invalid_argument,
          "k = " + std::to_string(options.k) + " exceeds the training size " +
              std::to_string(train.size()));
  require(train.flcs.cols() >= 1, Errc::invalid_argument, "training cones have no future");
  require(dim == static_cast<std::size_t>(train.plcs.cols()), Errc::dimension_mismatch,
          "query PLC dimension differs from the training PLCs");
}

}  // namespace

double knn_predict(const ConeSet& train, std::span<const double> plc, const KnnOptions& options) {
  check_knn(train, plc.size(), options);
  std::vector<std::pair<double, std::size_t>> scratch;
  return knn_single(train, plc.data(), plc.size(), options, scratch);
}

std::vector<double> knn_predict(const ConeSet& train, const ConeSet& queries,
                                const KnnOptions& options) {
  const auto d = static_cast<std::size_t>(queries.plcs.cols());
  check_knn(train, d, options);
  std::vector<double> out(queries.size());
  const std::size_t block = 256;
  const std::size_t blocks = (queries.size() + block - 1) / block;
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<std::pair<double, std::size_t>> scratch;
    const std::size_t hi = std::min(queries.size(), (b + 1) * block);
    for (std::size_t i = b * block; i < hi; ++i)
      out[i] = knn_single(train, queries.plcs.data() + i * d, d, options, scratch);
  });
  return out;
}

namespace {
constexpr Tag kMetaTag = make_tag("META");
constexpr Tag kLinearTag = make_tag("LCLR");
}  // namespace

std::vector<Section> linear_model_sections(const LinearConeModel& model) {
  std::vector<Section> sections;
  ByteWriter meta;
  meta.str("lclr");
  sections.push_back({kMetaTag, meta.take()});
  sections.push_back(geometry_section(model.geometry));
  sections.push_back(scaling_section(model.scaling));
  ByteWriter w;
  w.f64s(model.coefficients);
  w.f64(model.intercept);
  w.u32(model.ridge_used ? 1u : 0u);
  sections.push_back({kLinearTag, w.take()});
  return sections;
}

LinearConeModel linear_model_from_sections(std::span<const Section> sections) {
  require(model_method_tag(sections) == "lclr", Errc::unsupported,
          "model file does not hold a light cone regression");
  LinearConeModel model;
  model.geometry = geometry_from_section(find_section(sections, make_tag("GEOM")));
  model.scaling = scaling_from_section(find_section(sections, make_tag("SCAL")));
  ByteReader r(find_section(sections, kLinearTag).payload);
  model.coefficients = r.f64s();
  model.intercept = r.f64();
  model.ridge_used = r.u32() != 0;
  require(model.coefficients.size() == model.geometry.past_dim(), Errc::size_mismatch,
          "regression coefficients do not match the model geometry");
  return model;
}

}  // namespace lightcone
