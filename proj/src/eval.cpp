#include "lightcone/eval.hpp"

#include "lightcone/error.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace lightcone {

double mse(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size(), Errc::dimension_mismatch,
          "prediction and truth differ in length");
  require(!pred.empty(), Errc::invalid_argument, "MSE of an empty sample");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double pearson(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size(), Errc::dimension_mismatch,
          "prediction and truth differ in length");
  require(pred.size() >= 2, Errc::undefined_statistic, "correlation needs two or more pairs");
  const double n = static_cast<double>(pred.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= n;
  mt /= n;
  double spp = 0.0, stt = 0.0, spt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = pred[i] - mp;
    const double b = truth[i] - mt;
    spp += a * a;
    stt += b * b;
    spt += a * b;
  }
  require(spp > 0.0 && stt > 0.0, Errc::undefined_statistic,
          "correlation is undefined for a constant sample");
  return std::clamp(spt / std::sqrt(spp * stt), -1.0, 1.0);
}

std::vector<double> err_pct_map(std::span<const double> truth, std::span<const double> pred) {
  require(truth.size() == pred.size(), Errc::dimension_mismatch,
          "truth and prediction differ in shape");
  std::vector<double> out(truth.size(), 0.0);
  if (truth.empty()) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    lo = std::min({lo, truth[i], pred[i]});
    hi = std::max({hi, truth[i], pred[i]});
  }
  const double range = std::abs(hi - lo);
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < truth.size(); ++i)
    out[i] = std::min(1.0, std::abs(truth[i] - pred[i]) / range);
  return out;
}

namespace {

double percentile(std::vector<double>& sorted_values, double q) {
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

void check_bootstrap(const BootstrapOptions& options) {
  require(options.resamples >= 100, Errc::invalid_argument, "bootstrap needs B >= 100");
  require(options.level > 0.0 && options.level < 1.0, Errc::invalid_argument,
          "confidence level must lie in (0, 1)");
}

Interval interval_from(std::vector<double> stats, double level, double point) {
  std::erase_if(stats, [](double v) { return !std::isfinite(v); });
  if (stats.empty()) return {point, point};
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  Interval ci{percentile(stats, tail), percentile(stats, 1.0 - tail)};
  // Keep the point estimate inside its own interval.
  ci.lower = std::min(ci.lower, point);
  ci.upper = std::max(ci.upper, point);
  return ci;
}

// Sufficient statistics of one resampling unit, with predictions and truth
// centred on their global means.
struct UnitSums {
  double count = 0, sq_err = 0, p = 0, t = 0, pp = 0, tt = 0, pt = 0, ll = 0;
  void add(const UnitSums& o) {
    count += o.count;
    sq_err += o.sq_err;
    p += o.p;
    t += o.t;
    pp += o.pp;
    tt += o.tt;
    pt += o.pt;
    ll += o.ll;
  }
  double rho() const {
    const double vp = pp - p * p / count;
    const double vt = tt - t * t / count;
    if (!(vp > 0.0 && vt > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp((pt - p * t / count) / std::sqrt(vp * vt), -1.0, 1.0);
  }
};

}  // namespace

Interval bootstrap_ci(std::span<const double> values, const BootstrapOptions& options) {
  require(!values.empty(), Errc::invalid_argument, "bootstrap of an empty sample");
  check_bootstrap(options);
  const std::size_t n = values.size();
  double point = 0.0;
  for (double v : values) point += v;
  point /= static_cast<double>(n);
  Rng rng(options.seed);
  std::vector<double> stats(options.resamples);
  for (auto& s : stats) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[uniform_index(rng, n)];
    s = acc / static_cast<double>(n);
  }
  return interval_from(std::move(stats), options.level, point);
}

const char* ci_unit_name(CiUnit unit) { return unit == CiUnit::pixel ? "pixel" : "frame"; }

CiUnit parse_ci_unit(std::string_view name) {
  if (name == "pixel") return CiUnit::pixel;
  if (name == "frame") return CiUnit::frame;
  fail(Errc::config, "unknown CI unit '" + std::string(name) + "' (expected pixel or frame)");
}

MetricsReport score(std::string method, std::span<const double> pred,
                    std::span<const double> truth, std::span<const double> log_lik,
                    std::span<const std::uint32_t> groups, const ScoreOptions& options) {
  check_bootstrap(options.bootstrap);
  const std::size_t n = pred.size();
  require(n == truth.size() && n >= 1, Errc::dimension_mismatch,
          "prediction and truth differ in length");
  require(log_lik.empty() || log_lik.size() == n, Errc::dimension_mismatch,
          "log-likelihood length differs from the prediction length");
  require(options.unit == CiUnit::pixel || groups.size() == n, Errc::dimension_mismatch,
          "frame-unit intervals need one group id per pixel");

  MetricsReport r;
  r.method = std::move(method);
  r.pixels = n;
  r.mse = mse(pred, truth);
  try {
    r.rho = pearson(pred, truth);
  } catch (const Error& e) {
    if (e.code() != Errc::undefined_statistic) throw;
    r.rho = std::numeric_limits<double>::quiet_NaN();
  }
  if (!log_lik.empty()) {
    double s = 0.0;
    for (double v : log_lik) s += v;
    r.avg_ll = s / static_cast<double>(n);
    r.perplexity = std::exp2(-*r.avg_ll);
  }

  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);

  // Collapse pixels into resampling units.
  std::vector<UnitSums> units;
  std::vector<std::size_t> unit_of(n);
  if (options.unit == CiUnit::pixel) {
    units.resize(n);
    for (std::size_t i = 0; i < n; ++i) unit_of[i] = i;
  } else {
    std::vector<std::uint32_t> ids(groups.begin(), groups.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    units.resize(ids.size());
    for (std::size_t i = 0; i < n; ++i)
      unit_of[i] = static_cast<std::size_t>(
          std::lower_bound(ids.begin(), ids.end(), groups[i]) - ids.begin());
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = units[unit_of[i]];
    const double a = pred[i] - mp;
    const double b = truth[i] - mt;
    u.count += 1.0;
    u.sq_err += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    u.p += a;
    u.t += b;
    u.pp += a * a;
    u.tt += b * b;
    u.pt += a * b;
    if (!log_lik.empty()) u.ll += log_lik[i];
  }

  const std::size_t m = units.size();
  const std::size_t b_count = options.bootstrap.resamples;
  std::vector<double> s_mse(b_count), s_rho(b_count), s_ll(b_count);
  Rng rng(options.bootstrap.seed);
  for (std::size_t b = 0; b < b_count; ++b) {
    UnitSums acc;
    for (std::size_t i = 0; i < m; ++i) acc.add(units[uniform_index(rng, m)]);
    s_mse[b] = acc.sq_err / acc.count;
    s_rho[b] = acc.rho();
    s_ll[b] = acc.ll / acc.count;
  }
  const double level = options.bootstrap.level;
  r.mse_ci = interval_from(std::move(s_mse), level, r.mse);
  if (std::isfinite(r.rho))
    r.rho_ci = interval_from(std::move(s_rho), level, r.rho);
  else
    r.rho_ci = {r.rho, r.rho};
  if (r.avg_ll) r.ll_ci = interval_from(std::move(s_ll), level, *r.avg_ll);
  return r;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_metrics_header(std::ostream& out) {
  out << "method,K_max,MSE,MSE_CI_lo,MSE_CI_hi,rho,rho_CI_lo,rho_CI_hi,avg_ll,ll_CI_lo,"
         "ll_CI_hi,perplexity\n";
}

void write_metrics_row(std::ostream& out, const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  out << r.method << ',' << (r.k_max ? std::to_string(*r.k_max) : std::string()) << ','
      << format_number(r.mse) << ',' << format_number(r.mse_ci.lower) << ','
      << format_number(r.mse_ci.upper) << ',' << format_number(r.rho) << ','
      << format_number(r.rho_ci.lower) << ',' << format_number(r.rho_ci.upper) << ','
      << opt(r.avg_ll) << ',' << opt(r.ll_ci ? std::optional(r.ll_ci->lower) : std::nullopt)
      << ',' << opt(r.ll_ci ? std::optional(r.ll_ci->upper) : std::nullopt) << ','
      << opt(r.perplexity) << '\n';
}

void write_fold_header(std::ostream& out) {
  out << "fold,";
  write_metrics_header(out);
}

void write_fold_row(std::ostream& out, const MetricsReport& r) {
  out << r.fold << ',';
  write_metrics_row(out, r);
}

namespace {

std::vector<std::uint32_t> origin_frames(const ConeSet& cones) {
  std::vector<std::uint32_t> out(cones.size());
  for (std::size_t i = 0; i < cones.size(); ++i) out[i] = cones.origins[i].t;
  return out;
}

struct Pool {
  std::vector<double> pred, truth, ll;
  std::vector<std::uint32_t> groups;
  std::optional<std::size_t> k_max;
  bool distributional = false;
};

constexpr std::uint32_t kFoldStride = 1u << 20;

MetricsReport run_fold(const ConeSet& train, const ConeSet& test, const MethodConfig& method,
                       const CvOptions& options, std::size_t fold, Pool& pool) {
  const ConeSet fitted_on = subsample(train, options.budget, derive_seed(options.seed, fold));
  const auto model = fit_forecaster(method, fitted_on, derive_seed(options.seed, 1000 + fold));
  const auto pred = model->predict(test);
  std::vector<double> truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truth[i] = test.flcs(static_cast<Eigen::Index>(i), 0);
  std::vector<double> ll;
  if (model->distributional()) ll = model->log_likelihood(test).per_pixel;
  const auto frames = origin_frames(test);
  ScoreOptions scoring = options.scoring;
  scoring.bootstrap.seed = derive_seed(options.seed, 2000 + fold);
  auto report = score(method_name(method.method), pred, truth, ll, frames, scoring);
  report.k_max = model->state_budget();
  report.fold = fold;

  require(fold < 4096, Errc::invalid_argument, "too many folds to pool");
  pool.pred.insert(pool.pred.end(), pred.begin(), pred.end());
  pool.truth.insert(pool.truth.end(), truth.begin(), truth.end());
  pool.ll.insert(pool.ll.end(), ll.begin(), ll.end());
  for (std::uint32_t t : frames) {
    require(t < kFoldStride, Errc::invalid_argument, "frame index too large for pooling");
    pool.groups.push_back(static_cast<std::uint32_t>(fold) * kFoldStride + t);
  }
  pool.k_max = report.k_max;
  pool.distributional = model->distributional();
  return report;
}

MetricsReport pooled_score(const MethodConfig& method, const CvOptions& options,
                           const Pool& pool) {
  ScoreOptions scoring = options.scoring;
  scoring.bootstrap.seed = derive_seed(options.seed, 3000);
  auto report = score(method_name(method.method), pool.pred, pool.truth, pool.ll, pool.groups,
                      scoring);
  report.k_max = pool.k_max;
  return report;
}

void check_method(const MethodConfig& method, const ConeGeometry& geometry) {
  require(method.method != Method::mixed_licors, Errc::unsupported,
          "mixed_licors is not implemented");
  require(geometry.future_dim() == 1, Errc::invalid_argument,
          "evaluation protocols score scalar futures (h_f = 0)");
}

}  // namespace

CvResult loo_experiment_cv(std::span<const Field> datasets, const ConeGeometry& geometry,
                           const MethodConfig& method, const CvOptions& options) {
  require(datasets.size() >= 2, Errc::invalid_argument,
          "leave-one-experiment-out needs at least two datasets");
  check_method(method, geometry);
  std::vector<ConeSet> cones;
  cones.reserve(datasets.size());
  for (const auto& d : datasets) cones.push_back(extract_cones(d, geometry));

  CvResult result;
  Pool pool;
  for (std::size_t fold = 0; fold < datasets.size(); ++fold) {
    std::vector<ConeSet> rest;
    for (std::size_t j = 0; j < datasets.size(); ++j)
      if (j != fold) rest.push_back(cones[j]);
    result.folds.push_back(run_fold(concat(rest), cones[fold], method, options, fold, pool));
  }
  result.pooled = pooled_score(method, options, pool);
  return result;
}

std::vector<std::size_t> retained_frames(const Field& field, const ConeGeometry& geometry,
                                         std::size_t skip) {
  require(skip >= 1, Errc::invalid_argument, "skip must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t t : eligible_frames(field, geometry))
    if ((t + 1) % skip == 0) out.push_back(t);
  return out;
}

CvResult loo_frame_cv(const Field& field, const ConeGeometry& geometry, std::size_t skip,
                      const MethodConfig& method, const CvOptions& options) {
  check_method(method, geometry);
  const auto frames = retained_frames(field, geometry, skip);
  require(frames.size() >= 3, Errc::invalid_argument,
          "leave-one-frame-out needs at least three retained frames, got " +
              std::to_string(frames.size()));

  CvResult result;
  Pool pool;
  for (std::size_t fold = 0; fold < frames.size(); ++fold) {
    std::vector<std::size_t> train_frames;
    for (std::size_t t : frames)
      if (t != frames[fold]) train_frames.push_back(t);
    const std::size_t held_out[] = {frames[fold]};
    const ConeSet train = extract_cones(field, geometry, train_frames);
    const ConeSet test = extract_cones(field, geometry, held_out);
    for (const auto& o : train.origins)
      require(o.t != frames[fold], Errc::invalid_argument,
              "training cones overlap the held-out frame");
    result.folds.push_back(run_fold(train, test, method, options, fold, pool));
  }
  result.pooled = pooled_score(method, options, pool);
  return result;
}

}  // namespace lightcone
