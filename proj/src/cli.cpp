#include "lightcone/cli.hpp"

#include "lightcone/bounds.hpp"
#include "lightcone/error.hpp"
#include "lightcone/eval.hpp"
#include "lightcone/forecaster.hpp"
#include "lightcone/kde.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/random.hpp"
#include "lightcone/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace lightcone {
namespace {

struct KeySpec {
  const char* name;
  const char* fallback;
  const char* help;
};

const std::vector<KeySpec> kGeometryKeys = {
    {"h_p", "1", "past horizon"},
    {"h_f", "0", "future horizon"},
    {"c", "1", "propagation speed (pixels per frame)"},
    {"norm", "chebyshev", "spatial norm: chebyshev or euclidean"},
};

const std::vector<KeySpec> kMethodKeys = {
    {"K_max", "10", "Moonshine state budget"},
    {"K", "10", "OHP state count"},
    {"K_sig", "10", "Moonshine signature pairs"},
    {"k", "5", "kNN neighbours"},
    {"knn_weighting", "uniform", "kNN weighting: uniform or distance"},
    {"kde_cap", "500", "KDE support subsample size"},
};

std::vector<KeySpec> keys_for(const std::string& command) {
  std::vector<KeySpec> keys = {{"seed", "0", "random seed"},
                               {"output", "run", "output directory"}};
  auto add = [&](const std::vector<KeySpec>& more) {
    keys.insert(keys.end(), more.begin(), more.end());
  };
  if (command == "extract") {
    add(kGeometryKeys);
    add({{"input", "", "input fields (STF1 files or CSV frame directories), comma separated"},
         {"budget", "0", "cone subsample size (0 keeps all)"}});
  } else if (command == "fit") {
    add(kGeometryKeys);
    add(kMethodKeys);
    add({{"input", "", "training fields, comma separated"},
         {"method", "moonshine", "fltp, knn, lclr, moonshine or ohp"},
         {"budget", "40000", "training cone subsample size (0 keeps all)"}});
  } else if (command == "predict") {
    add({{"model", "", "model file written by fit"},
         {"input", "", "field to predict"},
         {"frame", "", "0-based frame index"},
         {"bootstrap", "1000", "bootstrap resamples"},
         {"level", "0.95", "interval level"},
         {"ci_unit", "pixel", "resampling unit: pixel or frame"}});
  } else if (command == "eval") {
    add(kGeometryKeys);
    add(kMethodKeys);
    add({{"input", "", "fields, comma separated (one per experiment)"},
         {"protocol", "frame", "frame (leave one frame out) or experiment"},
         {"methods", "fltp,knn,lclr,moonshine,ohp", "methods to score, comma separated"},
         {"skip", "5", "frame protocol: keep every skip-th frame"},
         {"budget", "0", "training cone budget (0: 40000 frame, 20000 experiment)"},
         {"bootstrap", "1000", "bootstrap resamples"},
         {"level", "0.95", "interval level"},
         {"ci_unit", "pixel", "resampling unit: pixel or frame"}});
  } else if (command == "synth") {
    add({{"kind", "k_regime", "linear_diffusion, k_regime or moving_blob"},
         {"T", "50", "frames"},
         {"H", "64", "height"},
         {"W", "64", "width"},
         {"sigma", "0.1", "noise standard deviation"},
         {"K", "2", "k_regime: number of regimes"},
         {"spacing", "10", "k_regime: distance between consecutive regime means"},
         {"means", "", "k_regime: explicit regime means, comma separated"},
         {"persistence", "0.1", "k_regime: AR(1) coefficient"},
         {"block", "16", "k_regime: stripe width"},
         {"coefficients", "0.05,0.1,0.05,0.1,0.3,0.1,0.05,0.1,0.05",
          "linear_diffusion: 3x3 weights, row-major"},
         {"radius", "6", "moving_blob: Gaussian radius"},
         {"velocity", "1,0", "moving_blob: (row, col) pixels per frame"},
         {"start", "", "moving_blob: (row, col) start, default centre"}});
  } else if (command == "bounds") {
    add({{"trials", "10000", "perturbation-bound trials"},
         {"N", "50", "perturbation trials: largest support size"},
         {"d", "3", "perturbation trials: largest dimension"},
         {"bandwidth", "0.5", "kernel bandwidth"},
         {"mc_trials", "5000", "concentration Monte Carlo trials"},
         {"points", "50", "concentration sample size"},
         {"dim", "2", "concentration dimension"},
         {"states", "3", "concentration state count"},
         {"max_eps", "1", "concentration perturbation range"},
         {"a_grid", "", "concentration thresholds (default: multiples of K_h(0))"}});
  }
  return keys;
}

const std::vector<std::pair<std::string, std::string>> kCommands = {
    {"extract", "Extract light cones from fields to CSV"},
    {"fit", "Fit a forecasting model"},
    {"predict", "Predict one frame with a fitted model"},
    {"eval", "Cross-validated comparison of methods"},
    {"synth", "Generate a synthetic field"},
    {"bounds", "Numerical checks of the KDE perturbation and concentration bounds"},
};

class RunConfig {
 public:
  std::string command;
  std::map<std::string, std::string> values;

  const std::string& str(const std::string& key) const {
    auto it = values.find(key);
    require(it != values.end(), Errc::config, "missing key '" + key + "'");
    return it->second;
  }
  const std::string& required(const std::string& key) const {
    const auto& v = str(key);
    require(!v.empty(), Errc::config, "--" + key + " is required");
    return v;
  }
  std::uint64_t uint(const std::string& key) const { return parse_uint(key, str(key)); }
  std::size_t count(const std::string& key) const {
    return static_cast<std::size_t>(uint(key));
  }
  int integer(const std::string& key) const {
    const auto& s = str(key);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), Errc::config,
            "--" + key + ": expected an integer, got '" + s + "'");
    return v;
  }
  double real(const std::string& key) const { return parse_real(key, str(key)); }
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) out.push_back(parse_real(key, s));
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), Errc::config,
            "--" + key + ": expected a nonnegative integer, got '" + s + "'");
    return v;
  }
  static double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size() && std::isfinite(v), Errc::config,
            "--" + key + ": expected a number, got '" + s + "'");
    return v;
  }
};

void read_config_file(const fs::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::config, "cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = RunConfig::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::config,
            path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = RunConfig::trim(line.substr(0, eq));
    const std::string value = RunConfig::trim(line.substr(eq + 1));
    if (key == "version") continue;
    if (key == "command") {
      require(value == cfg.command, Errc::config,
              "config file is for '" + value + "', not '" + cfg.command + "'");
      continue;
    }
    require(cfg.values.count(key) > 0, Errc::config,
            path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    cfg.values[key] = value;
  }
}

void write_config_file(const fs::path& dir, const RunConfig& cfg) {
  std::ofstream out(dir / "config.txt");
  require(static_cast<bool>(out), Errc::io, "cannot write " + (dir / "config.txt").string());
  out << "command = " << cfg.command << '\n' << "version = " << kVersion << '\n';
  for (const auto& [k, v] : cfg.values) out << k << " = " << v << '\n';
}

// Errors raised while interpreting configuration values are configuration
// errors, whatever the constructor reports.
template <class F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(Errc::config, e.what());
  }
}

ConeGeometry geometry_from(const RunConfig& cfg) {
  return as_config([&] {
    return ConeGeometry(cfg.integer("h_p"), cfg.integer("h_f"), cfg.integer("c"),
                        parse_norm(cfg.str("norm")));
  });
}

MethodConfig method_config(const RunConfig& cfg, Method method) {
  MethodConfig mc;
  mc.method = method;
  mc.max_states = cfg.count("K_max");
  mc.states = cfg.count("K");
  mc.signature_pairs = cfg.count("K_sig");
  mc.knn.k = cfg.count("k");
  mc.kde_cap = cfg.count("kde_cap");
  const auto& w = cfg.str("knn_weighting");
  if (w == "uniform") {
    mc.knn.weighting = KnnWeighting::uniform;
  } else if (w == "distance") {
    mc.knn.weighting = KnnWeighting::distance;
  } else {
    fail(Errc::config, "--knn_weighting: expected uniform or distance, got '" + w + "'");
  }
  require(mc.max_states >= 1 && mc.states >= 1 && mc.signature_pairs >= 1 && mc.knn.k >= 1,
          Errc::config, "state counts, signature pairs and k must be positive");
  require(mc.kde_cap >= 1, Errc::config, "--kde_cap must be positive");
  return mc;
}

Field load_field(const std::string& path) {
  require(fs::exists(path), Errc::io, "no such input: " + path);
  return fs::is_directory(path) ? read_csv_frames(path) : read_field(path);
}

std::vector<Field> load_inputs(const RunConfig& cfg) {
  std::vector<Field> out;
  for (const auto& p : cfg.list("input")) out.push_back(load_field(p));
  require(!out.empty(), Errc::config, "--input is required");
  return out;
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = cfg.required("output");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::io, "cannot create output directory " + dir.string());
  write_config_file(dir, cfg);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot write " + path.string());
  return out;
}

// 8-bit binary PGM, min-max scaled over the pixels where mask is set.
void write_pgm(const fs::path& path, std::span<const double> values,
               std::span<const std::uint8_t> mask, std::size_t height, std::size_t width) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    if (first) {
      lo = hi = values[i];
      first = false;
    }
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  std::vector<unsigned char> px(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i] || hi <= lo) continue;
    px[i] = static_cast<unsigned char>(std::lround(255.0 * (values[i] - lo) / (hi - lo)));
  }
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

int cmd_extract(const RunConfig& cfg, std::ostream& out) {
  const auto geometry = geometry_from(cfg);
  const auto fields = load_inputs(cfg);
  std::vector<ConeSet> parts;
  for (const auto& f : fields) parts.push_back(extract_cones(f, geometry));
  ConeSet cones = concat(parts);
  if (const auto budget = cfg.count("budget"); budget > 0)
    cones = subsample(cones, budget, derive_seed(cfg.uint("seed"), 0));
  const auto dir = prepare_output(cfg);

  auto csv = open_out(dir / "cones.csv");
  csv << "t,row,col";
  for (std::size_t j = 0; j < geometry.past_dim(); ++j) csv << ",plc_" << j;
  for (std::size_t j = 0; j < geometry.future_dim(); ++j) csv << ",flc_" << j;
  csv << '\n';
  for (std::size_t i = 0; i < cones.size(); ++i) {
    const auto& o = cones.origins[i];
    csv << o.t << ',' << o.row << ',' << o.col;
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < cones.plcs.cols(); ++j) csv << ',' << format_number(cones.plcs(r, j));
    for (Eigen::Index j = 0; j < cones.flcs.cols(); ++j) csv << ',' << format_number(cones.flcs(r, j));
    csv << '\n';
  }
  out << "extracted " << cones.size() << " cones (d_p=" << geometry.past_dim()
      << ", d_f=" << geometry.future_dim() << ") to " << (dir / "cones.csv").string() << '\n';
  return 0;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  const auto geometry = geometry_from(cfg);
  const Method method = parse_method(cfg.str("method"));
  const auto mc = method_config(cfg, method);
  require(method != Method::mixed_licors, Errc::unsupported, "mixed_licors is not implemented");
  const auto fields = load_inputs(cfg);
  const std::uint64_t seed = cfg.uint("seed");

  std::vector<ConeSet> parts;
  for (const auto& f : fields) parts.push_back(extract_cones(f, geometry));
  ConeSet cones = concat(parts);
  const std::size_t available = cones.size();
  if (const auto budget = cfg.count("budget"); budget > 0)
    cones = subsample(cones, budget, derive_seed(seed, 0));
  const auto model = fit_forecaster(mc, cones, derive_seed(seed, 1));

  const auto dir = prepare_output(cfg);
  write_bytes(dir / "model.lcsm", encode_forecaster(*model));

  std::ostringstream log;
  log << "method = " << method_name(method) << '\n'
      << "cones_available = " << available << '\n'
      << "cones_used = " << cones.size() << '\n';
  if (const auto* sm = as_state_model(*model)) {
    log << "states = " << sm->states.size() << '\n'
        << "initial_clusters = " << sm->initial_clusters << '\n';
  }
  if (const auto* lm = as_linear_model(*model))
    log << "ridge_used = " << (lm->ridge_used ? "yes" : "no") << '\n';
  auto f = open_out(dir / "fit.log");
  f << log.str();
  out << log.str();
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const auto bytes = read_file_bytes(cfg.required("model"));
  const auto model = decode_forecaster(bytes);
  const Field field = load_field(cfg.required("input"));
  const std::size_t t = cfg.count("frame");
  ScoreOptions scoring;
  scoring.bootstrap.resamples = cfg.count("bootstrap");
  scoring.bootstrap.level = cfg.real("level");
  scoring.bootstrap.seed = cfg.uint("seed");
  scoring.unit = parse_ci_unit(cfg.str("ci_unit"));
  require(scoring.bootstrap.resamples >= 100, Errc::config, "--bootstrap must be >= 100");
  require(scoring.bootstrap.level > 0.0 && scoring.bootstrap.level < 1.0, Errc::config,
          "--level must lie in (0, 1)");

  const auto& geometry = model->geometry();
  const std::size_t frames[] = {t};
  const ConeSet cones = extract_cones(field, geometry, frames);
  const auto pred = model->predict(cones);
  std::vector<double> truth(cones.size());
  for (std::size_t i = 0; i < cones.size(); ++i) {
    const auto& o = cones.origins[i];
    truth[i] = field(o.t, o.row, o.col);
  }
  std::vector<double> ll;
  if (model->distributional()) ll = model->log_likelihood(cones).per_pixel;
  const auto pct = err_pct_map(truth, pred);

  const std::size_t h = field.height(), w = field.width();
  std::vector<double> pred_img(h * w, kMaskFill), abs_img(h * w, kMaskFill),
      pct_img(h * w, kMaskFill), truth_img(h * w);
  std::vector<std::uint8_t> mask(h * w, 0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) truth_img[r * w + c] = field(t, r, c);
  for (std::size_t i = 0; i < cones.size(); ++i) {
    const auto& o = cones.origins[i];
    const std::size_t idx = static_cast<std::size_t>(o.row) * w + o.col;
    pred_img[idx] = pred[i];
    abs_img[idx] = std::abs(pred[i] - truth[i]);
    pct_img[idx] = pct[i];
    mask[idx] = 1;
  }

  const auto report = score(method_name(model->method()), pred, truth, ll,
                            std::vector<std::uint32_t>(pred.size(), static_cast<std::uint32_t>(t)),
                            scoring);
  auto with_k = report;
  with_k.k_max = model->state_budget();

  const auto dir = prepare_output(cfg);
  write_field(Field(1, h, w, pred_img), dir / "prediction.stf1");
  write_field(Field(1, h, w, abs_img), dir / "abs_error.stf1");
  write_field(Field(1, h, w, pct_img), dir / "err_pct.stf1");
  {
    auto m = open_out(dir / "mask.csv");
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) m << (c ? "," : "") << int(mask[r * w + c]);
      m << '\n';
    }
  }
  const std::vector<std::uint8_t> all(h * w, 1);
  write_pgm(dir / "truth.pgm", truth_img, all, h, w);
  write_pgm(dir / "prediction.pgm", pred_img, mask, h, w);
  write_pgm(dir / "err_pct.pgm", pct_img, mask, h, w);
  {
    auto m = open_out(dir / "metrics.csv");
    write_metrics_header(m);
    write_metrics_row(m, with_k);
  }
  write_metrics_header(out);
  write_metrics_row(out, with_k);
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const auto geometry = geometry_from(cfg);
  std::vector<Method> methods;
  for (const auto& name : cfg.list("methods")) methods.push_back(parse_method(name));
  require(!methods.empty(), Errc::config, "--methods lists no method");
  for (Method m : methods)
    require(m != Method::mixed_licors, Errc::unsupported, "mixed_licors is not implemented");
  const std::string protocol = cfg.str("protocol");
  require(protocol == "frame" || protocol == "experiment", Errc::config,
          "--protocol: expected frame or experiment, got '" + protocol + "'");

  CvOptions options;
  options.seed = cfg.uint("seed");
  options.budget = cfg.count("budget");
  if (options.budget == 0) options.budget = protocol == "frame" ? 40000 : 20000;
  options.scoring.bootstrap.resamples = cfg.count("bootstrap");
  options.scoring.bootstrap.level = cfg.real("level");
  options.scoring.unit = parse_ci_unit(cfg.str("ci_unit"));
  require(options.scoring.bootstrap.resamples >= 100, Errc::config, "--bootstrap must be >= 100");
  require(options.scoring.bootstrap.level > 0.0 && options.scoring.bootstrap.level < 1.0,
          Errc::config, "--level must lie in (0, 1)");
  const std::size_t skip = cfg.count("skip");
  require(skip >= 1, Errc::config, "--skip must be >= 1");
  std::vector<MethodConfig> configs;
  for (Method m : methods) configs.push_back(method_config(cfg, m));

  const auto fields = load_inputs(cfg);
  if (protocol == "frame")
    require(fields.size() == 1, Errc::config, "the frame protocol takes exactly one input");
  else
    require(fields.size() >= 2, Errc::config, "the experiment protocol needs two or more inputs");

  std::vector<CvResult> results;
  for (const auto& mc : configs) {
    results.push_back(protocol == "frame"
                          ? loo_frame_cv(fields[0], geometry, skip, mc, options)
                          : loo_experiment_cv(fields, geometry, mc, options));
  }

  const auto dir = prepare_output(cfg);
  auto metrics = open_out(dir / "metrics.csv");
  auto folds = open_out(dir / "folds.csv");
  write_metrics_header(metrics);
  write_fold_header(folds);
  write_metrics_header(out);
  for (const auto& r : results) {
    write_metrics_row(metrics, r.pooled);
    write_metrics_row(out, r.pooled);
    for (const auto& f : r.folds) write_fold_row(folds, f);
  }
  return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SynthSpec spec;
  spec.kind = parse_synth_kind(cfg.str("kind"));
  spec.frames = cfg.count("T");
  spec.height = cfg.count("H");
  spec.width = cfg.count("W");
  spec.noise = cfg.real("sigma");
  spec.seed = cfg.uint("seed");
  spec.persistence = cfg.real("persistence");
  spec.block = cfg.count("block");
  spec.blob_radius = cfg.real("radius");
  if (const auto means = cfg.reals("means"); !means.empty()) {
    spec.regime_means = means;
  } else {
    const std::size_t k = cfg.count("K");
    require(k >= 1, Errc::config, "--K must be positive");
    spec.regime_means.resize(k);
    for (std::size_t i = 0; i < k; ++i)
      spec.regime_means[i] = static_cast<double>(i) * cfg.real("spacing");
  }
  const auto coef = cfg.reals("coefficients");
  require(coef.size() == 9, Errc::config, "--coefficients needs 9 values");
  std::copy(coef.begin(), coef.end(), spec.coefficients.begin());
  const auto vel = cfg.reals("velocity");
  require(vel.size() == 2, Errc::config, "--velocity needs 2 values");
  spec.velocity = {vel[0], vel[1]};
  if (const auto start = cfg.reals("start"); !start.empty()) {
    require(start.size() == 2, Errc::config, "--start needs 2 values");
    spec.start = {start[0], start[1]};
  }

  Field field;
  std::vector<int> labels;
  std::optional<std::array<double, 9>> coefficients;
  as_config([&] {
    switch (spec.kind) {
      case SynthKind::linear_diffusion: {
        auto d = gen_linear_diffusion(spec);
        field = std::move(d.field);
        coefficients = d.coefficients;
        break;
      }
      case SynthKind::k_regime: {
        auto d = gen_k_regime(spec);
        field = std::move(d.field);
        labels = std::move(d.labels);
        break;
      }
      case SynthKind::moving_blob: field = gen_moving_blob(spec); break;
    }
    return 0;
  });

  const auto dir = prepare_output(cfg);
  write_field(field, dir / "field.stf1");
  if (!labels.empty()) write_labels_csv(dir / "labels.csv", labels, spec.height, spec.width);
  if (coefficients) {
    auto c = open_out(dir / "coefficients.csv");
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t k = 0; k < 3; ++k)
        c << (k ? "," : "") << format_number((*coefficients)[r * 3 + k]);
      c << '\n';
    }
  }
  out << "wrote " << synth_kind_name(spec.kind) << " field " << field.frames() << 'x'
      << field.height() << 'x' << field.width() << " to " << (dir / "field.stf1").string()
      << '\n';
  return 0;
}

int cmd_bounds(const RunConfig& cfg, bool lemma1, bool concentration, std::ostream& out) {
  if (!lemma1 && !concentration) lemma1 = concentration = true;
  const std::uint64_t seed = cfg.uint("seed");
  const double h = cfg.real("bandwidth");
  require(h > 0.0, Errc::config, "--bandwidth must be positive");

  BoundTrialReport lemma;
  ConcentrationReport conc;
  if (lemma1) {
    require(cfg.count("N") >= 2 && cfg.count("d") >= 1, Errc::config, "need N >= 2 and d >= 1");
    lemma = check_lemma1(cfg.count("trials"), cfg.count("N"), cfg.count("d"), h,
                         derive_seed(seed, 0));
  }
  if (concentration) {
    ConcentrationOptions co;
    co.dim = cfg.count("dim");
    co.states = cfg.count("states");
    co.bandwidth = h;
    co.max_eps = cfg.real("max_eps");
    require(co.dim >= 1 && co.states >= 1 && co.max_eps > 0.0 && cfg.count("points") >= 2 &&
                cfg.count("mc_trials") >= 1,
            Errc::config, "concentration check needs dim, states, mc_trials >= 1, points >= 2 "
                          "and max_eps > 0");
    auto grid = cfg.reals("a_grid");
    if (grid.empty()) {
      const double k0 = gaussian_kernel_at_zero(h, co.dim);
      for (double q : {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 0.5, 1.0}) grid.push_back(q * k0);
    }
    conc = check_concentration(cfg.count("mc_trials"), cfg.count("points"), grid,
                               derive_seed(seed, 1), co);
  }

  const auto dir = prepare_output(cfg);
  std::ostringstream summary;
  if (lemma1) {
    auto f = open_out(dir / "lemma1.csv");
    write_lemma1_csv(f, lemma);
  }
  if (concentration) {
    auto f = open_out(dir / "concentration.csv");
    write_concentration_csv(f, conc);
  }
  if (lemma1 && concentration) {
    write_bounds_summary(summary, lemma, conc);
  } else if (lemma1) {
    summary << "perturbation bound: " << lemma.trials << " trials, " << lemma.violations
            << " violations, max difference/bound " << format_number(lemma.max_ratio) << '\n';
  } else {
    std::ostringstream tmp;
    write_bounds_summary(tmp, lemma, conc);
    std::string s = tmp.str();
    summary << s.substr(s.find('\n') + 1);
  }
  auto f = open_out(dir / "summary.txt");
  f << summary.str();
  out << summary.str();
  if (lemma1 && lemma.violations > 0) throw Error(Errc::invalid_argument,
                                                  "perturbation bound violated");
  return 0;
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::config: return 2;
    case Errc::unsupported: return 4;
    default: return 3;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Light cone forecasting of spatio-temporal fields", "lightcone"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::string> config_paths;
  std::size_t threads = 0;
  bool lemma1 = false, concentration = false;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, description] : kCommands) {
    auto* sub = app.add_subcommand(name, description);
    subs[name] = sub;
    sub->add_option("--config", config_paths[name], "key = value file; flags override it");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    auto& slots = flag_values[name];
    for (const auto& key : keys_for(name)) {
      auto& slot = slots[key.name];
      std::string help = key.help;
      if (*key.fallback) help += std::string(" [") + key.fallback + "]";
      sub->add_option(std::string("--") + key.name, slot, help);
    }
    if (name == "bounds") {
      sub->add_flag("--lemma1", lemma1, "run the perturbation-bound trials");
      sub->add_flag("--concentration", concentration, "run the concentration check");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    std::string command;
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) command = name;
    RunConfig cfg;
    cfg.command = command;
    for (const auto& key : keys_for(command)) cfg.values[key.name] = key.fallback;
    if (!config_paths[command].empty()) read_config_file(config_paths[command], cfg);
    auto* sub = subs[command];
    for (const auto& [key, value] : flag_values[command])
      if (sub->get_option("--" + key)->count() > 0) cfg.values[key] = value;

    set_thread_count(threads);
    if (command == "extract") return cmd_extract(cfg, out);
    if (command == "fit") return cmd_fit(cfg, out);
    if (command == "predict") return cmd_predict(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "synth") return cmd_synth(cfg, out);
    return cmd_bounds(cfg, lemma1, concentration, out);
  } catch (const Error& e) {
    err << "error (" << errc_name(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace lightcone
