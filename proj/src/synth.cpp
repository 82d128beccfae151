#include "lightcone/synth.hpp"

#include "lightcone/error.hpp"
#include "lightcone/random.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

namespace lightcone {

const char* synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::linear_diffusion: return "linear_diffusion";
    case SynthKind::k_regime: return "k_regime";
    case SynthKind::moving_blob: return "moving_blob";
  }
  return "?";
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "linear_diffusion") return SynthKind::linear_diffusion;
  if (name == "k_regime") return SynthKind::k_regime;
  if (name == "moving_blob") return SynthKind::moving_blob;
  fail(Errc::config, "unknown generator '" + std::string(name) +
                         "' (expected linear_diffusion, k_regime or moving_blob)");
}

namespace {

void check_dims(const SynthSpec& spec) {
  require(spec.frames >= 1 && spec.height >= 1 && spec.width >= 1, Errc::invalid_argument,
          "generator dimensions must be positive");
  require(std::isfinite(spec.noise) && spec.noise >= 0.0, Errc::invalid_argument,
          "noise level must be finite and nonnegative");
}

std::size_t wrap(long v, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

}  // namespace

double diffusion_spectral_radius(const std::array<double, 9>& coefficients,
                                 std::size_t height, std::size_t width) {
  double radius = 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t ku = 0; ku < height; ++ku) {
    for (std::size_t kv = 0; kv < width; ++kv) {
      std::complex<double> lambda = 0.0;
      for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) {
          const double phase = two_pi * (static_cast<double>(ku) * a / static_cast<double>(height) +
                                         static_cast<double>(kv) * b / static_cast<double>(width));
          lambda += coefficients[static_cast<std::size_t>((a + 1) * 3 + (b + 1))] *
                    std::polar(1.0, -phase);
        }
      }
      radius = std::max(radius, std::abs(lambda));
    }
  }
  return radius;
}

LinearDiffusionData gen_linear_diffusion(const SynthSpec& spec) {
  check_dims(spec);
  for (double b : spec.coefficients)
    require(std::isfinite(b), Errc::invalid_argument, "coefficients must be finite");
  const double rho = diffusion_spectral_radius(spec.coefficients, spec.height, spec.width);
  require(rho < 1.0, Errc::invalid_argument,
          "diffusion coefficients are not contractive (spectral radius " + std::to_string(rho) +
              ")");

  Rng rng(spec.seed);
  Field f(spec.frames, spec.height, spec.width);
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c) f(0, r, c) = standard_normal(rng);
  for (std::size_t t = 1; t < spec.frames; ++t) {
    for (std::size_t r = 0; r < spec.height; ++r) {
      for (std::size_t c = 0; c < spec.width; ++c) {
        double v = 0.0;
        std::size_t k = 0;
        for (long a = -1; a <= 1; ++a)
          for (long b = -1; b <= 1; ++b, ++k)
            v += spec.coefficients[k] *
                 f(t - 1, wrap(static_cast<long>(r) + a, spec.height),
                   wrap(static_cast<long>(c) + b, spec.width));
        if (spec.noise > 0.0) v += spec.noise * standard_normal(rng);
        f(t, r, c) = v;
      }
    }
  }
  return {std::move(f), spec.coefficients};
}

RegimeData gen_k_regime(const SynthSpec& spec) {
  check_dims(spec);
  require(!spec.regime_means.empty(), Errc::invalid_argument, "at least one regime is needed");
  require(spec.block >= 1, Errc::invalid_argument, "block width must be positive");
  require(std::abs(spec.persistence) < 1.0, Errc::invalid_argument,
          "persistence must lie in (-1, 1)");
  const std::size_t k = spec.regime_means.size();

  RegimeData out;
  out.labels.resize(spec.height * spec.width);
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c)
      out.labels[r * spec.width + c] = static_cast<int>((c / spec.block) % k);

  Rng rng(spec.seed);
  Field f(spec.frames, spec.height, spec.width);
  const double stationary = spec.noise / std::sqrt(1.0 - spec.persistence * spec.persistence);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t r = 0; r < spec.height; ++r) {
      for (std::size_t c = 0; c < spec.width; ++c) {
        const double m = spec.regime_means[static_cast<std::size_t>(out.labels[r * spec.width + c])];
        const double e = spec.noise > 0.0 ? standard_normal(rng) : 0.0;
        f(t, r, c) = t == 0 ? m + stationary * e
                            : m + spec.persistence * (f(t - 1, r, c) - m) + spec.noise * e;
      }
    }
  }
  out.field = std::move(f);
  return out;
}

Field gen_moving_blob(const SynthSpec& spec) {
  check_dims(spec);
  require(spec.blob_radius > 0.0, Errc::invalid_argument, "blob radius must be positive");
  const double h = static_cast<double>(spec.height);
  const double w = static_cast<double>(spec.width);
  const double r0 = spec.start[0] < 0.0 ? h / 2.0 : spec.start[0];
  const double c0 = spec.start[1] < 0.0 ? w / 2.0 : spec.start[1];
  auto periodic = [](double d, double n) {
    d = std::fmod(d, n);
    if (d < 0.0) d += n;
    return std::min(d, n - d);
  };

  Rng rng(spec.seed);
  Field f(spec.frames, spec.height, spec.width);
  const double denom = 2.0 * spec.blob_radius * spec.blob_radius;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double cr = r0 + spec.velocity[0] * static_cast<double>(t);
    const double cc = c0 + spec.velocity[1] * static_cast<double>(t);
    for (std::size_t r = 0; r < spec.height; ++r) {
      const double dr = periodic(static_cast<double>(r) - cr, h);
      for (std::size_t c = 0; c < spec.width; ++c) {
        const double dc = periodic(static_cast<double>(c) - cc, w);
        double v = std::exp(-(dr * dr + dc * dc) / denom);
        if (spec.noise > 0.0) v += spec.noise * standard_normal(rng);
        f(t, r, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return f;
}

std::vector<bool> regime_boundary(std::span<const int> labels, std::size_t height,
                                  std::size_t width, std::size_t radius) {
  require(labels.size() == height * width, Errc::dimension_mismatch,
          "label map does not match the frame size");
  std::vector<bool> out(labels.size(), false);
  const long rad = static_cast<long>(radius);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const int own = labels[r * width + c];
      bool mixed = false;
      for (long a = -rad; a <= rad && !mixed; ++a) {
        const long rr = static_cast<long>(r) + a;
        if (rr < 0 || rr >= static_cast<long>(height)) continue;
        for (long b = -rad; b <= rad && !mixed; ++b) {
          const std::size_t cc = wrap(static_cast<long>(c) + b, width);
          mixed = labels[static_cast<std::size_t>(rr) * width + cc] != own;
        }
      }
      out[r * width + c] = mixed;
    }
  }
  return out;
}

PurityReport purity(std::span<const int> predicted, std::span<const int> truth,
                    const std::vector<bool>& include) {
  require(predicted.size() == truth.size(), Errc::dimension_mismatch,
          "predicted and true labels differ in length");
  require(include.empty() || include.size() == truth.size(), Errc::dimension_mismatch,
          "inclusion mask differs in length");
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (include.empty() || include[i]) ++table[predicted[i]][truth[i]];

  PurityReport rep;
  std::size_t majority_total = 0, total = 0;
  rep.minimum = 1.0;
  for (const auto& [group, counts] : table) {
    std::size_t size = 0, best = 0;
    for (const auto& [label, n] : counts) {
      size += n;
      best = std::max(best, n);
    }
    rep.group_sizes.push_back(size);
    rep.per_group.push_back(static_cast<double>(best) / static_cast<double>(size));
    rep.minimum = std::min(rep.minimum, rep.per_group.back());
    majority_total += best;
    total += size;
  }
  require(total > 0, Errc::invalid_argument, "purity of an empty selection");
  rep.overall = static_cast<double>(majority_total) / static_cast<double>(total);
  return rep;
}

void write_labels_csv(const std::filesystem::path& path, std::span<const int> labels,
                      std::size_t height, std::size_t width) {
  require(labels.size() == height * width, Errc::dimension_mismatch,
          "label map does not match the frame size");
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot write " + path.string());
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c) out << ',';
      out << labels[r * width + c];
    }
    out << '\n';
  }
  require(static_cast<bool>(out), Errc::io, "write failed for " + path.string());
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot read " + path.string());
  std::vector<int> out;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        out.push_back(std::stoi(cell));
      } catch (const std::exception&) {
        fail(Errc::io, "malformed label '" + cell + "' in " + path.string());
      }
    }
  }
  return out;
}

}  // namespace lightcone
