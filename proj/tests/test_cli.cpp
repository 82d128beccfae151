#include "lightcone/cli.hpp"
#include "lightcone/forecaster.hpp"
#include "lightcone/model_io.hpp"
#include "lightcone/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lightcone;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// A small two-regime video shared by the tests below.
fs::path regime_video(const fs::path& dir) {
  const auto field = (dir / "synth" / "field.stf1").string();
  if (!fs::exists(field))
    REQUIRE(run({"synth", "--kind", "k_regime", "--T", "12", "--H", "16", "--W", "16", "--K", "2",
                 "--spacing", "6", "--sigma", "1", "--block", "4", "--seed", "3", "--output",
                 (dir / "synth").string()}) == 0);
  return field;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}) == 0);
  for (const char* c : {"extract", "fit", "predict", "eval", "synth", "bounds"})
    CHECK(run({c, "--help"}) == 0);
  CHECK(run({}) == 2);
  CHECK(run({"train"}) == 2);
  CHECK(run({"fit", "--no-such-flag", "1"}) == 2);
}

TEST_CASE("config errors exit 2") {
  const auto dir = testing::scratch_dir("cli_config");
  const auto input = regime_video(dir);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "# comment\nbogus = 1\n";
  }
  CHECK(run({"fit", "--config", (dir / "bad.cfg").string(), "--input", input}) == 2);
  {
    std::ofstream cfg(dir / "wrong.cfg");
    cfg << "command = eval\n";
  }
  CHECK(run({"fit", "--config", (dir / "wrong.cfg").string(), "--input", input}) == 2);
  CHECK(run({"fit", "--input", input, "--method", "licors"}) == 2);
  CHECK(run({"fit", "--input", input, "--K", "ten"}) == 2);
  CHECK(run({"fit", "--input", input, "--h_p", "0", "--output", (dir / "m").string()}) == 2);
  CHECK(run({"eval", "--input", input, "--ci_unit", "cone"}) == 2);
  CHECK(run({"fit"}) == 2);
}

TEST_CASE("data and unsupported errors") {
  const auto dir = testing::scratch_dir("cli_errors");
  CHECK(run({"fit", "--input", (dir / "missing.stf1").string(), "--output",
             (dir / "m").string()}) == 3);
  const auto input = regime_video(dir);
  CHECK(run({"fit", "--input", input, "--method", "mixed_licors", "--output",
             (dir / "mixed").string()}) == 4);
  CHECK(run({"eval", "--input", input, "--methods", "mixed_licors", "--output",
             (dir / "mixed_eval").string()}) == 4);
}

TEST_CASE("config file and written config") {
  const auto dir = testing::scratch_dir("cli_written");
  const auto input = regime_video(dir);
  {
    std::ofstream cfg(dir / "fit.cfg");
    cfg << "command = fit\nmethod = ohp\nK = 4\n# trailing comment\nseed = 9\n";
  }
  const auto out = dir / "fit";
  REQUIRE(run({"fit", "--config", (dir / "fit.cfg").string(), "--K", "3", "--input", input,
               "--output", out.string()}) == 0);
  const auto text = slurp(out / "config.txt");
  CHECK(text.rfind("command = fit\n", 0) == 0);
  CHECK(text.find("K = 3\n") != std::string::npos);
  CHECK(text.find("seed = 9\n") != std::string::npos);
  CHECK(text.find("method = ohp\n") != std::string::npos);
  const auto bytes = slurp(out / "model.lcsm");
  const auto model = decode_forecaster(std::span(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  CHECK(model->method() == Method::ohp);
  CHECK(as_state_model(*model)->states.size() == 3);
}

TEST_CASE("synth emits labels") {
  const auto dir = testing::scratch_dir("cli_synth");
  regime_video(dir);
  const auto labels = read_labels_csv(dir / "synth" / "labels.csv");
  CHECK(labels.size() == 256);
  for (std::size_t c = 0; c < 16; ++c) CHECK(labels[c] == int((c / 4) % 2));
  CHECK(read_field(dir / "synth" / "field.stf1").frames() == 12);
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
  const auto dir = testing::scratch_dir("cli_determinism");
  const auto input = regime_video(dir);
  for (const char* method : {"moonshine", "ohp", "knn", "lclr"}) {
    CAPTURE(method);
    std::vector<std::string> models;
    for (const char* threads : {"1", "0", "1"}) {
      const auto out = dir / (std::string(method) + threads);
      REQUIRE(run({"fit", "--input", input, "--method", method, "--K_max", "3", "--K", "3",
                   "--budget", "500", "--seed", "4", "--threads", threads, "--output",
                   out.string()}) == 0);
      models.push_back(slurp(out / "model.lcsm"));
    }
    CHECK(models[0] == models[1]);
    CHECK(models[0] == models[2]);
  }
  std::vector<std::string> metrics;
  for (const char* threads : {"1", "0"}) {
    const auto out = dir / (std::string("eval") + threads);
    REQUIRE(run({"eval", "--input", input, "--methods", "fltp,ohp", "--K", "3", "--skip", "3",
                 "--budget", "300", "--bootstrap", "200", "--threads", threads, "--output",
                 out.string()}) == 0);
    metrics.push_back(slurp(out / "metrics.csv") + slurp(out / "folds.csv"));
  }
  CHECK(metrics[0] == metrics[1]);
}

TEST_CASE("predict writes maps and metrics") {
  const auto dir = testing::scratch_dir("cli_predict");
  const auto input = regime_video(dir);
  REQUIRE(run({"fit", "--input", input, "--method", "ohp", "--K", "2", "--output",
               (dir / "fit").string()}) == 0);
  const auto out = dir / "pred";
  REQUIRE(run({"predict", "--model", (dir / "fit" / "model.lcsm").string(), "--input", input,
               "--frame", "11", "--output", out.string()}) == 0);
  for (const char* f : {"prediction.stf1", "abs_error.stf1", "err_pct.stf1", "mask.csv",
                        "truth.pgm", "prediction.pgm", "err_pct.pgm", "metrics.csv"})
    CHECK(fs::exists(out / f));
  const Field pred = read_field(out / "prediction.stf1");
  CHECK(pred.frames() == 1);
  CHECK(pred.height() == 16);
  const auto rows = lines(slurp(out / "metrics.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("ohp,2,", 0) == 0);
  CHECK(slurp(out / "truth.pgm").rfind("P5\n16 16\n255\n", 0) == 0);
  CHECK(run({"predict", "--model", (dir / "fit" / "model.lcsm").string(), "--input", input,
             "--frame", "0", "--output", (dir / "p0").string()}) == 3);
}

TEST_CASE("eval writes pooled and per-fold rows") {
  const auto dir = testing::scratch_dir("cli_eval");
  const auto input = regime_video(dir);
  const auto out = dir / "eval";
  REQUIRE(run({"eval", "--input", input, "--skip", "2", "--K", "3", "--K_max", "3", "--budget",
               "400", "--bootstrap", "100", "--output", out.string()}) == 0);
  const auto pooled = lines(slurp(out / "metrics.csv"));
  CHECK(pooled.size() == 6);
  const auto folds = lines(slurp(out / "folds.csv"));
  CHECK(folds.front().rfind("fold,method,K_max,MSE,", 0) == 0);
  CHECK(folds.size() == 1 + 5 * 6);

  CHECK(run({"extract", "--input", input, "--budget", "50", "--output", (dir / "ex").string()}) ==
        0);
  CHECK(lines(slurp(dir / "ex" / "cones.csv")).size() == 51);
}

TEST_CASE("bounds command") {
  const auto dir = testing::scratch_dir("cli_bounds");
  REQUIRE(run({"bounds", "--lemma1", "--concentration", "--trials", "500", "--mc_trials", "500",
               "--output", dir.string()}) == 0);
  for (const char* f : {"lemma1.csv", "concentration.csv", "summary.txt"})
    CHECK(fs::exists(dir / f));
}
