#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obsimpact/pipeline.hpp"
#include "obsimpact/scaler.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace obsimpact;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("obsimpact_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// Tiny but end-to-end viable configuration.
RunConfig tiny_config(const fs::path& root) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.region = {30.0, 32.0, 120.0, 123.0};
  cfg.obs_per_kind = 3;
  cfg.train_steps = 3;
  cfg.test_steps = 2;
  cfg.centers_per_step = 4;
  cfg.d = 8;
  cfg.mlp_hidden = {8};
  cfg.epochs_pretrain = 2;
  cfg.epochs_finetune = 2;
  cfg.batch_size = 4;
  cfg.dataset_dir = (root / "data").string();
  cfg.out_dir = (root / "out").string();
  return cfg;
}

}  // namespace

TEST_CASE("config files parse with overrides and reject unknown keys") {
  TempDir tmp("cfg");
  const fs::path cfg_path = tmp.path / "run.cfg";
  {
    std::ofstream f(cfg_path);
    f << "# comment line\n"
      << "seed = 17\n"
      << "lat_min = 25\n"
      << "lat_max = 35\n"
      << "lon_min = 110\n"
      << "lon_max = 120\n"
      << "mlp_hidden = 16,8\n"
      << "fractions = 0.05,0.25\n"
      << "method = gradcam\n"
      << "\n"
      << "epochs_finetune = 4\n";
  }
  const RunConfig cfg = parse_run_config(cfg_path.string());
  CHECK(cfg.seed == 17);
  CHECK(cfg.region.lat_min == 25.0);
  CHECK(cfg.region.lon_max == 120.0);
  CHECK(cfg.mlp_hidden == std::vector<int>{16, 8});
  CHECK(cfg.fractions == std::vector<double>{0.05, 0.25});
  CHECK(cfg.method == "gradcam");
  CHECK(cfg.epochs_finetune == 4);
  // untouched keys keep their defaults
  CHECK(cfg.train_steps == 40);

  RunConfig reject;
  CHECK_THROWS_AS(reject.set("learning_rate", "0.1"), std::runtime_error);
  CHECK_THROWS_AS(reject.set("seed", "not-a-number"), std::runtime_error);
}

TEST_CASE("default paths derive from out_dir unless overridden") {
  RunConfig cfg;
  cfg.out_dir = "results";
  CHECK(cfg.encoder_path() == "results/encoder.ckpt");
  CHECK(cfg.model_path() == "results/model.ckpt");
  cfg.checkpoint = "elsewhere/m.ckpt";
  CHECK(cfg.model_path() == "elsewhere/m.ckpt");
}

TEST_CASE("gen is deterministic and writes both splits") {
  TempDir tmp("gen");
  RunConfig cfg = tiny_config(tmp.path);
  std::ostringstream log;
  cmd_gen(cfg, log);
  const std::string train_a = slurp(cfg.train_path());
  const std::string test_a = slurp(cfg.test_path());
  CHECK(train_a.rfind("# obs-impact dataset v1", 0) == 0);
  CHECK(test_a.find("split=test") != std::string::npos);

  fs::remove_all(cfg.dataset_dir);
  std::ostringstream log2;
  cmd_gen(cfg, log2);
  CHECK(slurp(cfg.train_path()) == train_a);
  CHECK(slurp(cfg.test_path()) == test_a);
}

TEST_CASE("build_samples produces centered, standardized subgraphs") {
  TempDir tmp("samples");
  RunConfig cfg = tiny_config(tmp.path);
  std::ostringstream log;
  cmd_gen(cfg, log);

  const Dataset train = load_dataset(cfg.train_path());
  const Scaler scaler = Scaler::fit(train);
  const auto samples = build_samples(train, scaler, cfg);
  CHECK(samples.size() == static_cast<size_t>(cfg.train_steps * cfg.centers_per_step));
  for (const auto& s : samples) {
    CHECK(s.kinds[0] == NodeKind::NWP);
    CHECK(s.size() >= 1);
    CHECK(s.ahat.rows() == s.size());
    CHECK(s.time_index >= 1);
    CHECK(s.time_index <= cfg.train_steps);
  }
  // standardized labels should be roughly zero-mean over the train split
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& s : samples) mean += s.label / static_cast<double>(samples.size());
  CHECK(mean.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("the full pipeline runs end to end and emits the documented CSVs") {
  TempDir tmp("e2e");
  RunConfig cfg = tiny_config(tmp.path);
  std::ostringstream log;
  cmd_gen(cfg, log);
  cmd_pretrain(cfg, log);
  cmd_train(cfg, false, log);
  const Metrics metrics = cmd_eval(cfg, log);
  CHECK(metrics.per_variable.size() == 4);

  cmd_explain(cfg, log);
  const auto fidelity = cmd_fidelity(cfg, log);
  CHECK(fidelity.size() == 3 * cfg.fractions.size());

  const fs::path out = cfg.out_dir;
  const std::string metrics_csv = slurp(out / "metrics.csv");
  CHECK(metrics_csv.rfind("# seed=5", 0) == 0);
  CHECK(metrics_csv.find("variable,rmse,mae,r2,explained_variance") != std::string::npos);
  CHECK(metrics_csv.find("\nU,") != std::string::npos);
  CHECK(metrics_csv.find("\nQ,") != std::string::npos);

  const std::string impact_csv = slurp(out / "impact_by_type_lrp.csv");
  CHECK(impact_csv.find("kind,mean_impact,mean_impact_norm") != std::string::npos);
  CHECK(impact_csv.find("SONDE,") != std::string::npos);

  const std::string series_csv = slurp(out / "impact_timeseries_lrp.csv");
  CHECK(series_csv.find("time,kind,mean_impact") != std::string::npos);

  const std::string fidelity_csv = slurp(out / "fidelity.csv");
  CHECK(fidelity_csv.find("method,fraction,fidelity_plus,fidelity_minus") != std::string::npos);
  int rows = 0;
  for (const std::string& m : {"sa,", "gradcam,", "lrp,"}) {
    for (size_t pos = fidelity_csv.find("\n" + m); pos != std::string::npos;
         pos = fidelity_csv.find("\n" + m, pos + 1)) {
      ++rows;
    }
  }
  CHECK(rows == 6);

  CHECK(slurp(out / "impact_by_type_lrp.svg").find("<svg") != std::string::npos);
  CHECK(slurp(out / "impact_timeseries_lrp.svg").find("<svg") != std::string::npos);

  SUBCASE("training without the pretrained encoder also works") {
    cmd_train(cfg, true, log);
    const Metrics vanilla = cmd_eval(cfg, log);
    CHECK(vanilla.per_variable.size() == 4);
  }
}

TEST_CASE("csv doubles use a compact, locale-independent format") {
  CHECK(format_csv_double(0.25) == "0.25");
  CHECK(format_csv_double(-1.0) == "-1");
  CHECK(format_csv_double(1e-9) == "1e-09");
}
