#pragma once

#include "obsimpact/checkpoint.hpp"
#include "obsimpact/explain.hpp"
#include "obsimpact/fidelity.hpp"
#include "obsimpact/model.hpp"
#include "obsimpact/synthdata.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace obsimpact {

/// Everything a run needs: field generator knobs, model knobs, and paths.
/// Parsed from a `key = value` config file; unknown keys are rejected.
struct RunConfig {
  // synthetic data
  std::uint64_t seed = 1;
  Region region = {24.0, 40.0, 106.0, 136.0};  // ~2500 NWP grid nodes at 0.44 deg
  int n_bumps = 6;
  double advection_deg_per_step = 0.3;
  double grid_spacing_deg = 0.44;
  double noise_u = 0.5, noise_v = 0.5, noise_t = 0.5;
  double noise_q = 2e-4, noise_tb = 0.5, noise_ba = 1e-3;
  int obs_per_kind = 20;
  int train_steps = 40;
  int test_steps = 40;

  // graph / sampling
  double radius_km = kDefaultRadiusKm;
  int centers_per_step = 50;  // NWP centers sampled per time step

  // model
  int d = 32;
  int n_gcn_layers = 2;
  std::vector<int> mlp_hidden = {32};
  int k = 2;
  double psi = 1e-4;
  double lr = 1e-3;
  int epochs_pretrain = 40;
  int epochs_finetune = 3;
  int batch_size = 32;

  // explanation / fidelity
  std::string method = "lrp";
  std::vector<double> fractions = {0.1, 0.2};

  // paths
  std::string dataset_dir = "data";
  std::string out_dir = "out";
  std::string encoder_checkpoint;  // defaults to <out_dir>/encoder.ckpt
  std::string checkpoint;          // defaults to <out_dir>/model.ckpt

  FieldSpec field_spec() const;
  ModelConfig model_config() const;
  std::string encoder_path() const;
  std::string model_path() const;
  std::string train_path() const { return dataset_dir + "/train.csv"; }
  std::string test_path() const { return dataset_dir + "/test.csv"; }

  /// Throws std::runtime_error on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
};

RunConfig parse_run_config(const std::string& path);

/// Builds one SubgraphSample per sampled NWP center per time step:
/// 50 km graph, k-hop subgraph, standardized features and labels.
std::vector<SubgraphSample> build_samples(const Dataset& dataset, const Scaler& scaler,
                                          const RunConfig& cfg);

// Subcommand bodies. Each writes its outputs under cfg.out_dir (and the
// dataset dir for gen) and logs a short summary to `log`.
void cmd_gen(const RunConfig& cfg, std::ostream& log);
void cmd_pretrain(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, bool no_pretrain, std::ostream& log);
Metrics cmd_eval(const RunConfig& cfg, std::ostream& log);
void cmd_explain(const RunConfig& cfg, std::ostream& log);
std::vector<FidelityResult> cmd_fidelity(const RunConfig& cfg, std::ostream& log);

// CSV / SVG emission (also used by the acceptance suite).
std::string format_csv_double(double v);
void write_metrics_csv(const std::string& path, const Metrics& m, std::uint64_t seed);
void write_impact_csvs(const std::string& kind_path, const std::string& series_path,
                       const ImpactReport& report, std::uint64_t seed);
void write_fidelity_csv(const std::string& path, const std::vector<FidelityResult>& results,
                        std::uint64_t seed);
void write_impact_bar_svg(const std::string& path, const ImpactReport& report);
void write_impact_series_svg(const std::string& path, const ImpactReport& report);

}  // namespace obsimpact
