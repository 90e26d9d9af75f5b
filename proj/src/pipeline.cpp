#include "obsimpact/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace obsimpact {

namespace fs = std::filesystem;

FieldSpec RunConfig::field_spec() const {
  FieldSpec spec;
  spec.seed = seed;
  spec.region = region;
  spec.n_bumps = n_bumps;
  spec.advection_deg_per_step = advection_deg_per_step;
  spec.grid_spacing_deg = grid_spacing_deg;
  spec.noise_sd = {{Variable::U, noise_u},   {Variable::V, noise_v},
                   {Variable::T, noise_t},   {Variable::Q, noise_q},
                   {Variable::TB, noise_tb}, {Variable::BA, noise_ba}};
  return spec;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.d = d;
  m.n_gcn_layers = n_gcn_layers;
  m.mlp_hidden = mlp_hidden;
  m.k = k;
  m.psi = psi;
  m.lr = lr;
  m.epochs_pretrain = epochs_pretrain;
  m.epochs_finetune = epochs_finetune;
  m.batch_size = batch_size;
  m.seed = seed;
  return m;
}

std::string RunConfig::encoder_path() const {
  return encoder_checkpoint.empty() ? out_dir + "/encoder.ckpt" : encoder_checkpoint;
}

std::string RunConfig::model_path() const {
  return checkpoint.empty() ? out_dir + "/model.ckpt" : checkpoint;
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': cannot parse number '" + value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  return static_cast<int>(v);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::istringstream in(value);
  std::string piece;
  while (std::getline(in, piece, ',')) parts.push_back(trim(piece));
  return parts;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") seed = static_cast<std::uint64_t>(to_double(key, value));
  else if (key == "lat_min") region.lat_min = to_double(key, value);
  else if (key == "lat_max") region.lat_max = to_double(key, value);
  else if (key == "lon_min") region.lon_min = to_double(key, value);
  else if (key == "lon_max") region.lon_max = to_double(key, value);
  else if (key == "n_bumps") n_bumps = to_int(key, value);
  else if (key == "advection") advection_deg_per_step = to_double(key, value);
  else if (key == "grid_spacing_deg") grid_spacing_deg = to_double(key, value);
  else if (key == "noise_u") noise_u = to_double(key, value);
  else if (key == "noise_v") noise_v = to_double(key, value);
  else if (key == "noise_t") noise_t = to_double(key, value);
  else if (key == "noise_q") noise_q = to_double(key, value);
  else if (key == "noise_tb") noise_tb = to_double(key, value);
  else if (key == "noise_ba") noise_ba = to_double(key, value);
  else if (key == "obs_per_kind") obs_per_kind = to_int(key, value);
  else if (key == "train_steps") train_steps = to_int(key, value);
  else if (key == "test_steps") test_steps = to_int(key, value);
  else if (key == "radius_km") radius_km = to_double(key, value);
  else if (key == "centers_per_step") centers_per_step = to_int(key, value);
  else if (key == "d") d = to_int(key, value);
  else if (key == "n_gcn_layers") n_gcn_layers = to_int(key, value);
  else if (key == "mlp_hidden") {
    mlp_hidden.clear();
    for (const std::string& p : split_list(value)) mlp_hidden.push_back(to_int(key, p));
  } else if (key == "k") k = to_int(key, value);
  else if (key == "psi") psi = to_double(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "epochs_pretrain") epochs_pretrain = to_int(key, value);
  else if (key == "epochs_finetune") epochs_finetune = to_int(key, value);
  else if (key == "batch_size") batch_size = to_int(key, value);
  else if (key == "method") method = value;
  else if (key == "fractions") {
    fractions.clear();
    for (const std::string& p : split_list(value)) fractions.push_back(to_double(key, p));
  } else if (key == "dataset_dir") dataset_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "encoder_checkpoint") encoder_checkpoint = value;
  else if (key == "checkpoint") checkpoint = value;
  else throw std::runtime_error("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::vector<SubgraphSample> build_samples(const Dataset& dataset, const Scaler& scaler,
                                          const RunConfig& cfg) {
  std::vector<SubgraphSample> samples;
  for (const TimeStep& step : dataset.steps) {
    const MetGraph graph = build_graph(step.nodes, cfg.radius_km);

    std::vector<int> nwp_ids;
    for (const MetNode& n : step.nodes) {
      if (n.kind == NodeKind::NWP) nwp_ids.push_back(n.id);
    }
    if (cfg.centers_per_step > 0 && static_cast<int>(nwp_ids.size()) > cfg.centers_per_step) {
      std::mt19937_64 rng(cfg.seed * 31ULL + static_cast<std::uint64_t>(step.t));
      std::shuffle(nwp_ids.begin(), nwp_ids.end(), rng);
      nwp_ids.resize(cfg.centers_per_step);
      std::sort(nwp_ids.begin(), nwp_ids.end());
    }

    for (int center : nwp_ids) {
      const ContextSubgraph sub = khop_subgraph(graph, center, cfg.k);
      SubgraphSample s;
      s.node_ids = sub.node_ids;
      s.ahat = normalized_adjacency(sub);
      s.time_index = step.t;
      s.kinds.reserve(sub.node_ids.size());
      s.features.reserve(sub.node_ids.size());
      for (int id : sub.node_ids) {
        const MetNode& node = graph.node_by_id(id);
        s.kinds.push_back(node.kind);
        s.features.push_back(scaler.transform(node.kind, node.attributes));
      }
      s.label_raw = step.labels.at(center);
      s.label = scaler.transform_label(s.label_raw);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

namespace {

std::set<NodeKind> kinds_in(const Dataset& d) {
  std::set<NodeKind> kinds;
  for (const TimeStep& step : d.steps) {
    for (const MetNode& n : step.nodes) kinds.insert(n.kind);
  }
  return kinds;
}

void write_loss_csv(const std::string& path, const TrainLog& log, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# seed=" << seed << "\n";
  out << "epoch,loss\n";
  for (size_t i = 0; i < log.epoch_loss.size(); ++i) {
    out << i << ',' << format_csv_double(log.epoch_loss[i]) << '\n';
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

void cmd_gen(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.dataset_dir);
  const FieldSpec spec = cfg.field_spec();
  std::map<NodeKind, int> counts;
  for (NodeKind kind : observation_kinds()) counts[kind] = cfg.obs_per_kind;

  const Dataset train = generate_dataset(spec, 1, 1 + cfg.train_steps, counts, "train");
  int next_id = 0;
  for (const TimeStep& step : train.steps) {
    for (const MetNode& n : step.nodes) next_id = std::max(next_id, n.id + 1);
  }
  const Dataset test = generate_dataset(spec, 1 + cfg.train_steps,
                                        1 + cfg.train_steps + cfg.test_steps, counts, "test",
                                        next_id);
  save_dataset(train, cfg.train_path());
  save_dataset(test, cfg.test_path());

  size_t train_nodes = 0, test_nodes = 0;
  for (const TimeStep& s : train.steps) train_nodes += s.nodes.size();
  for (const TimeStep& s : test.steps) test_nodes += s.nodes.size();
  size_t edges = 0;
  if (!train.steps.empty()) {
    edges = build_graph(train.steps.front().nodes, cfg.radius_km).edges.size();
  }
  log << "wrote " << cfg.train_path() << " (" << train_nodes << " nodes over "
      << train.steps.size() << " steps)\n";
  log << "wrote " << cfg.test_path() << " (" << test_nodes << " nodes over "
      << test.steps.size() << " steps)\n";
  log << "first train step: " << edges << " edges at radius " << cfg.radius_km << " km\n";
}

void cmd_pretrain(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Dataset train = load_dataset(cfg.train_path());
  const Scaler scaler = Scaler::fit(train);
  const auto samples = build_samples(train, scaler, cfg);
  TrainLog tlog;
  const ModelWeights encoder = pretrain(samples, cfg.model_config(), kinds_in(train), &tlog);
  save_checkpoint(cfg.encoder_path(), encoder, cfg.model_config(), scaler);
  write_loss_csv(cfg.out_dir + "/pretrain_loss.csv", tlog, cfg.seed);
  log << "pretrained on " << samples.size() << " subgraphs";
  if (!tlog.epoch_loss.empty()) {
    log << "; loss " << tlog.epoch_loss.front() << " -> " << tlog.epoch_loss.back();
  }
  log << "\nwrote " << cfg.encoder_path() << "\n";
}

void cmd_train(const RunConfig& cfg, bool no_pretrain, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Dataset train = load_dataset(cfg.train_path());
  const ModelConfig mc = cfg.model_config();

  Scaler scaler;
  ModelWeights encoder;
  if (no_pretrain) {
    scaler = Scaler::fit(train);
    std::mt19937_64 rng(mc.seed);
    encoder = init_model(mc, kinds_in(train), /*with_recon=*/false, rng);
    encoder.mlp.clear();
  } else {
    Checkpoint cp = load_checkpoint(cfg.encoder_path());
    scaler = cp.scaler;
    encoder = std::move(cp.weights);
  }

  const auto samples = build_samples(train, scaler, cfg);
  TrainLog tlog;
  const ModelWeights model = finetune(samples, std::move(encoder), mc, &tlog);
  save_checkpoint(cfg.model_path(), model, mc, scaler);
  write_loss_csv(cfg.out_dir + "/train_loss.csv", tlog, cfg.seed);
  log << (no_pretrain ? "trained vanilla GCN on " : "fine-tuned on ") << samples.size()
      << " subgraphs";
  if (!tlog.epoch_loss.empty()) {
    log << "; loss " << tlog.epoch_loss.front() << " -> " << tlog.epoch_loss.back();
  }
  log << "\nwrote " << cfg.model_path() << "\n";
}

Metrics cmd_eval(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Checkpoint cp = load_checkpoint(cfg.model_path());
  const Dataset test = load_dataset(cfg.test_path());
  const auto samples = build_samples(test, cp.scaler, cfg);

  std::vector<Eigen::Vector4d> preds(samples.size()), labels(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    preds[i] = cp.scaler.inverse_label(predict(cp.weights, samples[i]));
    labels[i] = samples[i].label_raw;
  }
  const Metrics m = compute_metrics(preds, labels);
  write_metrics_csv(cfg.out_dir + "/metrics.csv", m, cfg.seed);
  log << "evaluated " << samples.size() << " test subgraphs; mean R^2 = " << m.mean_r2() << "\n";
  log << "wrote " << cfg.out_dir << "/metrics.csv\n";
  return m;
}

void cmd_explain(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Checkpoint cp = load_checkpoint(cfg.model_path());
  const Dataset test = load_dataset(cfg.test_path());
  const auto samples = build_samples(test, cp.scaler, cfg);
  const ExplanationMethod method = method_from_name(cfg.method);

  const ImpactReport report = build_impact_report(method, cp.weights, samples);
  const std::string kind_csv = cfg.out_dir + "/impact_by_type_" + cfg.method + ".csv";
  const std::string series_csv = cfg.out_dir + "/impact_timeseries_" + cfg.method + ".csv";
  write_impact_csvs(kind_csv, series_csv, report, cfg.seed);
  write_impact_bar_svg(cfg.out_dir + "/impact_by_type_" + cfg.method + ".svg", report);
  write_impact_series_svg(cfg.out_dir + "/impact_timeseries_" + cfg.method + ".svg", report);
  log << "explained " << samples.size() << " subgraphs with " << cfg.method << "\n";
  log << "wrote " << kind_csv << ", " << series_csv << " and SVG charts\n";
}

std::vector<FidelityResult> cmd_fidelity(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Checkpoint cp = load_checkpoint(cfg.model_path());
  const Dataset test = load_dataset(cfg.test_path());
  const auto samples = build_samples(test, cp.scaler, cfg);

  std::vector<FidelityResult> results;
  for (ExplanationMethod method :
       {ExplanationMethod::SA, ExplanationMethod::GradCam, ExplanationMethod::Lrp}) {
    for (double fraction : cfg.fractions) {
      results.push_back(evaluate_fidelity(cp.weights, samples, method, fraction, cp.scaler));
    }
  }
  write_fidelity_csv(cfg.out_dir + "/fidelity.csv", results, cfg.seed);
  log << "wrote " << cfg.out_dir << "/fidelity.csv (" << results.size() << " rows)\n";
  return results;
}

std::string format_csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_metrics_csv(const std::string& path, const Metrics& m, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# seed=" << seed << "\n";
  out << "variable,rmse,mae,r2,explained_variance\n";
  const char* names[] = {"U", "V", "T", "Q"};
  for (int v = 0; v < 4; ++v) {
    const VariableMetrics& vm = m.per_variable[v];
    out << names[v] << ',' << format_csv_double(vm.rmse) << ',' << format_csv_double(vm.mae)
        << ',';
    if (vm.r2_defined) {
      out << format_csv_double(vm.r2) << ',' << format_csv_double(vm.explained_variance);
    } else {
      out << "undefined,undefined";
    }
    out << '\n';
  }
}

void write_impact_csvs(const std::string& kind_path, const std::string& series_path,
                       const ImpactReport& report, std::uint64_t seed) {
  double max_impact = 0.0;
  for (const auto& [kind, v] : report.kind_impact) max_impact = std::max(max_impact, v);
  const double denom = max_impact > 0.0 ? max_impact : 1.0;

  std::ofstream kout(kind_path);
  if (!kout) throw std::runtime_error("cannot open " + kind_path + " for writing");
  kout << "# seed=" << seed << "\n";
  kout << "# method=" << method_name(report.method) << "\n";
  kout << "# " << report.normalization_note << "\n";
  kout << "kind,mean_impact,mean_impact_norm\n";
  for (const auto& [kind, v] : report.kind_impact) {
    kout << kind_name(kind) << ',' << format_csv_double(v) << ','
         << format_csv_double(v / denom) << '\n';
  }

  std::ofstream sout(series_path);
  if (!sout) throw std::runtime_error("cannot open " + series_path + " for writing");
  sout << "# seed=" << seed << "\n";
  sout << "# method=" << method_name(report.method) << "\n";
  sout << "time,kind,mean_impact\n";
  for (const auto& [key, v] : report.time_kind_impact) {
    sout << key.first << ',' << kind_name(key.second) << ',' << format_csv_double(v) << '\n';
  }
}

void write_fidelity_csv(const std::string& path, const std::vector<FidelityResult>& results,
                        std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# seed=" << seed << "\n";
  out << "method,fraction,fidelity_plus,fidelity_minus\n";
  for (const FidelityResult& r : results) {
    out << r.method << ',' << format_csv_double(r.fraction) << ','
        << format_csv_double(r.fidelity_plus) << ',' << format_csv_double(r.fidelity_minus)
        << '\n';
  }
}

}  // namespace obsimpact
