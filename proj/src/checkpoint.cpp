#include "obsimpact/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace obsimpact {

namespace {

constexpr char kMagic[5] = {'O', 'B', 'S', 'W', '1'};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return v;
}

double read_f64(std::istream& in, const std::string& path) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  write_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  const RowMajor rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelWeights& weights,
                     const ModelConfig& config, const Scaler& scaler) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));

  write_u64(out, static_cast<std::uint64_t>(config.d));
  write_u64(out, static_cast<std::uint64_t>(config.n_gcn_layers));
  write_u64(out, config.mlp_hidden.size());
  for (int h : config.mlp_hidden) write_u64(out, static_cast<std::uint64_t>(h));
  write_u64(out, static_cast<std::uint64_t>(config.k));
  write_f64(out, config.psi);
  write_f64(out, config.lr);
  write_u64(out, static_cast<std::uint64_t>(config.epochs_pretrain));
  write_u64(out, static_cast<std::uint64_t>(config.epochs_finetune));
  write_u64(out, static_cast<std::uint64_t>(config.batch_size));
  write_u64(out, config.seed);

  auto refs = tensor_refs(const_cast<ModelWeights&>(weights));
  std::uint64_t count = refs.size() + 2 * scaler.attr_mean.size() + 2;
  write_u64(out, count);
  for (const TensorRef& r : refs) write_tensor(out, r.name, r.map());
  for (const auto& [kind, mean] : scaler.attr_mean) {
    write_tensor(out, "scaler/" + kind_name(kind) + "/mean", mean);
    write_tensor(out, "scaler/" + kind_name(kind) + "/sd", scaler.attr_sd.at(kind));
  }
  write_tensor(out, "scaler/label/mean", scaler.label_mean);
  write_tensor(out, "scaler/label/sd", scaler.label_sd);
  if (!out) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  char magic[5];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not an OBSW1 checkpoint");
  }

  Checkpoint cp;
  ModelConfig& cfg = cp.config;
  cfg.d = static_cast<int>(read_u64(in, path));
  cfg.n_gcn_layers = static_cast<int>(read_u64(in, path));
  const std::uint64_t n_hidden = read_u64(in, path);
  cfg.mlp_hidden.clear();
  for (std::uint64_t i = 0; i < n_hidden; ++i) {
    cfg.mlp_hidden.push_back(static_cast<int>(read_u64(in, path)));
  }
  cfg.k = static_cast<int>(read_u64(in, path));
  cfg.psi = read_f64(in, path);
  cfg.lr = read_f64(in, path);
  cfg.epochs_pretrain = static_cast<int>(read_u64(in, path));
  cfg.epochs_finetune = static_cast<int>(read_u64(in, path));
  cfg.batch_size = static_cast<int>(read_u64(in, path));
  cfg.seed = read_u64(in, path);
  cfg.validate();

  const std::uint64_t count = read_u64(in, path);
  std::map<std::string, Eigen::MatrixXd> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = read_u64(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw std::runtime_error(path + ": truncated tensor name");
    }
    const std::uint64_t rows = read_u64(in, path);
    const std::uint64_t cols = read_u64(in, path);
    RowMajor rm(rows, cols);
    if (!in.read(reinterpret_cast<char*>(rm.data()),
                 static_cast<std::streamsize>(sizeof(double) * rows * cols))) {
      throw std::runtime_error(path + ": truncated tensor data for " + name);
    }
    tensors[name] = rm;
  }

  // Rebuild the weight structure from the config and the tensor names.
  std::set<NodeKind> kinds;
  bool has_recon = false;
  bool has_mlp = false;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("proj/", 0) == 0) {
      kinds.insert(kind_from_name(name.substr(5, name.find('/', 5) - 5)));
    }
    if (name.rfind("recon/", 0) == 0) has_recon = true;
    if (name.rfind("mlp/", 0) == 0) has_mlp = true;
  }
  if (kinds.empty()) throw std::runtime_error(path + ": checkpoint has no projection tensors");
  std::mt19937_64 rng(0);
  cp.weights = init_model(cfg, kinds, has_recon, rng);
  if (!has_mlp) cp.weights.mlp.clear();  // encoder-only checkpoint from pretraining
  for (const TensorRef& r : tensor_refs(cp.weights)) {
    auto it = tensors.find(r.name);
    if (it == tensors.end()) throw std::runtime_error(path + ": missing tensor " + r.name);
    if (it->second.rows() != r.rows || it->second.cols() != r.cols) {
      throw std::runtime_error(path + ": shape mismatch for " + r.name);
    }
    r.map() = it->second;
  }

  for (NodeKind kind : kinds) {
    const std::string base = "scaler/" + kind_name(kind);
    auto mit = tensors.find(base + "/mean");
    auto sit = tensors.find(base + "/sd");
    if (mit == tensors.end() || sit == tensors.end()) {
      throw std::runtime_error(path + ": missing scaler tensors for " + kind_name(kind));
    }
    cp.scaler.attr_mean[kind] = mit->second;
    cp.scaler.attr_sd[kind] = sit->second;
  }
  if (!tensors.count("scaler/label/mean") || !tensors.count("scaler/label/sd")) {
    throw std::runtime_error(path + ": missing label scaler tensors");
  }
  cp.scaler.label_mean = tensors.at("scaler/label/mean");
  cp.scaler.label_sd = tensors.at("scaler/label/sd");
  return cp;
}

}  // namespace obsimpact
