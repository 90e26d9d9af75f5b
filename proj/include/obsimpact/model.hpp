#pragma once

#include "obsimpact/geo.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace obsimpact {

struct ModelConfig {
  int d = 32;                       // embedding dimension
  int n_gcn_layers = 2;
  std::vector<int> mlp_hidden = {32};
  int k = 2;                        // hops per context subgraph
  double psi = 1e-4;                // L2 regularization weight
  double lr = 1e-3;
  int epochs_pretrain = 40;
  int epochs_finetune = 3;
  int batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Linear {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct ModelWeights {
  std::map<NodeKind, Linear> proj;   // |vars(kind)| -> d
  std::vector<Eigen::MatrixXd> gcn;  // d x d, no bias
  std::map<NodeKind, Linear> recon;  // d -> |vars(kind)|, pretraining only
  std::vector<Linear> mlp;           // hidden layers then a linear d->4 output

  bool has_recon() const { return !recon.empty(); }
};

/// Named references to every tensor, in a deterministic order. Biases are
/// exposed as n x 1 blocks via Eigen maps over the same storage.
struct TensorRef {
  std::string name;
  double* data;
  int rows;
  int cols;
  bool regularized;  // true for weight matrices, false for biases

  Eigen::Map<Eigen::MatrixXd> map() const { return {data, rows, cols}; }
};
std::vector<TensorRef> tensor_refs(ModelWeights& w);

ModelWeights init_model(const ModelConfig& cfg, const std::set<NodeKind>& kinds,
                        bool with_recon, std::mt19937_64& rng);

/// One training / explanation unit: a context subgraph with standardized
/// per-node features and the center node's label.
struct SubgraphSample {
  std::vector<int> node_ids;                 // center first
  std::vector<NodeKind> kinds;
  std::vector<Eigen::VectorXd> features;     // standardized attributes
  Eigen::MatrixXd ahat;                      // normalized adjacency
  Eigen::Vector4d label = Eigen::Vector4d::Zero();      // standardized
  Eigen::Vector4d label_raw = Eigen::Vector4d::Zero();
  int time_index = 0;

  int size() const { return static_cast<int>(node_ids.size()); }
};

struct ForwardTrace {
  Eigen::MatrixXd h0;                 // projected inputs, |V| x d
  std::vector<Eigen::MatrixXd> pre;   // GCN pre-activations
  std::vector<Eigen::MatrixXd> act;   // GCN activations H^(1..n)
  Eigen::MatrixXd ahat;
  Eigen::VectorXd pooled;
  std::vector<Eigen::VectorXd> mlp_pre;   // hidden pre-activations
  std::vector<Eigen::VectorXd> mlp_act;   // hidden activations
  Eigen::Vector4d output = Eigen::Vector4d::Zero();

  const Eigen::MatrixXd& final_h() const { return act.empty() ? h0 : act.back(); }
};

Eigen::VectorXd project(const ModelWeights& w, NodeKind kind, const Eigen::VectorXd& attrs);

/// Runs projection + GCN layers; fills h0/pre/act/ahat.
ForwardTrace gcn_forward(const SubgraphSample& s, const ModelWeights& w);

/// Mean-pools the final node representations and applies the MLP head.
Eigen::Vector4d pool_and_head(ForwardTrace& trace, const ModelWeights& w);

/// Full forward pass (projection, GCN, pooling, head).
ForwardTrace forward(const SubgraphSample& s, const ModelWeights& w);

Eigen::Vector4d predict(const ModelWeights& w, const SubgraphSample& s);

/// Sum of squared entries of regularized tensors (weight matrices, not biases).
double weight_norm_sq(const ModelWeights& w);

/// L_reg for one subgraph, psi = 0: mean squared residual over the 4 outputs.
double regression_error(const Eigen::Vector4d& pred, const Eigen::Vector4d& truth);

double loss_reg_batch(const std::vector<const SubgraphSample*>& batch, const ModelWeights& w,
                      double psi);
double loss_ssl_batch(const std::vector<const SubgraphSample*>& batch, const ModelWeights& w,
                      double psi);

/// Accumulates gradients of regression_error (already scaled by `scale`) into
/// `grad`, which must have the same shape as `w`. Also returns d(error)/dH^(l)
/// for l = n..0 when `dh_out` is non-null.
void backward_reg(const SubgraphSample& s, const ForwardTrace& trace, const ModelWeights& w,
                  double scale, ModelWeights& grad,
                  std::vector<Eigen::MatrixXd>* dh_out = nullptr);

/// Gradients of the per-subgraph reconstruction error sum (divided by `denom`,
/// the batch-wide scalar count) for the self-supervised loss.
void backward_ssl(const SubgraphSample& s, const ForwardTrace& trace, const ModelWeights& w,
                  double denom, ModelWeights& grad);

/// Adds psi * 2 * W to every regularized tensor's gradient.
void accumulate_weight_decay(const ModelWeights& w, double psi, ModelWeights& grad);

/// Jacobian dZ/dpooled of the MLP head, 4 x d.
Eigen::MatrixXd head_jacobian(const ForwardTrace& trace, const ModelWeights& w);

/// dZ_v/dH^(n) for each output variable v; each entry is |V| x d.
std::array<Eigen::MatrixXd, 4> output_grads_final_layer(const ForwardTrace& trace,
                                                        const ModelWeights& w);

/// dZ_v/dH^(l) for l = n down to 0 for one output variable.
std::vector<Eigen::MatrixXd> output_grads_all_layers(const ForwardTrace& trace,
                                                     const ModelWeights& w, int variable);

ModelWeights zeros_like(const ModelWeights& w);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelWeights& shape, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(ModelWeights& w, ModelWeights& grad);

 private:
  ModelWeights m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Minimizes L_ssl; returns the encoder (projection + GCN) with the
/// reconstruction heads discarded. Deterministic given cfg.seed.
ModelWeights pretrain(const std::vector<SubgraphSample>& samples, const ModelConfig& cfg,
                      const std::set<NodeKind>& kinds, TrainLog* log = nullptr);

/// Continues training encoder + a fresh MLP head on L_reg. Pass an encoder
/// from init_model for the vanilla-GCN ablation.
ModelWeights finetune(const std::vector<SubgraphSample>& samples, ModelWeights encoder,
                      const ModelConfig& cfg, TrainLog* log = nullptr);

}  // namespace obsimpact
