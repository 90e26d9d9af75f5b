#include "obsimpact/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace obsimpact {

namespace {

Eigen::MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
  }
  return m;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

// Subgradient at 0 is 0.
inline Eigen::ArrayXXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>();
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1) throw std::invalid_argument("embedding dim must be >= 1");
  if (n_gcn_layers < 1) throw std::invalid_argument("need at least one GCN layer");
  if (psi < 0) throw std::invalid_argument("psi must be >= 0");
  if (lr <= 0) throw std::invalid_argument("learning rate must be positive");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  for (int h : mlp_hidden) {
    if (h < 1) throw std::invalid_argument("mlp hidden width must be >= 1");
  }
}

std::vector<TensorRef> tensor_refs(ModelWeights& w) {
  std::vector<TensorRef> refs;
  auto add = [&](const std::string& name, Eigen::MatrixXd& m, bool reg) {
    refs.push_back({name, m.data(), static_cast<int>(m.rows()), static_cast<int>(m.cols()), reg});
  };
  auto add_vec = [&](const std::string& name, Eigen::VectorXd& v) {
    refs.push_back({name, v.data(), static_cast<int>(v.size()), 1, false});
  };
  for (auto& [kind, lin] : w.proj) {
    add("proj/" + kind_name(kind) + "/W", lin.W, true);
    add_vec("proj/" + kind_name(kind) + "/b", lin.b);
  }
  for (size_t l = 0; l < w.gcn.size(); ++l) {
    add("gcn/" + std::to_string(l) + "/W", w.gcn[l], true);
  }
  for (auto& [kind, lin] : w.recon) {
    add("recon/" + kind_name(kind) + "/W", lin.W, true);
    add_vec("recon/" + kind_name(kind) + "/b", lin.b);
  }
  for (size_t l = 0; l < w.mlp.size(); ++l) {
    add("mlp/" + std::to_string(l) + "/W", w.mlp[l].W, true);
    add_vec("mlp/" + std::to_string(l) + "/b", w.mlp[l].b);
  }
  return refs;
}

ModelWeights init_model(const ModelConfig& cfg, const std::set<NodeKind>& kinds,
                        bool with_recon, std::mt19937_64& rng) {
  cfg.validate();
  ModelWeights w;
  for (NodeKind kind : kinds) {
    const int nv = attribute_count(kind);
    w.proj[kind] = {glorot(cfg.d, nv, rng), Eigen::VectorXd::Zero(cfg.d)};
  }
  for (int l = 0; l < cfg.n_gcn_layers; ++l) {
    w.gcn.push_back(glorot(cfg.d, cfg.d, rng));
  }
  if (with_recon) {
    for (NodeKind kind : kinds) {
      const int nv = attribute_count(kind);
      w.recon[kind] = {glorot(nv, cfg.d, rng), Eigen::VectorXd::Zero(nv)};
    }
  }
  int in = cfg.d;
  for (int h : cfg.mlp_hidden) {
    w.mlp.push_back({glorot(h, in, rng), Eigen::VectorXd::Zero(h)});
    in = h;
  }
  w.mlp.push_back({glorot(kNumOutputVariables, in, rng),
                   Eigen::VectorXd::Zero(kNumOutputVariables)});
  return w;
}

Eigen::VectorXd project(const ModelWeights& w, NodeKind kind, const Eigen::VectorXd& attrs) {
  auto it = w.proj.find(kind);
  if (it == w.proj.end()) {
    throw std::invalid_argument("no projection for kind " + kind_name(kind));
  }
  if (it->second.W.cols() != attrs.size()) {
    throw std::invalid_argument("projection shape mismatch for " + kind_name(kind));
  }
  return it->second.W * attrs + it->second.b;
}

ForwardTrace gcn_forward(const SubgraphSample& s, const ModelWeights& w) {
  ForwardTrace trace;
  const int n = s.size();
  const int d = static_cast<int>(w.gcn.front().rows());
  trace.h0.resize(n, d);
  for (int i = 0; i < n; ++i) {
    trace.h0.row(i) = project(w, s.kinds[i], s.features[i]).transpose();
  }
  trace.ahat = s.ahat;
  const Eigen::MatrixXd* h = &trace.h0;
  for (const Eigen::MatrixXd& weight : w.gcn) {
    trace.pre.push_back(trace.ahat * (*h) * weight);
    trace.act.push_back(relu(trace.pre.back()));
    h = &trace.act.back();
  }
  return trace;
}

Eigen::Vector4d pool_and_head(ForwardTrace& trace, const ModelWeights& w) {
  trace.pooled = trace.final_h().colwise().mean().transpose();
  Eigen::VectorXd z = trace.pooled;
  trace.mlp_pre.clear();
  trace.mlp_act.clear();
  for (size_t i = 0; i + 1 < w.mlp.size(); ++i) {
    trace.mlp_pre.push_back(w.mlp[i].W * z + w.mlp[i].b);
    trace.mlp_act.push_back(trace.mlp_pre.back().cwiseMax(0.0));
    z = trace.mlp_act.back();
  }
  trace.output = w.mlp.back().W * z + w.mlp.back().b;
  return trace.output;
}

ForwardTrace forward(const SubgraphSample& s, const ModelWeights& w) {
  ForwardTrace trace = gcn_forward(s, w);
  pool_and_head(trace, w);
  return trace;
}

Eigen::Vector4d predict(const ModelWeights& w, const SubgraphSample& s) {
  ForwardTrace trace = gcn_forward(s, w);
  return pool_and_head(trace, w);
}

double weight_norm_sq(const ModelWeights& w) {
  double sum = 0.0;
  auto refs = tensor_refs(const_cast<ModelWeights&>(w));
  for (const TensorRef& r : refs) {
    if (r.regularized) sum += r.map().squaredNorm();
  }
  return sum;
}

double regression_error(const Eigen::Vector4d& pred, const Eigen::Vector4d& truth) {
  return (pred - truth).squaredNorm() / kNumOutputVariables;
}

double loss_reg_batch(const std::vector<const SubgraphSample*>& batch, const ModelWeights& w,
                      double psi) {
  double loss = 0.0;
  for (const SubgraphSample* s : batch) {
    loss += regression_error(predict(w, *s), s->label);
  }
  loss /= static_cast<double>(batch.size());
  return loss + psi * weight_norm_sq(w);
}

namespace {

// Reconstruction error sum and scalar count for one subgraph.
std::pair<double, long> recon_error(const SubgraphSample& s, const ForwardTrace& trace,
                                    const ModelWeights& w) {
  double err = 0.0;
  long count = 0;
  const Eigen::MatrixXd& hn = trace.final_h();
  for (int i = 0; i < s.size(); ++i) {
    const Linear& head = w.recon.at(s.kinds[i]);
    const Eigen::VectorXd rec = head.W * hn.row(i).transpose() + head.b;
    err += (rec - s.features[i]).squaredNorm();
    count += rec.size();
  }
  return {err, count};
}

}  // namespace

double loss_ssl_batch(const std::vector<const SubgraphSample*>& batch, const ModelWeights& w,
                      double psi) {
  if (!w.has_recon()) throw std::logic_error("loss_ssl requires reconstruction heads");
  double err = 0.0;
  long count = 0;
  for (const SubgraphSample* s : batch) {
    ForwardTrace trace = gcn_forward(*s, w);
    auto [e, c] = recon_error(*s, trace, w);
    err += e;
    count += c;
  }
  return err / static_cast<double>(count) + psi * weight_norm_sq(w);
}

namespace {

// Backprop from d(loss)/dH^(n) through GCN layers and the projection,
// accumulating weight gradients. Optionally records d(loss)/dH^(l).
void backprop_encoder(const SubgraphSample& s, const ForwardTrace& trace, const ModelWeights& w,
                      Eigen::MatrixXd dh, ModelWeights& grad,
                      std::vector<Eigen::MatrixXd>* dh_out) {
  const int n_layers = static_cast<int>(w.gcn.size());
  if (dh_out) {
    dh_out->assign(n_layers + 1, Eigen::MatrixXd());
    (*dh_out)[n_layers] = dh;
  }
  for (int l = n_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& h_in = (l == 0) ? trace.h0 : trace.act[l - 1];
    const Eigen::MatrixXd g = dh.array() * relu_mask(trace.pre[l]);
    grad.gcn[l] += (trace.ahat * h_in).transpose() * g;
    dh = trace.ahat * g * w.gcn[l].transpose();
    if (dh_out) (*dh_out)[l] = dh;
  }
  for (int i = 0; i < s.size(); ++i) {
    Linear& pg = grad.proj.at(s.kinds[i]);
    pg.W += dh.row(i).transpose() * s.features[i].transpose();
    pg.b += dh.row(i).transpose();
  }
}

// Backprop a gradient w.r.t. the output vector through the MLP head and mean
// pooling; returns d/dH^(n) and accumulates MLP gradients when grad != null.
Eigen::MatrixXd backprop_head(const ForwardTrace& trace, const ModelWeights& w,
                              Eigen::VectorXd dz, ModelWeights* grad) {
  const size_t n_mlp = w.mlp.size();
  for (size_t li = n_mlp; li-- > 0;) {
    const Eigen::VectorXd& input =
        (li == 0) ? trace.pooled : trace.mlp_act[li - 1];
    if (li + 1 < n_mlp) {
      dz = dz.array() * (trace.mlp_pre[li].array() > 0.0).cast<double>();
    }
    if (grad) {
      grad->mlp[li].W += dz * input.transpose();
      grad->mlp[li].b += dz;
    }
    dz = w.mlp[li].W.transpose() * dz;
  }
  // Mean pooling spreads the gradient uniformly over nodes.
  const int n = static_cast<int>(trace.final_h().rows());
  return Eigen::VectorXd::Constant(n, 1.0 / n) * dz.transpose();
}

}  // namespace

void backward_reg(const SubgraphSample& s, const ForwardTrace& trace, const ModelWeights& w,
                  double scale, ModelWeights& grad, std::vector<Eigen::MatrixXd>* dh_out) {
  if (trace.pooled.size() == 0) throw std::invalid_argument("trace is missing the head pass");
  const Eigen::VectorXd dz =
      scale * (2.0 / kNumOutputVariables) * (trace.output - s.label);
  const Eigen::MatrixXd dhn = backprop_head(trace, w, dz, &grad);
  backprop_encoder(s, trace, w, dhn, grad, dh_out);
}

void backward_ssl(const SubgraphSample& s, const ForwardTrace& trace, const ModelWeights& w,
                  double denom, ModelWeights& grad) {
  const Eigen::MatrixXd& hn = trace.final_h();
  Eigen::MatrixXd dhn = Eigen::MatrixXd::Zero(hn.rows(), hn.cols());
  for (int i = 0; i < s.size(); ++i) {
    const Linear& head = w.recon.at(s.kinds[i]);
    const Eigen::VectorXd rec = head.W * hn.row(i).transpose() + head.b;
    const Eigen::VectorXd dr = (2.0 / denom) * (rec - s.features[i]);
    Linear& rg = grad.recon.at(s.kinds[i]);
    rg.W += dr * hn.row(i);
    rg.b += dr;
    dhn.row(i) += (head.W.transpose() * dr).transpose();
  }
  backprop_encoder(s, trace, w, dhn, grad, nullptr);
}

void accumulate_weight_decay(const ModelWeights& w, double psi, ModelWeights& grad) {
  if (psi == 0.0) return;
  auto wr = tensor_refs(const_cast<ModelWeights&>(w));
  auto gr = tensor_refs(grad);
  for (size_t i = 0; i < wr.size(); ++i) {
    if (wr[i].regularized) gr[i].map() += 2.0 * psi * wr[i].map();
  }
}

Eigen::MatrixXd head_jacobian(const ForwardTrace& trace, const ModelWeights& w) {
  Eigen::MatrixXd jac = w.mlp.back().W;
  for (size_t li = w.mlp.size() - 1; li-- > 0;) {
    jac = jac * (trace.mlp_pre[li].array() > 0.0).cast<double>().matrix().asDiagonal();
    jac = jac * w.mlp[li].W;
  }
  return jac;  // 4 x d
}

std::array<Eigen::MatrixXd, 4> output_grads_final_layer(const ForwardTrace& trace,
                                                        const ModelWeights& w) {
  const Eigen::MatrixXd jac = head_jacobian(trace, w);
  const int n = static_cast<int>(trace.final_h().rows());
  std::array<Eigen::MatrixXd, 4> out;
  for (int v = 0; v < 4; ++v) {
    out[v] = Eigen::VectorXd::Constant(n, 1.0 / n) * jac.row(v);
  }
  return out;
}

std::vector<Eigen::MatrixXd> output_grads_all_layers(const ForwardTrace& trace,
                                                     const ModelWeights& w, int variable) {
  const Eigen::MatrixXd jac = head_jacobian(trace, w);
  const int n = static_cast<int>(trace.final_h().rows());
  const int n_layers = static_cast<int>(w.gcn.size());
  std::vector<Eigen::MatrixXd> grads(n_layers + 1);
  grads[n_layers] = Eigen::VectorXd::Constant(n, 1.0 / n) * jac.row(variable);
  for (int l = n_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd g = grads[l + 1].array() * relu_mask(trace.pre[l]);
    grads[l] = trace.ahat * g * w.gcn[l].transpose();
  }
  return grads;
}

ModelWeights zeros_like(const ModelWeights& w) {
  ModelWeights z = w;
  for (TensorRef& r : tensor_refs(z)) r.map().setZero();
  return z;
}

AdamOptimizer::AdamOptimizer(const ModelWeights& shape, double lr, double beta1, double beta2,
                             double eps)
    : m_(zeros_like(shape)), v_(zeros_like(shape)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {}

void AdamOptimizer::step(ModelWeights& w, ModelWeights& grad) {
  ++t_;
  auto wr = tensor_refs(w);
  auto gr = tensor_refs(grad);
  auto mr = tensor_refs(m_);
  auto vr = tensor_refs(v_);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < wr.size(); ++i) {
    auto g = gr[i].map();
    auto m = mr[i].map();
    auto v = vr[i].map();
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * g.array().square().matrix();
    const Eigen::ArrayXXd mhat = m.array() / bc1;
    const Eigen::ArrayXXd vhat = v.array() / bc2;
    wr[i].map().array() -= lr_ * mhat / (vhat.sqrt() + eps_);
  }
}

namespace {

std::vector<std::vector<int>> make_batches(size_t n, int batch_size, std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + start,
                         order.begin() + std::min(n, start + batch_size));
  }
  return batches;
}

[[noreturn]] void abort_nan(const char* phase, int epoch, double loss) {
  throw std::runtime_error(std::string(phase) + ": non-finite loss " + std::to_string(loss) +
                           " at epoch " + std::to_string(epoch) +
                           "; try a smaller learning rate");
}

}  // namespace

ModelWeights pretrain(const std::vector<SubgraphSample>& samples, const ModelConfig& cfg,
                      const std::set<NodeKind>& kinds, TrainLog* log) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("pretrain: empty train split");
  std::mt19937_64 rng(cfg.seed);
  ModelWeights w = init_model(cfg, kinds, /*with_recon=*/true, rng);
  w.mlp.clear();  // no prediction head during pretraining
  AdamOptimizer opt(w, cfg.lr);

  for (int epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
    double epoch_err = 0.0;
    long epoch_count = 0;
    for (const auto& batch : make_batches(samples.size(), cfg.batch_size, rng)) {
      ModelWeights grad = zeros_like(w);
      // Two passes: the SSL loss normalizes by the batch-wide attribute count.
      double batch_err = 0.0;
      long batch_count = 0;
      std::vector<ForwardTrace> traces;
      traces.reserve(batch.size());
      for (int idx : batch) {
        traces.push_back(gcn_forward(samples[idx], w));
        auto [e, c] = recon_error(samples[idx], traces.back(), w);
        batch_err += e;
        batch_count += c;
      }
      for (size_t bi = 0; bi < batch.size(); ++bi) {
        backward_ssl(samples[batch[bi]], traces[bi], w,
                     static_cast<double>(batch_count), grad);
      }
      accumulate_weight_decay(w, cfg.psi, grad);
      const double loss = batch_err / static_cast<double>(batch_count) +
                          cfg.psi * weight_norm_sq(w);
      if (!std::isfinite(loss)) abort_nan("pretrain", epoch, loss);
      opt.step(w, grad);
      epoch_err += batch_err;
      epoch_count += batch_count;
    }
    if (log) {
      log->epoch_loss.push_back(epoch_err / static_cast<double>(epoch_count) +
                                cfg.psi * weight_norm_sq(w));
    }
  }
  w.recon.clear();
  w.mlp.clear();
  return w;
}

ModelWeights finetune(const std::vector<SubgraphSample>& samples, ModelWeights encoder,
                      const ModelConfig& cfg, TrainLog* log) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("finetune: empty train split");
  if (encoder.gcn.size() != static_cast<size_t>(cfg.n_gcn_layers) ||
      encoder.gcn.front().rows() != cfg.d) {
    throw std::invalid_argument("encoder shapes do not match config");
  }

  // Fresh prediction head; the head draws from a stream decoupled from the
  // encoder init so pretrained and vanilla runs start from the same head.
  std::mt19937_64 head_rng(cfg.seed * 7919ULL + 17ULL);
  ModelWeights w = std::move(encoder);
  w.recon.clear();
  w.mlp.clear();
  int in = cfg.d;
  for (int h : cfg.mlp_hidden) {
    w.mlp.push_back({glorot(h, in, head_rng), Eigen::VectorXd::Zero(h)});
    in = h;
  }
  w.mlp.push_back({glorot(kNumOutputVariables, in, head_rng),
                   Eigen::VectorXd::Zero(kNumOutputVariables)});

  AdamOptimizer opt(w, cfg.lr);
  std::mt19937_64 rng(cfg.seed * 9973ULL + 3ULL);
  for (int epoch = 0; epoch < cfg.epochs_finetune; ++epoch) {
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (const auto& batch : make_batches(samples.size(), cfg.batch_size, rng)) {
      ModelWeights grad = zeros_like(w);
      double batch_err = 0.0;
      for (int idx : batch) {
        ForwardTrace trace = forward(samples[idx], w);
        batch_err += regression_error(trace.output, samples[idx].label);
        backward_reg(samples[idx], trace, w, 1.0 / static_cast<double>(batch.size()), grad);
      }
      accumulate_weight_decay(w, cfg.psi, grad);
      const double loss =
          batch_err / static_cast<double>(batch.size()) + cfg.psi * weight_norm_sq(w);
      if (!std::isfinite(loss)) abort_nan("finetune", epoch, loss);
      opt.step(w, grad);
      epoch_loss += loss;
      ++batches;
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return w;
}

}  // namespace obsimpact
