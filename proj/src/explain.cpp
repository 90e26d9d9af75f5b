#include "obsimpact/explain.hpp"

#include "obsimpact/parallel.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace obsimpact {

std::string method_name(ExplanationMethod m) {
  switch (m) {
    case ExplanationMethod::SA: return "sa";
    case ExplanationMethod::GradCam: return "gradcam";
    case ExplanationMethod::Lrp: return "lrp";
  }
  throw std::logic_error("unknown ExplanationMethod");
}

ExplanationMethod method_from_name(const std::string& name) {
  if (name == "sa") return ExplanationMethod::SA;
  if (name == "gradcam") return ExplanationMethod::GradCam;
  if (name == "lrp") return ExplanationMethod::Lrp;
  throw std::invalid_argument("unknown explanation method '" + name + "'");
}

Eigen::VectorXd saliency_sa(const ModelWeights& w, const SubgraphSample& s) {
  ForwardTrace trace = forward(s, w);
  const auto grads = output_grads_final_layer(trace, w);
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(s.size());
  for (const Eigen::MatrixXd& g : grads) {
    scores += g.cwiseMax(0.0).rowwise().mean();
  }
  return scores;
}

Eigen::VectorXd gradcam(const ModelWeights& w, const SubgraphSample& s) {
  ForwardTrace trace = forward(s, w);
  const auto grads = output_grads_final_layer(trace, w);
  const Eigen::MatrixXd& hn = trace.final_h();
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(s.size());
  for (const Eigen::MatrixXd& g : grads) {
    const Eigen::VectorXd alpha = g.colwise().mean().transpose();  // one weight per channel
    scores += (hn * alpha).cwiseMax(0.0);
  }
  return scores;
}

namespace {

inline double stabilize(double x, double eps) { return x + (x >= 0.0 ? eps : -eps); }

Eigen::MatrixXd stabilized_inverse(const Eigen::MatrixXd& m, double eps) {
  return m.unaryExpr([eps](double x) { return 1.0 / stabilize(x, eps); });
}

}  // namespace

LrpResult lrp(const ModelWeights& w, const SubgraphSample& s, double epsilon) {
  ForwardTrace trace = forward(s, w);
  const int n = s.size();
  const int n_layers = static_cast<int>(w.gcn.size());

  LrpResult result;
  result.node_variable_relevance = Eigen::MatrixXd::Zero(n, kNumOutputVariables);

  for (int v = 0; v < kNumOutputVariables; ++v) {
    // Relevance starts at the output neuron of variable v.
    Eigen::VectorXd rel = Eigen::VectorXd::Zero(kNumOutputVariables);
    rel(v) = trace.output(v);

    // MLP head, epsilon rule on each linear layer.
    for (size_t li = w.mlp.size(); li-- > 0;) {
      const Eigen::VectorXd& input = (li == 0) ? trace.pooled : trace.mlp_act[li - 1];
      const Eigen::VectorXd& pre =
          (li + 1 == w.mlp.size()) ? Eigen::VectorXd(trace.output) : trace.mlp_pre[li];
      Eigen::VectorXd t(pre.size());
      for (int b = 0; b < pre.size(); ++b) t(b) = rel(b) / stabilize(pre(b), epsilon);
      rel = input.cwiseProduct(w.mlp[li].W.transpose() * t);
    }

    // Mean pooling: split equally across nodes.
    Eigen::MatrixXd rel_nodes =
        Eigen::VectorXd::Constant(n, 1.0 / n) * rel.transpose();  // n x d

    // GCN layers: the effective linear map is Ahat * X * W; the denominator
    // is the cached pre-activation.
    for (int l = n_layers - 1; l >= 0; --l) {
      const Eigen::MatrixXd& x = (l == 0) ? trace.h0 : trace.act[l - 1];
      const Eigen::MatrixXd t = rel_nodes.cwiseProduct(stabilized_inverse(trace.pre[l], epsilon));
      rel_nodes = x.cwiseProduct(trace.ahat * t * w.gcn[l].transpose());
    }

    result.node_variable_relevance.col(v) = rel_nodes.rowwise().sum();
  }
  return result;
}

Eigen::VectorXd LrpResult::scores() const {
  return node_variable_relevance.cwiseMax(0.0).rowwise().sum();
}

NodeSensitivity node_sensitivity(ExplanationMethod method, const ModelWeights& w,
                                 const SubgraphSample& s) {
  NodeSensitivity out;
  out.method = method;
  out.node_ids = s.node_ids;
  switch (method) {
    case ExplanationMethod::SA:
      out.scores = saliency_sa(w, s);
      break;
    case ExplanationMethod::GradCam:
      out.scores = gradcam(w, s);
      break;
    case ExplanationMethod::Lrp:
      out.scores = lrp(w, s).scores();
      break;
  }
  return out;
}

std::map<int, double> aggregate_impact(const std::vector<NodeSensitivity>& sensitivities) {
  std::map<int, std::pair<double, long>> acc;  // id -> (sum, count)
  for (const NodeSensitivity& sens : sensitivities) {
    for (size_t i = 0; i < sens.node_ids.size(); ++i) {
      auto& slot = acc[sens.node_ids[i]];
      slot.first += sens.scores(static_cast<int>(i));
      slot.second += 1;
    }
  }
  std::map<int, double> out;
  for (const auto& [id, slot] : acc) out[id] = slot.first / static_cast<double>(slot.second);
  return out;
}

std::map<NodeKind, double> impact_by_type(const std::map<int, double>& node_impact,
                                          const std::map<int, NodeKind>& node_kinds) {
  std::map<NodeKind, std::pair<double, long>> acc;
  for (NodeKind kind : observation_kinds()) acc[kind] = {0.0, 0};
  for (const auto& [id, impact] : node_impact) {
    auto kit = node_kinds.find(id);
    if (kit == node_kinds.end()) {
      throw std::invalid_argument("no kind recorded for node " + std::to_string(id));
    }
    if (!is_observation(kit->second)) continue;
    acc[kit->second].first += impact;
    acc[kit->second].second += 1;
  }
  std::map<NodeKind, double> out;
  for (const auto& [kind, slot] : acc) {
    out[kind] = slot.second == 0 ? 0.0 : slot.first / static_cast<double>(slot.second);
  }
  return out;
}

ImpactReport build_impact_report(ExplanationMethod method, const ModelWeights& w,
                                 const std::vector<SubgraphSample>& samples) {
  std::vector<NodeSensitivity> sens(samples.size());
  parallel_for(static_cast<int>(samples.size()),
               [&](int i) { sens[i] = node_sensitivity(method, w, samples[i]); });

  std::map<int, NodeKind> node_kinds;
  std::map<int, int> node_time;
  for (const SubgraphSample& s : samples) {
    for (size_t i = 0; i < s.node_ids.size(); ++i) {
      node_kinds[s.node_ids[i]] = s.kinds[i];
      node_time[s.node_ids[i]] = s.time_index;
    }
  }

  ImpactReport report;
  report.method = method;
  report.node_impact = aggregate_impact(sens);
  report.kind_impact = impact_by_type(report.node_impact, node_kinds);
  report.normalization_note =
      "raw = mean sensitivity; normalized = raw / max raw over observation kinds";

  // Per-time-step aggregation, restricted to that step's subgraphs.
  std::map<int, std::vector<NodeSensitivity>> by_time;
  for (size_t i = 0; i < samples.size(); ++i) {
    by_time[samples[i].time_index].push_back(sens[i]);
  }
  for (const auto& [t, group] : by_time) {
    const auto impact = impact_by_type(aggregate_impact(group), node_kinds);
    for (const auto& [kind, value] : impact) {
      report.time_kind_impact[{t, kind}] = value;
    }
  }
  return report;
}

}  // namespace obsimpact
