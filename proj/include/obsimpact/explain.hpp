#pragma once

#include "obsimpact/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace obsimpact {

enum class ExplanationMethod { SA, GradCam, Lrp };

std::string method_name(ExplanationMethod m);
ExplanationMethod method_from_name(const std::string& name);

/// Per-node importance scores for one context subgraph. Scores are
/// nonnegative: every method rectifies before the scalar reduction.
struct NodeSensitivity {
  ExplanationMethod method = ExplanationMethod::SA;
  std::vector<int> node_ids;
  Eigen::VectorXd scores;
};

/// Rectified gradient of each output w.r.t. the final node representations;
/// node score = mean over feature dims, summed over the 4 output variables.
Eigen::VectorXd saliency_sa(const ModelWeights& w, const SubgraphSample& s);

/// Channel weights = node-averaged gradients of the final GCN layer; node
/// score = ReLU of the weighted feature sum, summed over output variables.
Eigen::VectorXd gradcam(const ModelWeights& w, const SubgraphSample& s);

struct LrpResult {
  /// Raw relevance per node per output variable (|V| x 4); may be negative.
  Eigen::MatrixXd node_variable_relevance;

  /// Rectified per-variable relevance summed over outputs (nonnegative).
  Eigen::VectorXd scores() const;
};

/// Epsilon-rule relevance propagation from each output back through the MLP,
/// mean pooling (equal split), the GCN layers, stopping at H^(0).
LrpResult lrp(const ModelWeights& w, const SubgraphSample& s, double epsilon = 1e-9);

NodeSensitivity node_sensitivity(ExplanationMethod method, const ModelWeights& w,
                                 const SubgraphSample& s);

/// S_j: mean of S_{i,j} over exactly the subgraphs containing node j.
std::map<int, double> aggregate_impact(const std::vector<NodeSensitivity>& sensitivities);

/// Mean S_j per observation kind (NWP excluded); kinds with no nodes map to 0.
std::map<NodeKind, double> impact_by_type(const std::map<int, double>& node_impact,
                                          const std::map<int, NodeKind>& node_kinds);

struct ImpactReport {
  ExplanationMethod method = ExplanationMethod::SA;
  std::map<int, double> node_impact;
  std::map<NodeKind, double> kind_impact;
  std::map<std::pair<int, NodeKind>, double> time_kind_impact;
  std::string normalization_note;
};

/// Full impact aggregation over a set of samples: per node, per kind, and
/// per (time step, kind).
ImpactReport build_impact_report(ExplanationMethod method, const ModelWeights& w,
                                 const std::vector<SubgraphSample>& samples);

}  // namespace obsimpact
