#pragma once

#include "obsimpact/explain.hpp"
#include "obsimpact/metrics.hpp"
#include "obsimpact/scaler.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace obsimpact {

struct FidelityResult {
  std::string method;        // "sa", "gradcam", "lrp", "random"
  double fraction = 0.0;     // occluded share of non-center nodes, in (0,1)
  double fidelity_plus = 0.0;
  double fidelity_minus = 0.0;
  std::string accuracy_metric = "mean_r2";
};

/// Replaces the listed nodes' feature vectors with the train-split mean in
/// standardized space. Index 0 (the center NWP node) must not be occluded.
SubgraphSample occlude(const SubgraphSample& s, const std::vector<int>& node_indices,
                       const Scaler& scaler);

/// Mean R^2 over the 4 output variables of predict() against the labels.
double subgraph_accuracy(const ModelWeights& w, const std::vector<SubgraphSample>& samples);

/// Fidelity+ occludes the top ceil(fraction * (|V|-1)) non-center nodes per
/// subgraph (score descending, ties by node id); Fidelity- occludes the
/// bottom fraction instead. Both report accuracy(original) - accuracy(masked).
FidelityResult evaluate_fidelity(const ModelWeights& w, const std::vector<SubgraphSample>& samples,
                                 ExplanationMethod method, double fraction, const Scaler& scaler);

/// Same occlusion protocol with a seeded random ranking per subgraph.
FidelityResult evaluate_fidelity_random(const ModelWeights& w,
                                        const std::vector<SubgraphSample>& samples,
                                        double fraction, const Scaler& scaler,
                                        std::uint64_t seed);

}  // namespace obsimpact
