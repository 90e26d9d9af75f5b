#include "obsimpact/fidelity.hpp"

#include "obsimpact/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace obsimpact {

SubgraphSample occlude(const SubgraphSample& s, const std::vector<int>& node_indices,
                       const Scaler& scaler) {
  SubgraphSample masked = s;
  for (int idx : node_indices) {
    if (idx == 0) throw std::invalid_argument("the center node must not be occluded");
    if (idx < 0 || idx >= s.size()) throw std::invalid_argument("occlusion index out of range");
    masked.features[idx] = scaler.baseline(s.kinds[idx]);
  }
  return masked;
}

double subgraph_accuracy(const ModelWeights& w, const std::vector<SubgraphSample>& samples) {
  std::vector<Eigen::Vector4d> preds(samples.size()), labels(samples.size());
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    preds[i] = predict(w, samples[i]);
    labels[i] = samples[i].label;
  });
  return compute_metrics(preds, labels).mean_r2();
}

namespace {

// Non-center node indices ordered by (score desc, node id asc).
std::vector<int> ranked_indices(const SubgraphSample& s, const Eigen::VectorXd& scores) {
  std::vector<int> idx(s.size() - 1);
  std::iota(idx.begin(), idx.end(), 1);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return s.node_ids[a] < s.node_ids[b];
  });
  return idx;
}

int occlusion_count(const SubgraphSample& s, double fraction) {
  return static_cast<int>(std::ceil(fraction * (s.size() - 1)));
}

FidelityResult evaluate_with_rankings(const ModelWeights& w,
                                      const std::vector<SubgraphSample>& samples,
                                      const std::vector<std::vector<int>>& rankings,
                                      const std::string& method, double fraction,
                                      const Scaler& scaler) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("occlusion fraction must be in (0,1)");
  }
  const int n = static_cast<int>(samples.size());
  std::vector<Eigen::Vector4d> labels(n), base(n), top_masked(n), bottom_masked(n);
  parallel_for(n, [&](int i) {
    const SubgraphSample& s = samples[i];
    labels[i] = s.label;
    base[i] = predict(w, s);
    const auto& ranked = rankings[i];
    const int m = occlusion_count(s, fraction);
    const std::vector<int> top(ranked.begin(), ranked.begin() + m);
    const std::vector<int> bottom(ranked.end() - m, ranked.end());
    top_masked[i] = predict(w, occlude(s, top, scaler));
    bottom_masked[i] = predict(w, occlude(s, bottom, scaler));
  });

  const double base_acc = compute_metrics(base, labels).mean_r2();
  FidelityResult r;
  r.method = method;
  r.fraction = fraction;
  r.fidelity_plus = base_acc - compute_metrics(top_masked, labels).mean_r2();
  r.fidelity_minus = base_acc - compute_metrics(bottom_masked, labels).mean_r2();
  return r;
}

}  // namespace

FidelityResult evaluate_fidelity(const ModelWeights& w, const std::vector<SubgraphSample>& samples,
                                 ExplanationMethod method, double fraction, const Scaler& scaler) {
  std::vector<std::vector<int>> rankings(samples.size());
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    rankings[i] = ranked_indices(samples[i], node_sensitivity(method, w, samples[i]).scores);
  });
  return evaluate_with_rankings(w, samples, rankings, method_name(method), fraction, scaler);
}

FidelityResult evaluate_fidelity_random(const ModelWeights& w,
                                        const std::vector<SubgraphSample>& samples,
                                        double fraction, const Scaler& scaler,
                                        std::uint64_t seed) {
  std::vector<std::vector<int>> rankings(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    std::mt19937_64 rng(seed * 6364136223846793005ULL + i);
    std::vector<int> idx(samples[i].size() - 1);
    std::iota(idx.begin(), idx.end(), 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    rankings[i] = std::move(idx);
  }
  return evaluate_with_rankings(w, samples, rankings, "random", fraction, scaler);
}

}  // namespace obsimpact
