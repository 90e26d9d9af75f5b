#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obsimpact/explain.hpp"
#include "test_util.hpp"

#include <random>

using namespace obsimpact;
using namespace obsimpact::testutil;

namespace {

/// A model whose relevance is exactly conserved: zero biases everywhere and
/// strictly positive weights/inputs so no relu ever clips.
ModelWeights positive_model(const ModelConfig& cfg, std::mt19937_64& rng) {
  ModelWeights w = init_model(cfg, kSmallKinds, false, rng);
  std::uniform_real_distribution<double> pos(0.05, 0.5);
  for (const TensorRef& r : tensor_refs(w)) {
    auto m = r.map();
    if (r.regularized) {
      for (int c = 0; c < m.cols(); ++c)
        for (int row = 0; row < m.rows(); ++row) m(row, c) = pos(rng);
    } else {
      m.setZero();
    }
  }
  return w;
}

SubgraphSample positive_sample(std::mt19937_64& rng, int n) {
  SubgraphSample s = random_sample(rng, n);
  for (auto& f : s.features) f = f.cwiseAbs().array() + 0.1;
  return s;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (ExplanationMethod m :
       {ExplanationMethod::SA, ExplanationMethod::GradCam, ExplanationMethod::Lrp}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK_THROWS_AS(method_from_name("shap"), std::invalid_argument);
}

TEST_CASE("zero head weights give zero scores for every method") {
  std::mt19937_64 rng(1);
  ModelWeights w = init_model(small_config(), kSmallKinds, false, rng);
  for (auto& layer : w.mlp) {
    layer.W.setZero();
    layer.b.setZero();
  }
  const SubgraphSample s = random_sample(rng, 5);
  CHECK(saliency_sa(w, s).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gradcam(w, s).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lrp(w, s).scores().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all methods produce nonnegative scores") {
  std::mt19937_64 rng(2);
  const ModelWeights w = init_model(small_config(), kSmallKinds, false, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const SubgraphSample s = random_sample(rng, 3 + static_cast<int>(rng() % 6));
    CHECK(saliency_sa(w, s).minCoeff() >= 0.0);
    CHECK(gradcam(w, s).minCoeff() >= 0.0);
    CHECK(lrp(w, s).scores().minCoeff() >= 0.0);
  }
}

TEST_CASE("identical final representations give identical grad-cam scores") {
  std::mt19937_64 rng(3);
  ModelConfig cfg = small_config(4, 1);
  ModelWeights w = init_model(cfg, {NodeKind::NWP}, false, rng);
  // identical features on every node of a vertex-transitive graph (a 4-cycle)
  // make every final representation equal, so every score must match
  SubgraphSample s;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    s.node_ids.push_back(i);
    s.kinds.push_back(NodeKind::NWP);
    s.features.push_back(Eigen::Vector4d(0.3, -0.7, 1.1, 0.2));
    adj(i, (i + 1) % 4) = adj((i + 1) % 4, i) = 1.0;
  }
  s.ahat = normalized_adjacency_from(adj);
  const Eigen::VectorXd scores = gradcam(w, s);
  for (int i = 1; i < 4; ++i) CHECK(scores(i) == doctest::Approx(scores(0)).epsilon(1e-12));
}

TEST_CASE("grad-cam matches a scripted two-step oracle") {
  std::mt19937_64 rng(4);
  const ModelWeights w = init_model(small_config(5, 2), kSmallKinds, false, rng);
  const SubgraphSample s = random_sample(rng, 6);

  const ForwardTrace trace = forward(s, w);
  const auto grads = output_grads_final_layer(trace, w);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(s.size());
  for (int v = 0; v < 4; ++v) {
    const Eigen::VectorXd alpha = grads[v].colwise().mean().transpose();
    expect += (trace.final_h() * alpha).cwiseMax(0.0);
  }
  CHECK(max_rel_err(gradcam(w, s), expect) < 1e-10);
}

TEST_CASE("saliency gradient matches a finite-difference probe of H^(n)") {
  std::mt19937_64 rng(5);
  const ModelConfig cfg = small_config(5, 2);
  const ModelWeights w = init_model(cfg, kSmallKinds, false, rng);
  const SubgraphSample s = random_sample(rng, 5);

  ForwardTrace trace = forward(s, w);
  const auto grads = output_grads_final_layer(trace, w);
  const double h = 1e-6;
  for (int v = 0; v < 4; ++v) {
    for (int probe = 0; probe < 6; ++probe) {
      const int i = static_cast<int>(rng() % s.size());
      const int j = static_cast<int>(rng() % cfg.d);
      ForwardTrace t = trace;
      t.act.back()(i, j) += h;
      pool_and_head(t, w);
      const double up = t.output(v);
      t.act.back()(i, j) -= 2 * h;
      pool_and_head(t, w);
      const double fd = (up - t.output(v)) / (2 * h);
      CHECK(std::abs(fd - grads[v](i, j)) < 1e-6);
    }
  }
}

TEST_CASE("single positive node conserves relevance exactly") {
  std::mt19937_64 rng(6);
  ModelConfig cfg = small_config(4, 1);
  cfg.mlp_hidden = {3};
  ModelWeights w = positive_model(cfg, rng);
  SubgraphSample s;
  s.node_ids = {0};
  s.kinds = {NodeKind::NWP};
  s.features = {Eigen::Vector4d(0.4, 0.9, 0.2, 1.3)};
  s.ahat = Eigen::MatrixXd::Ones(1, 1);

  const ForwardTrace trace = forward(s, w);
  const LrpResult res = lrp(w, s, 0.0);
  for (int v = 0; v < 4; ++v) {
    CHECK(res.node_variable_relevance(0, v) == doctest::Approx(trace.output(v)).epsilon(1e-9));
  }
}

TEST_CASE("lrp conserves relevance on positive multi-node models") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelConfig cfg = small_config(5, 2);
    const ModelWeights w = positive_model(cfg, rng);
    const SubgraphSample s = positive_sample(rng, 3 + static_cast<int>(rng() % 5));
    const ForwardTrace trace = forward(s, w);

    const LrpResult exact = lrp(w, s, 0.0);
    const LrpResult stab = lrp(w, s, 1e-9);
    for (int v = 0; v < 4; ++v) {
      const double z = trace.output(v);
      const double got0 = exact.node_variable_relevance.col(v).sum();
      const double got9 = stab.node_variable_relevance.col(v).sum();
      CHECK(std::abs(got0 - z) / std::max(std::abs(z), 1e-12) < 1e-6);
      CHECK(std::abs(got9 - z) / std::max(std::abs(z), 1e-12) < 1e-4);
    }
  }
}

TEST_CASE("zero output gives zero lrp relevance") {
  std::mt19937_64 rng(8);
  ModelWeights w = init_model(small_config(4, 1), {NodeKind::NWP}, false, rng);
  w.mlp.back().W.setZero();
  w.mlp.back().b.setZero();
  SubgraphSample s;
  s.node_ids = {0};
  s.kinds = {NodeKind::NWP};
  s.features = {Eigen::Vector4d::Ones()};
  s.ahat = Eigen::MatrixXd::Ones(1, 1);
  CHECK(lrp(w, s).node_variable_relevance.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate_impact is a per-node mean over containing subgraphs") {
  NodeSensitivity a, b, c;
  a.node_ids = {1, 2, 3};
  a.scores = Eigen::Vector3d(1.0, 2.0, 3.0);
  b.node_ids = {2, 3};
  b.scores = Eigen::Vector2d(4.0, 5.0);
  c.node_ids = {7};
  c.scores = Eigen::VectorXd::Constant(1, 10.0);

  const auto impact = aggregate_impact({a, b, c});
  CHECK(impact.at(1) == doctest::Approx(1.0));
  CHECK(impact.at(2) == doctest::Approx(3.0));   // (2 + 4) / 2
  CHECK(impact.at(3) == doctest::Approx(4.0));   // (3 + 5) / 2
  CHECK(impact.at(7) == doctest::Approx(10.0));
  CHECK(impact.size() == 4);
}

TEST_CASE("impact_by_type averages per kind and zero-fills absent kinds") {
  const std::map<int, double> node_impact = {{1, 2.0}, {2, 4.0}, {3, 9.0}, {4, 1.0}};
  const std::map<int, NodeKind> kinds = {{1, NodeKind::SONDE},
                                         {2, NodeKind::SONDE},
                                         {3, NodeKind::GPSRO},
                                         {4, NodeKind::NWP}};
  const auto by_kind = impact_by_type(node_impact, kinds);
  CHECK(by_kind.at(NodeKind::SONDE) == doctest::Approx(3.0));
  CHECK(by_kind.at(NodeKind::GPSRO) == doctest::Approx(9.0));
  CHECK(by_kind.count(NodeKind::NWP) == 0);   // background, not an observation
  CHECK(by_kind.at(NodeKind::AIRCRAFT) == 0.0);
  CHECK(by_kind.size() == 11);
}

TEST_CASE("impact report covers every sample and time step") {
  std::mt19937_64 rng(9);
  const ModelWeights w = init_model(small_config(), kSmallKinds, false, rng);
  std::vector<SubgraphSample> samples;
  for (int t = 1; t <= 3; ++t) {
    for (int i = 0; i < 4; ++i) {
      SubgraphSample s = random_sample(rng, 5);
      // give the nodes globally consistent ids and kinds per id
      for (int n = 0; n < s.size(); ++n) s.node_ids[n] = t * 100 + i * 10 + n;
      s.time_index = t;
      samples.push_back(s);
    }
  }

  const ImpactReport report = build_impact_report(ExplanationMethod::Lrp, w, samples);
  CHECK(report.method == ExplanationMethod::Lrp);
  CHECK(report.node_impact.size() == 60);   // all ids distinct
  CHECK(report.kind_impact.size() == 11);
  for (const auto& [key, value] : report.time_kind_impact) {
    CHECK(key.first >= 1);
    CHECK(key.first <= 3);
    CHECK(value >= 0.0);
  }
  CHECK(!report.normalization_note.empty());

  // cross-check one node against a direct evaluation
  const auto direct = node_sensitivity(ExplanationMethod::Lrp, w, samples[0]);
  CHECK(report.node_impact.at(samples[0].node_ids[1]) ==
        doctest::Approx(direct.scores(1)).epsilon(1e-12));
}
