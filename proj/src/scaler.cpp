#include "obsimpact/scaler.hpp"

#include <cmath>
#include <stdexcept>

namespace obsimpact {

namespace {
constexpr double kMinSd = 1e-12;
}

Scaler Scaler::fit(const Dataset& train) {
  Scaler s;
  std::map<NodeKind, Eigen::VectorXd> sum, sum_sq;
  std::map<NodeKind, long> count;
  Eigen::Vector4d lsum = Eigen::Vector4d::Zero(), lsq = Eigen::Vector4d::Zero();
  long lcount = 0;

  for (const TimeStep& step : train.steps) {
    for (const MetNode& n : step.nodes) {
      auto [it, fresh] = sum.emplace(n.kind, Eigen::VectorXd::Zero(n.attributes.size()));
      if (fresh) {
        sum_sq.emplace(n.kind, Eigen::VectorXd::Zero(n.attributes.size()));
        count.emplace(n.kind, 0);
      }
      it->second += n.attributes;
      sum_sq.at(n.kind) += n.attributes.cwiseProduct(n.attributes);
      ++count.at(n.kind);
    }
    for (const auto& [id, label] : step.labels) {
      lsum += label;
      lsq += label.cwiseProduct(label);
      ++lcount;
    }
  }
  if (lcount == 0) throw std::invalid_argument("scaler: train split has no labels");

  for (const auto& [kind, total] : sum) {
    const double n = static_cast<double>(count.at(kind));
    Eigen::VectorXd mean = total / n;
    Eigen::VectorXd var = sum_sq.at(kind) / n - mean.cwiseProduct(mean);
    s.attr_mean[kind] = mean;
    s.attr_sd[kind] = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(kMinSd);
  }
  const double ln = static_cast<double>(lcount);
  s.label_mean = lsum / ln;
  Eigen::Vector4d lvar = lsq / ln - s.label_mean.cwiseProduct(s.label_mean);
  s.label_sd = lvar.cwiseMax(0.0).cwiseSqrt().cwiseMax(kMinSd);
  return s;
}

Eigen::VectorXd Scaler::transform(NodeKind kind, const Eigen::VectorXd& attrs) const {
  auto it = attr_mean.find(kind);
  if (it == attr_mean.end()) {
    throw std::invalid_argument("scaler has no statistics for kind " + kind_name(kind));
  }
  return (attrs - it->second).cwiseQuotient(attr_sd.at(kind));
}

Eigen::Vector4d Scaler::transform_label(const Eigen::Vector4d& label) const {
  return (label - label_mean).cwiseQuotient(label_sd);
}

Eigen::Vector4d Scaler::inverse_label(const Eigen::Vector4d& standardized) const {
  return standardized.cwiseProduct(label_sd) + label_mean;
}

Eigen::VectorXd Scaler::baseline(NodeKind kind) const {
  return transform(kind, attr_mean.at(kind));
}

}  // namespace obsimpact
