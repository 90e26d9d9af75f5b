#pragma once

#include "obsimpact/geo.hpp"
#include "obsimpact/synthdata.hpp"

#include <map>

namespace obsimpact {

/// Per-variable z-score standardization fitted on the train split: one
/// mean/sd pair per (kind, attribute slot) and one per label variable.
struct Scaler {
  std::map<NodeKind, Eigen::VectorXd> attr_mean;
  std::map<NodeKind, Eigen::VectorXd> attr_sd;
  Eigen::Vector4d label_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d label_sd = Eigen::Vector4d::Ones();

  static Scaler fit(const Dataset& train);

  Eigen::VectorXd transform(NodeKind kind, const Eigen::VectorXd& attrs) const;
  Eigen::Vector4d transform_label(const Eigen::Vector4d& label) const;
  Eigen::Vector4d inverse_label(const Eigen::Vector4d& standardized) const;

  /// The occlusion baseline: the train-split mean in standardized space.
  Eigen::VectorXd baseline(NodeKind kind) const;
};

}  // namespace obsimpact
