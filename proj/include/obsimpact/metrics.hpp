#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace obsimpact {

struct VariableMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double explained_variance = 0.0;
  bool r2_defined = true;  // false when the labels have zero variance
};

struct Metrics {
  std::array<VariableMetrics, 4> per_variable;  // U, V, T, Q

  double mean_r2() const;
};

/// R^2 = 1 - SS_res/SS_tot, explained variance = 1 - Var(residual)/Var(truth).
/// Needs at least two pairs.
Metrics compute_metrics(const std::vector<Eigen::Vector4d>& preds,
                        const std::vector<Eigen::Vector4d>& labels);

}  // namespace obsimpact
