#include "obsimpact/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace obsimpact {

double Metrics::mean_r2() const {
  double sum = 0.0;
  for (const auto& m : per_variable) sum += m.r2;
  return sum / 4.0;
}

Metrics compute_metrics(const std::vector<Eigen::Vector4d>& preds,
                        const std::vector<Eigen::Vector4d>& labels) {
  if (preds.size() != labels.size()) throw std::invalid_argument("preds/labels length mismatch");
  const long n = static_cast<long>(preds.size());
  if (n < 2) throw std::invalid_argument("need at least two prediction pairs");

  Metrics out;
  for (int v = 0; v < 4; ++v) {
    double label_sum = 0.0, resid_sum = 0.0;
    for (long i = 0; i < n; ++i) {
      label_sum += labels[i](v);
      resid_sum += labels[i](v) - preds[i](v);
    }
    const double label_mean = label_sum / n;
    const double resid_mean = resid_sum / n;

    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0, resid_var = 0.0;
    for (long i = 0; i < n; ++i) {
      const double r = labels[i](v) - preds[i](v);
      ss_res += r * r;
      abs_sum += std::abs(r);
      ss_tot += (labels[i](v) - label_mean) * (labels[i](v) - label_mean);
      resid_var += (r - resid_mean) * (r - resid_mean);
    }

    VariableMetrics m;
    m.rmse = std::sqrt(ss_res / n);
    m.mae = abs_sum / n;
    if (ss_tot <= 0.0) {
      m.r2_defined = false;
      m.r2 = std::numeric_limits<double>::quiet_NaN();
      m.explained_variance = std::numeric_limits<double>::quiet_NaN();
    } else {
      m.r2 = 1.0 - ss_res / ss_tot;
      m.explained_variance = 1.0 - resid_var / ss_tot;
    }
    out.per_variable[v] = m;
  }
  return out;
}

}  // namespace obsimpact
