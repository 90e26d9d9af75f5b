#pragma once

#include "obsimpact/geo.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace obsimpact {

struct Region {
  double lat_min = 20.0;
  double lat_max = 50.0;
  double lon_min = 100.0;
  double lon_max = 145.0;

  void validate() const;  // non-degenerate, inside valid ranges
};

/// Parameters of the synthetic weather field generator.
struct FieldSpec {
  std::uint64_t seed = 1;
  Region region;
  int n_bumps = 6;
  double advection_deg_per_step = 0.3;
  double grid_spacing_deg = 0.44;  // ~49 km N-S, keeps grid neighbors inside the 50 km radius
  std::map<Variable, double> noise_sd = {
      {Variable::U, 0.5},  {Variable::V, 0.5},   {Variable::T, 0.5},
      {Variable::Q, 2e-4}, {Variable::TB, 0.5},  {Variable::BA, 1e-3},
  };

  void validate() const;
};

/// Smooth deterministic fields: each base variable (U, V, T, Q) is a constant
/// plus a sum of Gaussian bumps whose centers drift by advection_deg_per_step
/// per time step. TB and BA are affine combinations of T and Q (documented in
/// the README) so cross-variable correlations exist by construction.
class FieldSet {
 public:
  explicit FieldSet(const FieldSpec& spec);

  double value(Variable v, double lat, double lon, int t) const;

 private:
  struct Bump {
    double lat0, lon0;    // center at t = 0
    double dlat, dlon;    // drift direction (unit vector)
    double amp, sigma;
  };

  double base_value(Variable v, double lat, double lon, int t) const;

  double speed_;
  std::array<double, 4> offsets_;            // U, V, T, Q
  std::array<std::vector<Bump>, 4> bumps_;   // U, V, T, Q
};

struct TimeStep {
  int t = 0;
  std::vector<MetNode> nodes;                        // NWP grid + observations
  std::unordered_map<int, Eigen::Vector4d> labels;   // NWP id -> (U,V,T,Q) at t
};

struct Dataset {
  std::string split;  // "train" or "test"
  std::vector<TimeStep> steps;
};

/// Regular grid over the region at grid_spacing_deg; attributes are the field
/// at t-1, labels the field at t. Node ids start at id_start.
std::vector<MetNode> sample_nwp_grid(const FieldSpec& spec, int t,
                                     std::unordered_map<int, Eigen::Vector4d>* labels,
                                     int id_start = 0);

/// Seeded uniform-random observation locations; values = field(t) + noise.
std::vector<MetNode> sample_observations(const FieldSpec& spec, int t,
                                         const std::map<NodeKind, int>& counts,
                                         int id_start);

Dataset generate_dataset(const FieldSpec& spec, int t_begin, int t_end,
                         const std::map<NodeKind, int>& obs_counts,
                         const std::string& split, int id_start = 0);

void save_dataset(const Dataset& d, const std::string& path);

/// Parses the documented CSV format. Malformed input throws
/// std::runtime_error naming line and column.
Dataset load_dataset(const std::string& path);

}  // namespace obsimpact
