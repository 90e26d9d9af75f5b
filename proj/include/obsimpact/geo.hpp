#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace obsimpact {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDefaultRadiusKm = 50.0;
constexpr double kDefaultPressureHpa = 500.0;

/// Weather variables carried by node attributes.
enum class Variable { U, V, T, Q, TB, BA };

/// Node types: the NWP grid plus the 11 observation sources.
enum class NodeKind {
  NWP,
  AIRCRAFT,
  GPSRO,
  SONDE,
  AMV,
  AMSUA,
  AMSR2,
  ATMS,
  CRIS,
  GK2A,
  IASI,
  MHS,
};

constexpr int kNumKinds = 12;
constexpr int kNumOutputVariables = 4;  // U, V, T, Q

const std::array<NodeKind, kNumKinds>& all_kinds();
const std::vector<NodeKind>& observation_kinds();

/// Fixed ordered variable list of a node kind.
const std::vector<Variable>& variables_for(NodeKind kind);
int attribute_count(NodeKind kind);

std::string kind_name(NodeKind kind);
NodeKind kind_from_name(const std::string& name);  // throws std::invalid_argument
std::string variable_name(Variable v);

inline bool is_observation(NodeKind kind) { return kind != NodeKind::NWP; }

struct GeoPoint {
  double lat = 0.0;   // degrees, [-90, 90]
  double lon = 0.0;   // degrees, [-180, 180)
  double pressure_hpa = kDefaultPressureHpa;

  void validate() const;  // throws std::invalid_argument
};

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct MetNode {
  int id = 0;
  NodeKind kind = NodeKind::NWP;
  GeoPoint location;
  int time_index = 0;
  Eigen::VectorXd attributes;  // ordered per variables_for(kind)

  void validate() const;
};

/// Undirected proximity graph over one time step's nodes.
/// Immutable after build_graph.
struct MetGraph {
  std::vector<MetNode> nodes;
  std::vector<std::pair<int, int>> edges;     // (id, id), id_lo < id_hi
  std::vector<std::vector<int>> neighbors;    // by node index
  std::unordered_map<int, int> index_of_id;

  const MetNode& node_by_id(int id) const;
  bool has_node(int id) const { return index_of_id.count(id) != 0; }
};

/// Connects every pair of nodes within radius_km (haversine). No self-loops.
/// Throws on duplicate ids.
MetGraph build_graph(std::vector<MetNode> nodes, double radius_km = kDefaultRadiusKm);

/// k-hop ego subgraph around an NWP node: center first, remaining nodes
/// ordered by (hop distance, id).
struct ContextSubgraph {
  int center_id = 0;
  int k = 0;
  std::vector<int> node_ids;
  Eigen::MatrixXd adjacency;  // induced, binary, symmetric, zero diagonal

  int size() const { return static_cast<int>(node_ids.size()); }
};

ContextSubgraph khop_subgraph(const MetGraph& g, int center_id, int k);

/// D^{-1/2} (A + I) D^{-1/2} for a binary symmetric adjacency.
Eigen::MatrixXd normalized_adjacency_from(const Eigen::MatrixXd& adjacency);
Eigen::MatrixXd normalized_adjacency(const ContextSubgraph& s);

}  // namespace obsimpact
