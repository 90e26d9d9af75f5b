#include "obsimpact/geo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace obsimpact {

namespace {

const std::vector<Variable> kNwpVars = {Variable::U, Variable::V, Variable::T, Variable::Q};
const std::vector<Variable> kAircraftVars = {Variable::U, Variable::V, Variable::T};
const std::vector<Variable> kGpsroVars = {Variable::BA};
const std::vector<Variable> kSondeVars = {Variable::U, Variable::V, Variable::T, Variable::Q};
const std::vector<Variable> kSatelliteVars = {Variable::TB};

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

const std::array<NodeKind, kNumKinds>& all_kinds() {
  static const std::array<NodeKind, kNumKinds> kinds = {
      NodeKind::NWP,   NodeKind::AIRCRAFT, NodeKind::GPSRO, NodeKind::SONDE,
      NodeKind::AMV,   NodeKind::AMSUA,    NodeKind::AMSR2, NodeKind::ATMS,
      NodeKind::CRIS,  NodeKind::GK2A,     NodeKind::IASI,  NodeKind::MHS,
  };
  return kinds;
}

const std::vector<NodeKind>& observation_kinds() {
  static const std::vector<NodeKind> kinds = [] {
    std::vector<NodeKind> v;
    for (NodeKind k : all_kinds()) {
      if (is_observation(k)) v.push_back(k);
    }
    return v;
  }();
  return kinds;
}

const std::vector<Variable>& variables_for(NodeKind kind) {
  switch (kind) {
    case NodeKind::NWP:
      return kNwpVars;
    case NodeKind::AIRCRAFT:
      return kAircraftVars;
    case NodeKind::GPSRO:
      return kGpsroVars;
    case NodeKind::SONDE:
      return kSondeVars;
    default:
      return kSatelliteVars;
  }
}

int attribute_count(NodeKind kind) { return static_cast<int>(variables_for(kind).size()); }

std::string kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::NWP: return "NWP";
    case NodeKind::AIRCRAFT: return "AIRCRAFT";
    case NodeKind::GPSRO: return "GPSRO";
    case NodeKind::SONDE: return "SONDE";
    case NodeKind::AMV: return "AMV";
    case NodeKind::AMSUA: return "AMSUA";
    case NodeKind::AMSR2: return "AMSR2";
    case NodeKind::ATMS: return "ATMS";
    case NodeKind::CRIS: return "CRIS";
    case NodeKind::GK2A: return "GK2A";
    case NodeKind::IASI: return "IASI";
    case NodeKind::MHS: return "MHS";
  }
  throw std::logic_error("unknown NodeKind");
}

NodeKind kind_from_name(const std::string& name) {
  for (NodeKind k : all_kinds()) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown node kind: '" + name + "'");
}

std::string variable_name(Variable v) {
  switch (v) {
    case Variable::U: return "U";
    case Variable::V: return "V";
    case Variable::T: return "T";
    case Variable::Q: return "Q";
    case Variable::TB: return "TB";
    case Variable::BA: return "BA";
  }
  throw std::logic_error("unknown Variable");
}

void GeoPoint::validate() const {
  if (!(lat >= -90.0 && lat <= 90.0)) {
    throw std::invalid_argument("latitude out of range: " + std::to_string(lat));
  }
  if (!(lon >= -180.0 && lon < 180.0)) {
    throw std::invalid_argument("longitude out of range: " + std::to_string(lon));
  }
  if (!(pressure_hpa > 0.0)) {
    throw std::invalid_argument("pressure level must be positive");
  }
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlam = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

void MetNode::validate() const {
  location.validate();
  if (attributes.size() != attribute_count(kind)) {
    throw std::invalid_argument("node " + std::to_string(id) + ": expected " +
                                std::to_string(attribute_count(kind)) + " attributes for kind " +
                                kind_name(kind) + ", got " + std::to_string(attributes.size()));
  }
  if (!attributes.allFinite()) {
    throw std::invalid_argument("node " + std::to_string(id) + ": non-finite attribute");
  }
}

const MetNode& MetGraph::node_by_id(int id) const {
  auto it = index_of_id.find(id);
  if (it == index_of_id.end()) {
    throw std::out_of_range("no node with id " + std::to_string(id));
  }
  return nodes[it->second];
}

MetGraph build_graph(std::vector<MetNode> nodes, double radius_km) {
  MetGraph g;
  g.nodes = std::move(nodes);
  g.neighbors.resize(g.nodes.size());
  g.index_of_id.reserve(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    g.nodes[i].validate();
    auto [it, inserted] = g.index_of_id.emplace(g.nodes[i].id, static_cast<int>(i));
    if (!inserted) {
      throw std::invalid_argument("duplicate node id " + std::to_string(g.nodes[i].id));
    }
  }

  // Sweep over nodes sorted by latitude; |dlat| alone already bounds the
  // haversine distance from below, so the inner loop can stop early.
  const int n = static_cast<int>(g.nodes.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.nodes[a].location.lat < g.nodes[b].location.lat;
  });
  const double max_dlat = radius_km / (kEarthRadiusKm * std::numbers::pi / 180.0);

  for (int a = 0; a < n; ++a) {
    const int i = order[a];
    for (int b = a + 1; b < n; ++b) {
      const int j = order[b];
      if (g.nodes[j].location.lat - g.nodes[i].location.lat > max_dlat) break;
      if (haversine_km(g.nodes[i].location, g.nodes[j].location) <= radius_km) {
        g.neighbors[i].push_back(j);
        g.neighbors[j].push_back(i);
        const int lo = std::min(g.nodes[i].id, g.nodes[j].id);
        const int hi = std::max(g.nodes[i].id, g.nodes[j].id);
        g.edges.emplace_back(lo, hi);
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

ContextSubgraph khop_subgraph(const MetGraph& g, int center_id, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const MetNode& center = g.node_by_id(center_id);
  if (center.kind != NodeKind::NWP) {
    throw std::invalid_argument("subgraph center " + std::to_string(center_id) +
                                " is not an NWP node");
  }

  const int center_idx = g.index_of_id.at(center_id);
  std::unordered_map<int, int> hop;  // node index -> hop distance
  hop[center_idx] = 0;
  std::deque<int> frontier = {center_idx};
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    if (hop[u] == k) continue;
    for (int v : g.neighbors[u]) {
      if (!hop.count(v)) {
        hop[v] = hop[u] + 1;
        frontier.push_back(v);
      }
    }
  }

  std::vector<int> members;
  members.reserve(hop.size());
  for (const auto& [idx, h] : hop) {
    if (idx != center_idx) members.push_back(idx);
  }
  std::sort(members.begin(), members.end(), [&](int a, int b) {
    if (hop[a] != hop[b]) return hop[a] < hop[b];
    return g.nodes[a].id < g.nodes[b].id;
  });
  members.insert(members.begin(), center_idx);

  ContextSubgraph s;
  s.center_id = center_id;
  s.k = k;
  const int m = static_cast<int>(members.size());
  s.node_ids.reserve(m);
  for (int idx : members) s.node_ids.push_back(g.nodes[idx].id);

  std::unordered_map<int, int> local;  // graph index -> subgraph position
  for (int p = 0; p < m; ++p) local[members[p]] = p;
  s.adjacency = Eigen::MatrixXd::Zero(m, m);
  for (int p = 0; p < m; ++p) {
    for (int v : g.neighbors[members[p]]) {
      auto it = local.find(v);
      if (it != local.end()) {
        s.adjacency(p, it->second) = 1.0;
      }
    }
  }
  return s;
}

Eigen::MatrixXd normalized_adjacency_from(const Eigen::MatrixXd& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  Eigen::MatrixXd a_tilde = adjacency + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d_inv_sqrt = a_tilde.rowwise().sum().array().rsqrt();
  return d_inv_sqrt.asDiagonal() * a_tilde * d_inv_sqrt.asDiagonal();
}

Eigen::MatrixXd normalized_adjacency(const ContextSubgraph& s) {
  return normalized_adjacency_from(s.adjacency);
}

}  // namespace obsimpact
