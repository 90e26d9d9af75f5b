#include "obsimpact/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace obsimpact {

namespace {

// TB and BA are built from T and Q so the reconstruction task has
// cross-variable signal. The exact forms are documented in the README.
constexpr double kTbOffset = 20.0;
constexpr double kTbFromT = 0.8;
constexpr double kTbFromQ = 1500.0;
constexpr double kBaOffset = 0.01;
constexpr double kBaFromQ = 2.0;
constexpr double kBaFromT = 4e-5;

struct VarGen {
  double offset;
  double amp;
};

// Base offsets and bump amplitudes per variable (U, V, T, Q).
constexpr std::array<VarGen, 4> kVarGen = {{
    {8.0, 6.0},     // U (m/s)
    {0.0, 6.0},     // V (m/s)
    {250.0, 8.0},   // T (K)
    {0.004, 0.002}, // Q (kg/kg)
}};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& path, int line, int col, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                           what);
}

double parse_number(const std::string& field, const std::string& path, int line, int col) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    parse_fail(path, line, col, "expected a number, got '" + field + "'");
  }
  if (pos != field.size()) parse_fail(path, line, col, "trailing characters in number '" + field + "'");
  return v;
}

}  // namespace

void Region::validate() const {
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
    throw std::invalid_argument("degenerate region box");
  }
  GeoPoint{lat_min, lon_min}.validate();
  GeoPoint{lat_max, lon_max - 1e-9}.validate();
}

void FieldSpec::validate() const {
  region.validate();
  if (n_bumps < 1) throw std::invalid_argument("n_bumps must be >= 1");
  if (grid_spacing_deg <= 0) throw std::invalid_argument("grid spacing must be positive");
  for (const auto& [v, sd] : noise_sd) {
    if (sd < 0) throw std::invalid_argument("noise_sd must be >= 0 for " + variable_name(v));
  }
}

FieldSet::FieldSet(const FieldSpec& spec) : speed_(spec.advection_deg_per_step) {
  spec.validate();
  const Region& r = spec.region;
  for (int v = 0; v < 4; ++v) {
    offsets_[v] = kVarGen[v].offset;
    std::mt19937_64 rng(spec.seed * 1000003ULL + static_cast<std::uint64_t>(v));
    std::uniform_real_distribution<double> ulat(r.lat_min - 5.0, r.lat_max + 5.0);
    std::uniform_real_distribution<double> ulon(r.lon_min - 5.0, r.lon_max + 5.0);
    std::uniform_real_distribution<double> uamp(-kVarGen[v].amp, kVarGen[v].amp);
    std::uniform_real_distribution<double> usigma(3.0, 8.0);
    std::uniform_real_distribution<double> uangle(0.0, 2.0 * M_PI);
    for (int b = 0; b < spec.n_bumps; ++b) {
      Bump bump;
      bump.lat0 = ulat(rng);
      bump.lon0 = ulon(rng);
      bump.amp = uamp(rng);
      bump.sigma = usigma(rng);
      const double angle = uangle(rng);
      bump.dlat = std::sin(angle);
      bump.dlon = std::cos(angle);
      bumps_[v].push_back(bump);
    }
  }
}

double FieldSet::base_value(Variable v, double lat, double lon, int t) const {
  const int idx = static_cast<int>(v);
  double val = offsets_[idx];
  for (const Bump& b : bumps_[idx]) {
    const double clat = b.lat0 + b.dlat * speed_ * t;
    const double clon = b.lon0 + b.dlon * speed_ * t;
    const double d2 = (lat - clat) * (lat - clat) + (lon - clon) * (lon - clon);
    val += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
  }
  return val;
}

double FieldSet::value(Variable v, double lat, double lon, int t) const {
  switch (v) {
    case Variable::U:
    case Variable::V:
    case Variable::T:
    case Variable::Q:
      return base_value(v, lat, lon, t);
    case Variable::TB:
      return kTbOffset + kTbFromT * base_value(Variable::T, lat, lon, t) +
             kTbFromQ * base_value(Variable::Q, lat, lon, t);
    case Variable::BA:
      return kBaOffset + kBaFromQ * base_value(Variable::Q, lat, lon, t) +
             kBaFromT * (base_value(Variable::T, lat, lon, t) - 250.0);
  }
  throw std::logic_error("unknown Variable");
}

std::vector<MetNode> sample_nwp_grid(const FieldSpec& spec, int t,
                                     std::unordered_map<int, Eigen::Vector4d>* labels,
                                     int id_start) {
  spec.validate();
  const FieldSet fields(spec);
  const Region& r = spec.region;
  const int n_lat = static_cast<int>(std::floor((r.lat_max - r.lat_min) / spec.grid_spacing_deg)) + 1;
  const int n_lon = static_cast<int>(std::floor((r.lon_max - r.lon_min) / spec.grid_spacing_deg)) + 1;

  std::vector<MetNode> nodes;
  nodes.reserve(static_cast<size_t>(n_lat) * n_lon);
  int id = id_start;
  for (int i = 0; i < n_lat; ++i) {
    for (int j = 0; j < n_lon; ++j) {
      MetNode node;
      node.id = id++;
      node.kind = NodeKind::NWP;
      node.location = {r.lat_min + i * spec.grid_spacing_deg,
                       r.lon_min + j * spec.grid_spacing_deg, kDefaultPressureHpa};
      node.time_index = t;
      node.attributes.resize(4);
      Eigen::Vector4d label;
      for (int v = 0; v < 4; ++v) {
        const Variable var = static_cast<Variable>(v);
        node.attributes(v) = fields.value(var, node.location.lat, node.location.lon, t - 1);
        label(v) = fields.value(var, node.location.lat, node.location.lon, t);
      }
      if (labels) (*labels)[node.id] = label;
      nodes.push_back(std::move(node));
    }
  }
  return nodes;
}

std::vector<MetNode> sample_observations(const FieldSpec& spec, int t,
                                         const std::map<NodeKind, int>& counts,
                                         int id_start) {
  spec.validate();
  const FieldSet fields(spec);
  const Region& r = spec.region;
  std::vector<MetNode> nodes;
  int id = id_start;
  for (NodeKind kind : observation_kinds()) {
    auto it = counts.find(kind);
    const int count = it == counts.end() ? 0 : it->second;
    if (count < 0) throw std::invalid_argument("negative count for " + kind_name(kind));
    std::mt19937_64 rng(spec.seed * 2000003ULL + static_cast<std::uint64_t>(t) * 131ULL +
                        static_cast<std::uint64_t>(kind));
    std::uniform_real_distribution<double> ulat(r.lat_min, r.lat_max);
    std::uniform_real_distribution<double> ulon(r.lon_min, r.lon_max);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int c = 0; c < count; ++c) {
      MetNode node;
      node.id = id++;
      node.kind = kind;
      node.location = {ulat(rng), ulon(rng), kDefaultPressureHpa};
      node.time_index = t;
      const auto& vars = variables_for(kind);
      node.attributes.resize(static_cast<int>(vars.size()));
      for (size_t v = 0; v < vars.size(); ++v) {
        const double sd = spec.noise_sd.count(vars[v]) ? spec.noise_sd.at(vars[v]) : 0.0;
        node.attributes(static_cast<int>(v)) =
            fields.value(vars[v], node.location.lat, node.location.lon, t) + sd * gauss(rng);
      }
      nodes.push_back(std::move(node));
    }
  }
  return nodes;
}

Dataset generate_dataset(const FieldSpec& spec, int t_begin, int t_end,
                         const std::map<NodeKind, int>& obs_counts,
                         const std::string& split, int id_start) {
  Dataset d;
  d.split = split;
  int id = id_start;
  for (int t = t_begin; t < t_end; ++t) {
    TimeStep step;
    step.t = t;
    step.nodes = sample_nwp_grid(spec, t, &step.labels, id);
    id += static_cast<int>(step.nodes.size());
    auto obs = sample_observations(spec, t, obs_counts, id);
    id += static_cast<int>(obs.size());
    step.nodes.insert(step.nodes.end(), obs.begin(), obs.end());
    d.steps.push_back(std::move(step));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# obs-impact dataset v1\n";
  out << "# split=" << d.split << "\n";
  out << "id,kind,lat,lon,time,role,values\n";
  auto write_row = [&](const MetNode& n, const char* role, const Eigen::VectorXd& values) {
    out << n.id << ',' << kind_name(n.kind) << ',' << format_double(n.location.lat) << ','
        << format_double(n.location.lon) << ',' << n.time_index << ',' << role << ',';
    for (int i = 0; i < values.size(); ++i) {
      if (i) out << ';';
      out << format_double(values(i));
    }
    out << '\n';
  };
  for (const TimeStep& step : d.steps) {
    for (const MetNode& n : step.nodes) {
      write_row(n, "attr", n.attributes);
      if (n.kind == NodeKind::NWP) {
        write_row(n, "label", step.labels.at(n.id));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  Dataset d;
  d.split = "train";
  std::map<int, size_t> step_index;  // t -> index into d.steps, ordered by t
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  bool saw_version = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (lineno == 1) {
        if (line != "# obs-impact dataset v1") {
          parse_fail(path, lineno, 1, "unsupported dataset version line '" + line + "'");
        }
        saw_version = true;
      } else if (line.rfind("# split=", 0) == 0) {
        d.split = line.substr(8);
      }
      continue;
    }
    if (!saw_version) parse_fail(path, lineno, 1, "missing '# obs-impact dataset v1' header");
    if (!saw_header) {
      if (line != "id,kind,lat,lon,time,role,values") {
        parse_fail(path, lineno, 1, "unexpected column header '" + line + "'");
      }
      saw_header = true;
      continue;
    }

    // Split into exactly 7 comma fields, tracking column offsets.
    std::vector<std::string> fields;
    std::vector<int> cols;
    int col = 1;
    std::string cur;
    cols.push_back(col);
    for (char c : line) {
      ++col;
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
        cols.push_back(col);
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 7) {
      parse_fail(path, lineno, 1, "expected 7 comma-separated fields, got " +
                                      std::to_string(fields.size()));
    }

    const int id = static_cast<int>(parse_number(fields[0], path, lineno, cols[0]));
    NodeKind kind;
    try {
      kind = kind_from_name(fields[1]);
    } catch (const std::invalid_argument& e) {
      parse_fail(path, lineno, cols[1], e.what());
    }
    const double lat = parse_number(fields[2], path, lineno, cols[2]);
    const double lon = parse_number(fields[3], path, lineno, cols[3]);
    const int t = static_cast<int>(parse_number(fields[4], path, lineno, cols[4]));
    const std::string& role = fields[5];
    if (role != "attr" && role != "label") {
      parse_fail(path, lineno, cols[5], "role must be 'attr' or 'label', got '" + role + "'");
    }

    std::vector<double> values;
    {
      std::string piece;
      int vcol = cols[6];
      std::istringstream vs(fields[6]);
      while (std::getline(vs, piece, ';')) {
        values.push_back(parse_number(piece, path, lineno, vcol));
        vcol += static_cast<int>(piece.size()) + 1;
      }
    }

    if (!step_index.count(t)) {
      step_index[t] = d.steps.size();
      d.steps.push_back(TimeStep{t, {}, {}});
    }
    TimeStep& step = d.steps[step_index[t]];

    if (role == "label") {
      if (kind != NodeKind::NWP) {
        parse_fail(path, lineno, cols[5], "label rows are only valid for NWP nodes");
      }
      if (values.size() != 4) {
        parse_fail(path, lineno, cols[6],
                   "label must have 4 values, got " + std::to_string(values.size()));
      }
      step.labels[id] = Eigen::Vector4d(values[0], values[1], values[2], values[3]);
    } else {
      if (static_cast<int>(values.size()) != attribute_count(kind)) {
        parse_fail(path, lineno, cols[6],
                   kind_name(kind) + " expects " + std::to_string(attribute_count(kind)) +
                       " attributes, got " + std::to_string(values.size()));
      }
      MetNode node;
      node.id = id;
      node.kind = kind;
      node.location = {lat, lon, kDefaultPressureHpa};
      node.time_index = t;
      node.attributes = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<int>(values.size()));
      try {
        node.validate();
      } catch (const std::invalid_argument& e) {
        parse_fail(path, lineno, cols[0], e.what());
      }
      step.nodes.push_back(std::move(node));
    }
  }

  // Reorder steps by time and check the NWP-label invariant.
  std::vector<TimeStep> ordered;
  ordered.reserve(d.steps.size());
  for (const auto& [t, idx] : step_index) ordered.push_back(std::move(d.steps[idx]));
  d.steps = std::move(ordered);
  for (const TimeStep& step : d.steps) {
    for (const MetNode& n : step.nodes) {
      if (n.kind == NodeKind::NWP && !step.labels.count(n.id)) {
        throw std::runtime_error(path + ": NWP node " + std::to_string(n.id) +
                                 " at t=" + std::to_string(step.t) + " has no label row");
      }
    }
  }
  return d;
}

}  // namespace obsimpact
