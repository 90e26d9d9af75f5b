#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obsimpact/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace obsimpact;

namespace {

FieldSpec small_spec() {
  FieldSpec spec;
  spec.seed = 42;
  spec.region = {30.0, 33.0, 120.0, 124.5};
  spec.n_bumps = 3;
  return spec;
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool nodes_equal(const MetNode& a, const MetNode& b) {
  return a.id == b.id && a.kind == b.kind && a.location.lat == b.location.lat &&
         a.location.lon == b.location.lon && a.time_index == b.time_index &&
         a.attributes == b.attributes;
}

}  // namespace

TEST_CASE("fields are deterministic in (spec, t, lat, lon)") {
  const FieldSpec spec = small_spec();
  const FieldSet f1(spec), f2(spec);
  for (Variable v : {Variable::U, Variable::T, Variable::TB, Variable::BA}) {
    CHECK(f1.value(v, 31.0, 121.0, 3) == f2.value(v, 31.0, 121.0, 3));
  }
}

TEST_CASE("zero advection freezes the fields") {
  FieldSpec spec = small_spec();
  spec.advection_deg_per_step = 0.0;
  const FieldSet f(spec);
  for (int t = 0; t < 4; ++t) {
    CHECK(f.value(Variable::T, 31.2, 122.0, t) == f.value(Variable::T, 31.2, 122.0, 0));
  }
}

TEST_CASE("T field matches an independently scripted bump-sum evaluation") {
  // Re-derives the documented formula: offset + sum of gaussian bumps with
  // drifted centers, from the same seeded parameter draws.
  FieldSpec spec = small_spec();
  const FieldSet f(spec);

  std::mt19937_64 rng(spec.seed * 1000003ULL + 2ULL);  // T stream
  std::uniform_real_distribution<double> ulat(spec.region.lat_min - 5.0, spec.region.lat_max + 5.0);
  std::uniform_real_distribution<double> ulon(spec.region.lon_min - 5.0, spec.region.lon_max + 5.0);
  std::uniform_real_distribution<double> uamp(-8.0, 8.0);
  std::uniform_real_distribution<double> usigma(3.0, 8.0);
  std::uniform_real_distribution<double> uangle(0.0, 2.0 * M_PI);
  struct B { double lat0, lon0, amp, sigma, dlat, dlon; };
  std::vector<B> bumps;
  for (int b = 0; b < spec.n_bumps; ++b) {
    B bump{};
    bump.lat0 = ulat(rng);
    bump.lon0 = ulon(rng);
    bump.amp = uamp(rng);
    bump.sigma = usigma(rng);
    const double a = uangle(rng);
    bump.dlat = std::sin(a);
    bump.dlon = std::cos(a);
    bumps.push_back(bump);
  }
  auto oracle = [&](double lat, double lon, int t) {
    double v = 250.0;
    for (const B& b : bumps) {
      const double clat = b.lat0 + b.dlat * spec.advection_deg_per_step * t;
      const double clon = b.lon0 + b.dlon * spec.advection_deg_per_step * t;
      const double d2 = (lat - clat) * (lat - clat) + (lon - clon) * (lon - clon);
      v += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
    }
    return v;
  };

  const double probes[5][2] = {{30.5, 120.5}, {31.0, 123.0}, {32.9, 124.0}, {30.1, 122.2},
                               {31.7, 121.1}};
  for (const auto& p : probes) {
    CHECK(f.value(Variable::T, p[0], p[1], 2) == doctest::Approx(oracle(p[0], p[1], 2)).epsilon(1e-9));
  }
}

TEST_CASE("nwp grid has the documented point count and label semantics") {
  FieldSpec spec = small_spec();
  spec.region = {20.0, 50.0, 100.0, 145.0};
  spec.grid_spacing_deg = 0.45;
  std::unordered_map<int, Eigen::Vector4d> labels;
  const auto nodes = sample_nwp_grid(spec, 1, &labels);
  const int expect = (static_cast<int>(std::floor(30.0 / 0.45)) + 1) *
                     (static_cast<int>(std::floor(45.0 / 0.45)) + 1);
  CHECK(static_cast<int>(nodes.size()) == expect);
  CHECK(labels.size() == nodes.size());

  // Any grid point's label equals the field evaluated there at t.
  const FieldSet f(spec);
  const MetNode& probe = nodes[nodes.size() / 2];
  for (int v = 0; v < 4; ++v) {
    CHECK(labels.at(probe.id)(v) ==
          f.value(static_cast<Variable>(v), probe.location.lat, probe.location.lon, 1));
  }
}

TEST_CASE("zero advection makes NWP attributes equal labels") {
  FieldSpec spec = small_spec();
  spec.advection_deg_per_step = 0.0;
  std::unordered_map<int, Eigen::Vector4d> labels;
  const auto nodes = sample_nwp_grid(spec, 1, &labels);
  for (const MetNode& n : nodes) {
    CHECK((n.attributes - labels.at(n.id)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("observations carry the kind's variable subset") {
  const FieldSpec spec = small_spec();
  const auto obs = sample_observations(spec, 1, {{NodeKind::AIRCRAFT, 3}}, 100);
  REQUIRE(obs.size() == 3);
  for (const MetNode& n : obs) {
    CHECK(n.kind == NodeKind::AIRCRAFT);
    CHECK(n.attributes.size() == 3);  // (U, V, T)
    CHECK(n.id >= 100);
  }
}

TEST_CASE("zero noise observations equal the field exactly") {
  FieldSpec spec = small_spec();
  for (auto& [v, sd] : spec.noise_sd) sd = 0.0;
  const FieldSet f(spec);
  const auto obs = sample_observations(spec, 2, {{NodeKind::SONDE, 5}}, 0);
  for (const MetNode& n : obs) {
    const auto& vars = variables_for(n.kind);
    for (size_t v = 0; v < vars.size(); ++v) {
      CHECK(n.attributes(static_cast<int>(v)) ==
            f.value(vars[v], n.location.lat, n.location.lon, 2));
    }
  }
}

TEST_CASE("observation noise has the configured standard deviation") {
  FieldSpec spec = small_spec();
  spec.noise_sd[Variable::TB] = 0.8;
  const FieldSet f(spec);
  // 100000 samples via many GK2A observations (1 TB attribute each).
  const auto obs = sample_observations(spec, 1, {{NodeKind::GK2A, 100000}}, 0);
  double sum = 0.0, sq = 0.0;
  for (const MetNode& n : obs) {
    const double r = n.attributes(0) - f.value(Variable::TB, n.location.lat, n.location.lon, 1);
    sum += r;
    sq += r * r;
  }
  const double n = static_cast<double>(obs.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(sd == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("TB correlates with T over the grid by construction") {
  FieldSpec spec = small_spec();
  const FieldSet f(spec);
  double st = 0, stb = 0, stt = 0, stbtb = 0, sttb = 0;
  int n = 0;
  for (double lat = spec.region.lat_min; lat <= spec.region.lat_max; lat += 0.2) {
    for (double lon = spec.region.lon_min; lon <= spec.region.lon_max; lon += 0.2) {
      const double t = f.value(Variable::T, lat, lon, 1);
      const double tb = f.value(Variable::TB, lat, lon, 1);
      st += t; stb += tb; stt += t * t; stbtb += tb * tb; sttb += t * tb;
      ++n;
    }
  }
  const double cov = sttb / n - (st / n) * (stb / n);
  const double var_t = stt / n - (st / n) * (st / n);
  const double var_tb = stbtb / n - (stb / n) * (stb / n);
  CHECK(cov / std::sqrt(var_t * var_tb) > 0.5);
}

TEST_CASE("dataset save/load round trip") {
  const FieldSpec spec = small_spec();
  const Dataset d = generate_dataset(spec, 1, 4, {{NodeKind::AIRCRAFT, 4}, {NodeKind::IASI, 2}},
                                     "train");
  const std::string path = temp_file("obsimpact_roundtrip.csv");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);

  CHECK(back.split == d.split);
  REQUIRE(back.steps.size() == d.steps.size());
  for (size_t s = 0; s < d.steps.size(); ++s) {
    CHECK(back.steps[s].t == d.steps[s].t);
    REQUIRE(back.steps[s].nodes.size() == d.steps[s].nodes.size());
    for (size_t i = 0; i < d.steps[s].nodes.size(); ++i) {
      CHECK(nodes_equal(back.steps[s].nodes[i], d.steps[s].nodes[i]));
    }
    for (const auto& [id, label] : d.steps[s].labels) {
      CHECK(back.steps[s].labels.at(id) == label);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("parser reports malformed input with line numbers") {
  const std::string path = temp_file("obsimpact_badfile.csv");

  {
    std::ofstream out(path);
    out << "# obs-impact dataset v1\n"
        << "id,kind,lat,lon,time,role,values\n"
        << "0,SONDE,30,120,1,attr,1;2;3\n";  // SONDE needs 4 values
  }
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":3:"), std::runtime_error);

  {
    std::ofstream out(path);
    out << "# obs-impact dataset v1\n"
        << "id,kind,lat,lon,time,role,values\n"
        << "0,DRONE,30,120,1,attr,1\n";  // unknown kind
  }
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);

  {
    std::ofstream out(path);
    out << "not a dataset\n";
  }
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("hand-written fixture parses to the exact values") {
  const std::string path = temp_file("obsimpact_fixture.csv");
  {
    std::ofstream out(path);
    out << "# obs-impact dataset v1\n"
        << "# split=test\n"
        << "id,kind,lat,lon,time,role,values\n"
        << "7,NWP,31.5,121.25,2,attr,1.5;-2;260.25;0.004\n"
        << "7,NWP,31.5,121.25,2,label,1.25;-2.5;261;0.0035\n"
        << "8,GPSRO,30.75,120,2,attr,0.0125\n";
  }
  const Dataset d = load_dataset(path);
  CHECK(d.split == "test");
  REQUIRE(d.steps.size() == 1);
  REQUIRE(d.steps[0].nodes.size() == 2);
  const MetNode& nwp = d.steps[0].nodes[0];
  CHECK(nwp.id == 7);
  CHECK(nwp.kind == NodeKind::NWP);
  CHECK(nwp.location.lat == 31.5);
  CHECK(nwp.attributes(2) == 260.25);
  CHECK(d.steps[0].labels.at(7)(3) == 0.0035);
  const MetNode& gpsro = d.steps[0].nodes[1];
  CHECK(gpsro.kind == NodeKind::GPSRO);
  CHECK(gpsro.attributes(0) == 0.0125);
  std::remove(path.c_str());
}
