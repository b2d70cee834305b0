#pragma once

// Stage runners shared by the CLI subcommands and the `pipeline` chain. Every stage
// reads its inputs from disk and writes its outputs to disk, so a chained run and a
// sequence of individual stage runs produce the same files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "fibra/awc.hpp"
#include "fibra/direction_field.hpp"
#include "fibra/evaluate.hpp"
#include "fibra/features.hpp"
#include "fibra/io.hpp"
#include "fibra/rsa.hpp"
#include "fibra/sem.hpp"
#include "fibra/vtk.hpp"

namespace fibra {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct SimulateConfig {
  RsaParams rsa = rsa_preset("rotated-mean");
  double blur_sigma = 0.8;
  double noise_sigma = 8.0;
};

struct ClusterConfig {
  std::string method = "sem";  // "sem" or "awc"
  SemParams sem;
  AwcParams awc;
  std::optional<std::string> awc_preset;  // "rsa" or "real": lambda from the preset table
};

struct RunConfig {
  std::uint64_t seed = 1;
  fs::path output_dir = "run";
  SimulateConfig simulate;
  DirectionParams directions;
  FeatureParams features;
  ClusterConfig cluster;
};

// ---------------------------------------------------------------- config parsing

namespace config_detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) fail(ErrorKind::MalformedInput, "config section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(ErrorKind::MalformedInput, "unknown key '" + k + "' in config section '" + section + "'");
}

template <typename T>
void assign(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::MalformedInput, "bad value for '" + std::string(key) + "' in config section '" + section + "'");
  }
}

}  // namespace config_detail

inline SimulateConfig parse_simulate(const json& j, std::uint64_t seed) {
  using namespace config_detail;
  check_keys(j, {"preset", "dims", "fibre_radius", "fibre_length", "volume_fraction", "max_attempts", "normal_dirs",
                 "anomaly_dirs", "anomaly_region", "blur_sigma", "noise_sigma"},
             "simulate");
  SimulateConfig c;
  std::string preset = "rotated-mean";
  assign(j, "preset", preset, "simulate");
  Dims3 dims{200, 200, 300};
  if (j.contains("dims")) dims = io::dims_from(j["dims"], "config:simulate");
  c.rsa = rsa_preset(preset, dims);
  assign(j, "fibre_radius", c.rsa.fibre_radius, "simulate");
  assign(j, "fibre_length", c.rsa.fibre_length, "simulate");
  assign(j, "volume_fraction", c.rsa.volume_fraction, "simulate");
  assign(j, "max_attempts", c.rsa.max_attempts, "simulate");
  assign(j, "blur_sigma", c.blur_sigma, "simulate");
  assign(j, "noise_sigma", c.noise_sigma, "simulate");
  try {
    if (j.contains("normal_dirs")) c.rsa.normal_dirs = io::dirdist_from(j["normal_dirs"], "config:simulate");
    if (j.contains("anomaly_dirs")) c.rsa.anomaly_dirs = io::dirdist_from(j["anomaly_dirs"], "config:simulate");
    if (j.contains("anomaly_region")) c.rsa.anomaly = io::region_from(j["anomaly_region"], "config:simulate");
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedInput, std::string("config section 'simulate': ") + e.what());
  }
  c.rsa.seed = seed;
  c.rsa.validate();
  require(c.blur_sigma >= 0.0 && c.noise_sigma >= 0.0, "blur and noise sigma must be >= 0");
  return c;
}

inline DirectionParams parse_directions(const json& j) {
  using namespace config_detail;
  check_keys(j, {"sigma", "threshold", "cube_edge", "min_voxels"}, "directions");
  DirectionParams p;
  assign(j, "sigma", p.sigma, "directions");
  if (j.contains("threshold") && !j["threshold"].is_null()) {
    double t = 0;
    assign(j, "threshold", t, "directions");
    p.threshold = t;
  }
  assign(j, "cube_edge", p.cube_edge, "directions");
  assign(j, "min_voxels", p.min_voxels, "directions");
  p.validate();
  return p;
}

inline Metric parse_metric(const std::string& s) {
  if (s == "axial") return Metric::axial;
  if (s == "spherical") return Metric::spherical;
  fail(ErrorKind::InvalidParameter, "unknown metric '" + s + "'");
}

inline FeatureParams parse_features(const json& j) {
  using namespace config_detail;
  check_keys(j, {"window", "stride", "min_samples", "attributes", "metric", "standardize", "entropy_constant"},
             "features");
  FeatureParams p;
  assign(j, "window", p.spec.window, "features");
  assign(j, "stride", p.spec.stride, "features");
  assign(j, "min_samples", p.spec.min_samples, "features");
  std::string mode = "mean_dir", metric = "axial";
  assign(j, "attributes", mode, "features");
  assign(j, "metric", metric, "features");
  p.mode = parse_attribute_mode(mode);
  p.metric = parse_metric(metric);
  if (j.contains("standardize") && !j["standardize"].is_null()) {
    bool s = false;
    assign(j, "standardize", s, "features");
    p.standardize = s;
  }
  assign(j, "entropy_constant", p.constants.additive, "features");
  p.spec.validate();
  return p;
}

inline ClusterConfig parse_cluster(const json& j, std::uint64_t seed) {
  using namespace config_detail;
  check_keys(j, {"method", "sem", "awc"}, "cluster");
  ClusterConfig c;
  assign(j, "method", c.method, "cluster");
  if (c.method != "sem" && c.method != "awc") fail(ErrorKind::InvalidParameter, "cluster method must be sem or awc");
  c.sem.seed = seed;
  if (j.contains("sem")) {
    const auto& s = j["sem"];
    check_keys(s, {"k_init", "max_iterations", "beta", "spatial", "prune_min", "convergence", "restarts"}, "cluster.sem");
    assign(s, "k_init", c.sem.k_init, "cluster.sem");
    assign(s, "max_iterations", c.sem.max_iterations, "cluster.sem");
    assign(s, "beta", c.sem.beta, "cluster.sem");
    assign(s, "spatial", c.sem.spatial, "cluster.sem");
    if (s.contains("prune_min") && !s["prune_min"].is_null()) {
      std::size_t m = 0;
      assign(s, "prune_min", m, "cluster.sem");
      c.sem.prune_min = m;
    }
    assign(s, "convergence", c.sem.convergence, "cluster.sem");
    assign(s, "restarts", c.sem.restarts, "cluster.sem");
  }
  if (j.contains("awc")) {
    const auto& a = j["awc"];
    check_keys(a, {"lambda", "preset", "initial_neighbours", "growth", "max_steps"}, "cluster.awc");
    assign(a, "lambda", c.awc.lambda, "cluster.awc");
    if (a.contains("preset") && !a["preset"].is_null()) {
      std::string p;
      assign(a, "preset", p, "cluster.awc");
      c.awc_preset = p;
    }
    assign(a, "initial_neighbours", c.awc.initial_neighbours, "cluster.awc");
    assign(a, "growth", c.awc.growth, "cluster.awc");
    assign(a, "max_steps", c.awc.max_steps, "cluster.awc");
  }
  c.sem.validate();
  c.awc.validate();
  return c;
}

inline RunConfig parse_run_config(const json& j) {
  using namespace config_detail;
  check_keys(j, {"seed", "output_dir", "simulate", "directions", "features", "cluster"}, "root");
  RunConfig c;
  assign(j, "seed", c.seed, "root");
  std::string out = c.output_dir.string();
  assign(j, "output_dir", out, "root");
  c.output_dir = out;
  c.simulate = parse_simulate(j.value("simulate", json::object()), c.seed);
  c.directions = parse_directions(j.value("directions", json::object()));
  c.features = parse_features(j.value("features", json::object()));
  c.cluster = parse_cluster(j.value("cluster", json::object()), c.seed);
  return c;
}

inline RunConfig load_run_config(const fs::path& p) { return parse_run_config(io::read_json(p)); }

// ---------------------------------------------------------------- stages

struct SimulateOutputs {
  fs::path volume, system, fibres;
};

inline SimulateOutputs simulate_paths(const fs::path& dir) {
  return {dir / "volume.raw", dir / "system.json", dir / "fibres.csv"};
}

inline std::string run_simulate(const SimulateConfig& c, const fs::path& out_dir) {
  const FibreSystem fsys = generate_rsa(c.rsa);
  const Volume3D vol = voxelize(fsys, c.blur_sigma, c.noise_sigma, splitmix64(c.rsa.seed));
  const auto paths = simulate_paths(out_dir);
  io::write_volume(paths.volume, vol);
  io::write_fibres_csv(paths.fibres, fsys);
  io::write_system_json(paths.system, fsys, paths.fibres.filename().string());
  std::size_t anomalous = 0;
  for (const auto& cyl : fsys.cylinders) anomalous += cyl.is_anomaly;
  std::string s = "simulate: " + std::to_string(fsys.cylinders.size()) + " fibres (" + std::to_string(anomalous) +
                  " anomalous), volume fraction " + io::fmt_double(fsys.placed_fraction) + " -> " + paths.volume.string();
  if (fsys.jammed) s += " [JammedBeforeTarget]";
  return s;
}

inline std::string run_dirfield(const fs::path& volume, const DirectionParams& p, const fs::path& out) {
  const Volume3D vol = io::read_volume(volume);
  const DirectionField df = estimate_direction_field(vol, p);
  io::write_direction_csv(out, df);
  return "dirfield: " + std::to_string(df.valid_count()) + "/" + std::to_string(df.cells.size()) +
         " valid cubes -> " + out.string();
}

inline std::string run_features(const fs::path& dirfield, const FeatureParams& p, const fs::path& out) {
  const DirectionField df = io::read_direction_csv(dirfield);
  const FeatureGrid g = extract_features(df, p);
  io::write_features(out, g);
  std::string s = "features: " + std::to_string(g.windows.size()) + "/" + std::to_string(g.grid.count()) +
                  " windows (" + to_string(g.mode) + ") -> " + out.string();
  if (g.degenerate_count() > 0) s += " [DegenerateWindow x" + std::to_string(g.degenerate_count()) + "]";
  return s;
}

inline json geometry_json(const FeatureGrid& g) {
  const auto [origin, spacing] = vtk::window_geometry(g);
  return {{"origin", origin}, {"spacing", spacing}};
}

inline json mixture_json(const SemResult& r) {
  json j;
  json comps = json::array();
  for (const auto& c : r.components) {
    json cj;
    cj["weight"] = c.weight;
    cj["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> cov(c.covariance.rows());
    for (Eigen::Index a = 0; a < c.covariance.rows(); ++a)
      for (Eigen::Index b = 0; b < c.covariance.cols(); ++b) cov[a].push_back(c.covariance(a, b));
    cj["covariance"] = cov;
    comps.push_back(cj);
  }
  j["components"] = comps;
  j["trace"] = r.trace;
  j["restart_loglik"] = r.restart_loglik;
  j["kept_restart"] = r.kept_restart;
  j["iterations"] = r.iterations;
  j["surviving_components"] = r.surviving;
  return j;
}

inline std::string run_cluster_sem(const fs::path& features, const SemParams& p, const fs::path& labels,
                                   const fs::path& mixture) {
  const FeatureGrid g = io::read_features(features);
  const SemResult r = sem_fit(g, p);
  io::write_cluster_map(labels, r.map, geometry_json(g));
  io::write_json(mixture, mixture_json(r));
  std::size_t anomalies = 0;
  for (std::size_t i = 0; i < r.map.size(); ++i) anomalies += r.map.is_anomaly(i);
  return "cluster-sem: " + std::to_string(r.surviving) + " surviving components merged to " +
         std::to_string(r.map.cluster_count()) + " clusters, " + std::to_string(anomalies) + "/" +
         std::to_string(r.map.size()) + " anomaly windows -> " + labels.string();
}

inline std::string run_cluster_awc(const fs::path& features, AwcParams p, const std::optional<std::string>& preset,
                                   const fs::path& labels, const std::optional<fs::path>& edges) {
  const FeatureGrid g = io::read_features(features);
  if (preset) p.lambda = awc_preset_lambda(*preset, g.mode);
  const AwcResult r = awc_fit(g, p);
  json extra = geometry_json(g);
  extra["lambda"] = p.lambda;
  io::write_cluster_map(labels, r.map, extra);
  if (edges) {
    auto out = io::open_out(*edges);
    out << "i,j\n";
    for (std::size_t i = 0; i < r.weights.size(); ++i)
      for (std::size_t j = i + 1; j < r.weights.size(); ++j)
        if (r.weights.get(i, j)) out << i << ',' << j << '\n';
  }
  std::size_t anomalies = 0;
  for (std::size_t i = 0; i < r.map.size(); ++i) anomalies += r.map.is_anomaly(i);
  return "cluster-awc: lambda " + io::fmt_double(p.lambda) + ", " + std::to_string(r.map.cluster_count()) +
         " clusters, " + std::to_string(anomalies) + "/" + std::to_string(r.map.size()) + " anomaly windows -> " +
         labels.string();
}

/// Ground-truth labels for the window grid described by a feature file's sidecar.
inline ClusterMap truth_from(const fs::path& system, const fs::path& features) {
  const FibreSystem fsys = io::read_system_json(system, false);
  const FeatureGrid g = io::read_features(features);
  ClusterMap truth = ground_truth_labels(fsys, g.spec, g.cube_edge);
  if (!(truth.grid == g.grid)) fail(ErrorKind::GridMismatch, "system dimensions do not match the feature grid");
  return truth;
}

inline json report_json(const EvaluationReport& r) {
  return {{"windows", r.windows},
          {"misclassification", r.misclassification},
          {"swapped", r.swapped},
          {"confusion",
           {{"true_positive", r.true_positive},
            {"false_positive", r.false_positive},
            {"false_negative", r.false_negative},
            {"true_negative", r.true_negative}}},
          {"anomaly", {{"precision", r.anomaly_precision}, {"recall", r.anomaly_recall}}},
          {"normal", {{"precision", r.normal_precision}, {"recall", r.normal_recall}}},
          {"rand_index", r.rand_index},
          {"cluster_count", r.cluster_count},
          {"truth_anomalies", r.truth_anomalies}};
}

inline std::string run_evaluate(const fs::path& pred, const ClusterMap& truth, const fs::path& out) {
  const EvaluationReport r = evaluate(io::read_cluster_map(pred), truth);
  io::write_json(out, report_json(r));
  return "evaluate: misclassification " + io::fmt_double(r.misclassification) + ", Rand index " +
         io::fmt_double(r.rand_index) + ", " + std::to_string(r.cluster_count) + " clusters -> " + out.string();
}

struct PipelineOutputs {
  SimulateOutputs sim;
  fs::path directions, features, labels, mixture, edges, truth, report;
};

inline PipelineOutputs pipeline_paths(const fs::path& dir) {
  return {simulate_paths(dir),  dir / "directions.csv", dir / "features.csv", dir / "labels.csv",
          dir / "mixture.json", dir / "edges.csv",      dir / "truth.csv",    dir / "report.json"};
}

/// Runs every stage in order; returns one summary line per stage.
inline std::vector<std::string> run_pipeline(const RunConfig& c) {
  const auto p = pipeline_paths(c.output_dir);
  std::vector<std::string> log;
  log.push_back(run_simulate(c.simulate, c.output_dir));
  log.push_back(run_dirfield(p.sim.volume, c.directions, p.directions));
  log.push_back(run_features(p.directions, c.features, p.features));
  if (c.cluster.method == "sem")
    log.push_back(run_cluster_sem(p.features, c.cluster.sem, p.labels, p.mixture));
  else
    log.push_back(run_cluster_awc(p.features, c.cluster.awc, c.cluster.awc_preset, p.labels, p.edges));
  const ClusterMap truth = truth_from(p.sim.system, p.features);
  io::write_cluster_map(p.truth, truth);
  log.push_back(run_evaluate(p.labels, truth, p.report));
  return log;
}

}  // namespace fibra
