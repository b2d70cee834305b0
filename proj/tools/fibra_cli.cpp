// fibra: anomaly detection in 3D fibre images.
//
//   fibra simulate    --out DIR [--seed N] [--preset NAME] [--config run.json]
//   fibra dirfield    --volume volume.raw --out directions.csv
//   fibra features    --dirfield directions.csv --out features.csv [--attributes mean_dir|entropy|both]
//   fibra cluster-sem --features features.csv --out labels.csv [--mixture mixture.json]
//   fibra cluster-awc --features features.csv --out labels.csv (--lambda L | --preset rsa|real)
//   fibra evaluate    --pred labels.csv (--truth truth.csv | --system system.json --features features.csv)
//   fibra export-vtk  (--labels labels.csv | --features features.csv) --out file.vtk
//   fibra pipeline    --config run.json [--seed N] [--out DIR]
//
// Exit status: 0 success, 2 validation error, 1 runtime error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fibra/fibra.hpp"

namespace {

using namespace fibra;

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out;

  // simulate
  std::optional<std::string> preset;
  std::vector<std::size_t> dims;
  std::optional<double> fraction, radius, length, blur, noise;

  // dirfield
  std::string volume;
  std::optional<double> sigma, threshold;
  std::optional<int> cube_edge;
  std::optional<std::uint32_t> min_voxels;

  // features
  std::string dirfield;
  std::optional<std::string> attributes, metric, standardize;
  std::optional<int> window, stride, min_samples;
  std::optional<double> entropy_constant;

  // clustering
  std::string features;
  std::optional<std::string> mixture, edges, awc_preset;
  std::optional<int> k_init, restarts, iterations, n0;
  std::optional<double> beta, lambda, growth;
  bool no_spatial = false;

  // evaluate / export
  std::string pred, truth, system, labels;
};

json config_section(const Options& o, const char* name) {
  if (!o.config) return json::object();
  const json j = io::read_json(*o.config);
  return j.value(name, json::object());
}

std::uint64_t config_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (o.config) {
    const json j = io::read_json(*o.config);
    if (j.contains("seed")) return j["seed"].get<std::uint64_t>();
  }
  return 1;
}

SimulateConfig simulate_config(const Options& o) {
  json s = config_section(o, "simulate");
  if (o.preset) s["preset"] = *o.preset;
  if (!o.dims.empty()) {
    require(o.dims.size() == 3, "--dims takes three values");
    s["dims"] = o.dims;
  }
  if (o.fraction) s["volume_fraction"] = *o.fraction;
  if (o.radius) s["fibre_radius"] = *o.radius;
  if (o.length) s["fibre_length"] = *o.length;
  if (o.blur) s["blur_sigma"] = *o.blur;
  if (o.noise) s["noise_sigma"] = *o.noise;
  return parse_simulate(s, config_seed(o));
}

DirectionParams direction_params(const Options& o) {
  json s = config_section(o, "directions");
  if (o.sigma) s["sigma"] = *o.sigma;
  if (o.threshold) s["threshold"] = *o.threshold;
  if (o.cube_edge) s["cube_edge"] = *o.cube_edge;
  if (o.min_voxels) s["min_voxels"] = *o.min_voxels;
  return parse_directions(s);
}

FeatureParams feature_params(const Options& o) {
  json s = config_section(o, "features");
  if (o.attributes) s["attributes"] = *o.attributes;
  if (o.metric) s["metric"] = *o.metric;
  if (o.window) s["window"] = *o.window;
  if (o.stride) s["stride"] = *o.stride;
  if (o.min_samples) s["min_samples"] = *o.min_samples;
  if (o.entropy_constant) s["entropy_constant"] = *o.entropy_constant;
  if (o.standardize) {
    if (*o.standardize == "on") s["standardize"] = true;
    else if (*o.standardize == "off") s["standardize"] = false;
    else if (*o.standardize == "auto") s["standardize"] = nullptr;
    else fail(ErrorKind::InvalidParameter, "--standardize must be auto, on or off");
  }
  return parse_features(s);
}

ClusterConfig cluster_config(const Options& o) {
  json s = config_section(o, "cluster");
  json sem = s.value("sem", json::object());
  json awc = s.value("awc", json::object());
  if (o.k_init) sem["k_init"] = *o.k_init;
  if (o.restarts) sem["restarts"] = *o.restarts;
  if (o.iterations) sem["max_iterations"] = *o.iterations;
  if (o.beta) sem["beta"] = *o.beta;
  if (o.no_spatial) sem["spatial"] = false;
  if (o.lambda) {
    awc["lambda"] = *o.lambda;
    awc.erase("preset");
  }
  if (o.awc_preset) awc["preset"] = *o.awc_preset;
  if (o.growth) awc["growth"] = *o.growth;
  if (o.n0) awc["initial_neighbours"] = *o.n0;
  s["sem"] = sem;
  s["awc"] = awc;
  return parse_cluster(s, config_seed(o));
}

int run(int argc, char** argv) {
  CLI::App app{"fibra: anomaly detection in 3D fibre-material images"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate a layered RSA fibre volume with ground truth");
  sim->add_option("--out", o.out, "Output directory")->required();
  sim->add_option("--seed", o.seed, "RNG seed");
  sim->add_option("--config", o.config, "Run manifest (uses its 'simulate' section)");
  sim->add_option("--preset", o.preset, "rotated-mean | raised-dispersion | homogeneous");
  sim->add_option("--dims", o.dims, "Volume size nx ny nz")->expected(3);
  sim->add_option("--fraction", o.fraction, "Target fibre volume fraction");
  sim->add_option("--radius", o.radius, "Fibre radius (voxels)");
  sim->add_option("--length", o.length, "Fibre length (voxels)");
  sim->add_option("--blur", o.blur, "Gaussian blur sigma (voxels)");
  sim->add_option("--noise", o.noise, "Additive noise sigma (gray levels)");

  auto* dir = app.add_subcommand("dirfield", "Estimate one fibre direction per cube");
  dir->add_option("--volume", o.volume, "Raw u8 volume (with .json sidecar)")->required();
  dir->add_option("--out", o.out, "Direction CSV")->required();
  dir->add_option("--config", o.config, "Run manifest (uses its 'directions' section)");
  dir->add_option("--sigma", o.sigma, "Hessian smoothing sigma (voxels)");
  dir->add_option("--threshold", o.threshold, "Fibre gray threshold (default: Otsu)");
  dir->add_option("--cube-edge", o.cube_edge, "Cube edge (voxels)");
  dir->add_option("--min-voxels", o.min_voxels, "Minimum valid voxels per cube");

  auto* feat = app.add_subcommand("features", "Compute window attributes");
  feat->add_option("--dirfield", o.dirfield, "Direction CSV")->required();
  feat->add_option("--out", o.out, "Feature CSV")->required();
  feat->add_option("--config", o.config, "Run manifest (uses its 'features' section)");
  feat->add_option("--attributes", o.attributes, "mean_dir | entropy | both");
  feat->add_option("--metric", o.metric, "axial | spherical");
  feat->add_option("--window", o.window, "Window edge (cubes)");
  feat->add_option("--stride", o.stride, "Window stride (cubes)");
  feat->add_option("--min-samples", o.min_samples, "Minimum valid cubes per window");
  feat->add_option("--standardize", o.standardize, "auto | on | off");
  feat->add_option("--entropy-constant", o.entropy_constant, "Additive entropy constant C1");

  auto* sem = app.add_subcommand("cluster-sem", "Spatial stochastic EM clustering");
  sem->add_option("--features", o.features, "Feature CSV")->required();
  sem->add_option("--out", o.out, "Label CSV")->required();
  sem->add_option("--mixture", o.mixture, "Fitted mixture JSON (default: <out>.mixture.json)");
  sem->add_option("--config", o.config, "Run manifest (uses its 'cluster.sem' section)");
  sem->add_option("--seed", o.seed, "RNG seed");
  sem->add_option("--k-init", o.k_init, "Initial number of components");
  sem->add_option("--beta", o.beta, "Spatial coupling");
  sem->add_option("--restarts", o.restarts, "Number of restarts");
  sem->add_option("--iterations", o.iterations, "Maximum iterations per restart");
  sem->add_flag("--no-spatial", o.no_spatial, "Disable the spatial step");

  auto* awc = app.add_subcommand("cluster-awc", "Adaptive weights clustering");
  awc->add_option("--features", o.features, "Feature CSV")->required();
  awc->add_option("--out", o.out, "Label CSV")->required();
  awc->add_option("--config", o.config, "Run manifest (uses its 'cluster.awc' section)");
  awc->add_option("--lambda", o.lambda, "Test threshold lambda");
  awc->add_option("--preset", o.awc_preset, "Lambda preset table row: rsa | real");
  awc->add_option("--edges", o.edges, "Final weight graph as edge-list CSV");
  awc->add_option("--growth", o.growth, "Radius growth factor");
  awc->add_option("--n0", o.n0, "Initial neighbour count");

  auto* eval = app.add_subcommand("evaluate", "Compare predicted labels with ground truth");
  eval->add_option("--pred", o.pred, "Predicted label CSV")->required();
  eval->add_option("--truth", o.truth, "Truth label CSV");
  eval->add_option("--system", o.system, "system.json from simulate (with --features)");
  eval->add_option("--features", o.features, "Feature CSV describing the window grid");
  eval->add_option("--out", o.out, "Report JSON")->required();

  auto* vtk_cmd = app.add_subcommand("export-vtk", "Write labels or features as legacy VTK");
  vtk_cmd->add_option("--labels", o.labels, "Label CSV");
  vtk_cmd->add_option("--features", o.features, "Feature CSV (exported itself unless --labels is given)");
  vtk_cmd->add_option("--out", o.out, "VTK file")->required();

  auto* pipe = app.add_subcommand("pipeline", "Run every stage from one run manifest");
  pipe->add_option("--config", o.config, "Run manifest JSON")->required();
  pipe->add_option("--seed", o.seed, "Override the manifest seed");
  pipe->add_option("--out", o.out, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string summary;
  if (*sim) {
    summary = run_simulate(simulate_config(o), o.out);
  } else if (*dir) {
    summary = run_dirfield(o.volume, direction_params(o), o.out);
  } else if (*feat) {
    summary = run_features(o.dirfield, feature_params(o), o.out);
  } else if (*sem) {
    const auto c = cluster_config(o);
    fs::path mixture = o.mixture ? fs::path(*o.mixture) : fs::path(o.out).replace_extension(".mixture.json");
    summary = run_cluster_sem(o.features, c.sem, o.out, mixture);
  } else if (*awc) {
    const auto c = cluster_config(o);
    if (!c.awc_preset && !o.lambda && !o.config) fail(ErrorKind::InvalidParameter, "give --lambda or --preset");
    std::optional<fs::path> edges;
    if (o.edges) edges = *o.edges;
    summary = run_cluster_awc(o.features, c.awc, c.awc_preset, o.out, edges);
  } else if (*eval) {
    ClusterMap truth;
    if (!o.truth.empty()) {
      truth = io::read_cluster_map(o.truth);
    } else if (!o.system.empty() && !o.features.empty()) {
      truth = truth_from(o.system, o.features);
    } else {
      fail(ErrorKind::InvalidParameter, "give --truth, or --system together with --features");
    }
    summary = run_evaluate(o.pred, truth, o.out);
  } else if (*vtk_cmd) {
    if (!o.labels.empty()) {
      const ClusterMap m = io::read_cluster_map(o.labels);
      std::array<double, 3> origin{0, 0, 0}, spacing{1, 1, 1};
      const json side = io::read_json(io::sidecar_path(o.labels));
      if (side.contains("origin")) origin = side["origin"].get<std::array<double, 3>>();
      if (side.contains("spacing")) spacing = side["spacing"].get<std::array<double, 3>>();
      vtk::write(o.out, vtk::from_cluster_map(m, origin, spacing), "fibra cluster labels");
      summary = "export-vtk: " + std::to_string(m.size()) + " labelled windows -> " + o.out;
    } else if (!o.features.empty()) {
      const FeatureGrid g = io::read_features(o.features);
      vtk::write(o.out, vtk::from_features(g), "fibra window features");
      summary = "export-vtk: " + std::to_string(g.windows.size()) + " feature windows -> " + o.out;
    } else {
      fail(ErrorKind::InvalidParameter, "give --labels or --features");
    }
  } else if (*pipe) {
    RunConfig c = load_run_config(*o.config);
    if (o.seed) {
      c.seed = *o.seed;
      c.simulate.rsa.seed = c.seed;
      c.cluster.sem.seed = c.seed;
    }
    if (!o.out.empty()) c.output_dir = o.out;
    for (const auto& line : run_pipeline(c)) std::cout << line << '\n';
    return 0;
  }
  std::cout << summary << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fibra::Error& e) {
    std::cerr << "fibra: " << e.what() << '\n';
    return e.is_validation() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "fibra: " << e.what() << '\n';
    return 1;
  }
}
