#pragma once

// Legacy ASCII VTK (STRUCTURED_POINTS) export of window grids.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fibra/cluster_map.hpp"
#include "fibra/error.hpp"
#include "fibra/features.hpp"
#include "fibra/io.hpp"

namespace fibra::vtk {

struct Field {
  std::string name;
  bool integer = true;
  std::vector<double> values;  // one per grid point, x-fastest
};

struct Grid {
  Dims3 dims;
  std::array<double, 3> origin{0, 0, 0};
  std::array<double, 3> spacing{1, 1, 1};
  std::vector<Field> fields;
};

inline void write(const std::filesystem::path& p, const Grid& g, const std::string& title = "fibra export") {
  for (const auto& f : g.fields)
    if (f.values.size() != g.dims.count()) fail(ErrorKind::InvalidParameter, "VTK field '" + f.name + "' has wrong size");
  auto out = io::open_out(p);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << g.dims.nx << ' ' << g.dims.ny << ' ' << g.dims.nz << '\n';
  out << "ORIGIN " << io::fmt_double(g.origin[0]) << ' ' << io::fmt_double(g.origin[1]) << ' '
      << io::fmt_double(g.origin[2]) << '\n';
  out << "SPACING " << io::fmt_double(g.spacing[0]) << ' ' << io::fmt_double(g.spacing[1]) << ' '
      << io::fmt_double(g.spacing[2]) << '\n';
  out << "POINT_DATA " << g.dims.count() << '\n';
  for (const auto& f : g.fields) {
    out << "SCALARS " << f.name << ' ' << (f.integer ? "int" : "double") << " 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      if (f.integer)
        out << static_cast<long long>(f.values[i]);
      else
        out << io::fmt_double(f.values[i]);
      out << ((i + 1) % 16 == 0 || i + 1 == f.values.size() ? '\n' : ' ');
    }
  }
}

/// Parses files produced by write().
inline Grid read(const std::filesystem::path& p) {
  auto in = io::open_in(p);
  auto bad = [&](const std::string& what) -> void { fail(ErrorKind::MalformedInput, p.string() + ": " + what); };
  std::string line;
  for (int i = 0; i < 4; ++i)
    if (!std::getline(in, line)) bad("truncated header");
  if (line != "DATASET STRUCTURED_POINTS") bad("not a STRUCTURED_POINTS dataset");
  Grid g;
  std::string key;
  std::size_t points = 0;
  in >> key >> g.dims.nx >> g.dims.ny >> g.dims.nz;
  if (key != "DIMENSIONS") bad("expected DIMENSIONS");
  in >> key >> g.origin[0] >> g.origin[1] >> g.origin[2];
  if (key != "ORIGIN") bad("expected ORIGIN");
  in >> key >> g.spacing[0] >> g.spacing[1] >> g.spacing[2];
  if (key != "SPACING") bad("expected SPACING");
  in >> key >> points;
  if (key != "POINT_DATA" || points != g.dims.count()) bad("bad POINT_DATA");
  while (in >> key) {
    if (key != "SCALARS") bad("expected SCALARS");
    Field f;
    std::string type, lut, lut_name;
    int comps = 0;
    in >> f.name >> type >> comps >> lut >> lut_name;
    f.integer = type == "int";
    f.values.resize(points);
    for (auto& v : f.values) {
      std::string tok;
      if (!(in >> tok)) bad("truncated field " + f.name);
      v = std::stod(tok);
    }
    g.fields.push_back(std::move(f));
  }
  return g;
}

/// Fields "class" (normal 0, anomaly 1, artefacts 2, ...) and "label" (raw); -1 where no window.
inline Grid from_cluster_map(const ClusterMap& m, std::array<double, 3> origin = {0, 0, 0},
                             std::array<double, 3> spacing = {1, 1, 1}) {
  Grid g;
  g.dims = m.grid;
  g.origin = origin;
  g.spacing = spacing;
  Field cls{"class", true, std::vector<double>(m.grid.count(), -1.0)};
  Field lab{"label", true, std::vector<double>(m.grid.count(), -1.0)};
  const auto display = m.display_classes();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& w = m.windows[i];
    const std::size_t k = m.grid.index(w.x, w.y, w.z);
    cls.values[k] = display[i];
    lab.values[k] = m.labels[i];
  }
  g.fields = {std::move(cls), std::move(lab)};
  return g;
}

/// Window geometry in voxel units: spacing = stride * cube edge, origin = first window centre.
inline std::pair<std::array<double, 3>, std::array<double, 3>> window_geometry(const FeatureGrid& f) {
  const double s = static_cast<double>(f.spec.stride * f.cube_edge);
  const double o = 0.5 * f.spec.window * f.cube_edge;
  return {{o, o, o}, {s, s, s}};
}

/// One field per attribute plus "N" and "present" (0 where the window was skipped).
inline Grid from_features(const FeatureGrid& f) {
  Grid g;
  g.dims = f.grid;
  std::tie(g.origin, g.spacing) = window_geometry(f);
  const std::size_t cells = f.grid.count();
  Field present{"present", true, std::vector<double>(cells, 0.0)};
  Field count{"N", true, std::vector<double>(cells, 0.0)};
  Field h{"H", false, std::vector<double>(cells, 0.0)};
  Field x{"X", false, std::vector<double>(cells, 0.0)}, y{"Y", false, std::vector<double>(cells, 0.0)},
      z{"Z", false, std::vector<double>(cells, 0.0)};
  for (const auto& fv : f.windows) {
    const std::size_t k = f.grid.index(fv.window.x, fv.window.y, fv.window.z);
    present.values[k] = 1;
    count.values[k] = static_cast<double>(fv.n);
    if (has_entropy(f.mode)) h.values[k] = fv.entropy;
    if (has_mean_dir(f.mode)) {
      x.values[k] = fv.mean.x();
      y.values[k] = fv.mean.y();
      z.values[k] = fv.mean.z();
    }
  }
  g.fields.push_back(std::move(present));
  g.fields.push_back(std::move(count));
  if (has_entropy(f.mode)) g.fields.push_back(std::move(h));
  if (has_mean_dir(f.mode)) {
    g.fields.push_back(std::move(x));
    g.fields.push_back(std::move(y));
    g.fields.push_back(std::move(z));
  }
  return g;
}

}  // namespace fibra::vtk
