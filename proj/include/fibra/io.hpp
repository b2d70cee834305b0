#pragma once

// On-disk formats: raw u8 volumes with a JSON sidecar, and CSV tables (with JSON
// sidecars for grid metadata) for fibres, direction fields, features and labels.

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fibra/cluster_map.hpp"
#include "fibra/direction_field.hpp"
#include "fibra/error.hpp"
#include "fibra/features.hpp"
#include "fibra/rsa.hpp"
#include "fibra/volume.hpp"

namespace fibra::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Sidecar path: same stem, ".json" extension.
inline fs::path sidecar_path(const fs::path& p) {
  fs::path s = p;
  s.replace_extension(".json");
  return s;
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
  ensure_parent(p);
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorKind::Io, "cannot open '" + p.string() + "' for writing");
  return out;
}

inline std::ifstream open_in(const fs::path& p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorKind::MalformedInput, "cannot read '" + p.string() + "'");
  return in;
}

inline void write_json(const fs::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& p) {
  auto in = open_in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedInput, p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- CSV reading

class CsvReader {
 public:
  CsvReader(const fs::path& path, std::vector<std::string> expected_header)
      : path_(path), in_(open_in(path)), header_(std::move(expected_header)) {
    std::string line;
    if (!std::getline(in_, line)) error("missing header");
    ++line_no_;
    strip_cr(line);
    if (split(line) != header_) error("unexpected header '" + line + "'");
  }

  /// Next row; false at end of file. Blank lines are skipped.
  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      strip_cr(line);
      if (line.empty()) continue;
      fields_ = split(line);
      if (fields_.size() != header_.size())
        error("expected " + std::to_string(header_.size()) + " fields, got " + std::to_string(fields_.size()));
      return true;
    }
    return false;
  }

  const std::string& field(std::size_t k) const { return fields_[k]; }
  bool empty(std::size_t k) const { return fields_[k].empty(); }

  double real(std::size_t k) const {
    const auto& s = fields_[k];
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) error("bad number '" + s + "' in column " + header_[k]);
    return v;
  }
  double real_or_nan(std::size_t k) const { return empty(k) ? std::nan("") : real(k); }

  long long integer(std::size_t k) const {
    const auto& s = fields_[k];
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) error("bad integer '" + s + "' in column " + header_[k]);
    return v;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::MalformedInput, path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  }

  fs::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::vector<std::string> fields_;
  std::size_t line_no_ = 0;
};

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

inline json dims_json(const Dims3& d) { return json::array({d.nx, d.ny, d.nz}); }

inline Dims3 dims_from(const json& j, const fs::path& where) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::MalformedInput, where.string() + ": dims must be [nx,ny,nz]");
  for (const auto& v : j)
    if (!v.is_number_unsigned()) fail(ErrorKind::MalformedInput, where.string() + ": dims must be non-negative integers");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

template <typename T>
T get_field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) fail(ErrorKind::MalformedInput, where.string() + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedInput, where.string() + ": bad value for '" + key + "'");
  }
}

// ---------------------------------------------------------------- volumes

inline void write_volume(const fs::path& raw, const Volume3D& vol) {
  vol.validate();
  {
    auto out = open_out(raw, true);
    out.write(reinterpret_cast<const char*>(vol.voxels.data()), static_cast<std::streamsize>(vol.voxels.size()));
    if (!out) fail(ErrorKind::Io, "short write to '" + raw.string() + "'");
  }
  json side;
  side["dims"] = dims_json(vol.dims);
  side["dtype"] = "u8";
  side["order"] = "x-fastest";
  write_json(sidecar_path(raw), side);
}

inline Volume3D read_volume(const fs::path& raw) {
  const fs::path sc = sidecar_path(raw);
  const json side = read_json(sc);
  Volume3D vol(dims_from(side.value("dims", json()), sc));
  if (side.value("dtype", "") != "u8") fail(ErrorKind::MalformedInput, sc.string() + ": dtype must be \"u8\"");
  if (side.value("order", "") != "x-fastest")
    fail(ErrorKind::MalformedInput, sc.string() + ": order must be \"x-fastest\"");
  if (side.contains("spacing")) vol.spacing = side["spacing"].get<std::array<double, 3>>();
  auto in = open_in(raw, true);
  in.read(reinterpret_cast<char*>(vol.voxels.data()), static_cast<std::streamsize>(vol.voxels.size()));
  if (static_cast<std::size_t>(in.gcount()) != vol.voxels.size() || in.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::MalformedInput, raw.string() + ": file size does not match dims " + side["dims"].dump());
  return vol;
}

// ---------------------------------------------------------------- fibre systems

inline const std::vector<std::string> kFibreHeader = {"cx", "cy", "cz", "ax", "ay", "az", "radius", "half_length",
                                                      "is_anomaly"};

inline json region_json(const AnomalyRegion& r) {
  json j;
  switch (r.kind) {
    case AnomalyRegion::Kind::none: j["kind"] = "none"; break;
    case AnomalyRegion::Kind::box:
      j["kind"] = "box";
      j["lo"] = {r.lo.x(), r.lo.y(), r.lo.z()};
      j["hi"] = {r.hi.x(), r.hi.y(), r.hi.z()};
      break;
    case AnomalyRegion::Kind::ball:
      j["kind"] = "ball";
      j["center"] = {r.center.x(), r.center.y(), r.center.z()};
      j["radius"] = r.radius;
      break;
  }
  return j;
}

inline Vec3 vec_from(const json& j, const fs::path& where) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::MalformedInput, where.string() + ": expected a 3-vector");
  auto v = j.get<std::array<double, 3>>();
  return Vec3(v[0], v[1], v[2]);
}

inline AnomalyRegion region_from(const json& j, const fs::path& where) {
  const std::string kind = j.value("kind", "none");
  if (kind == "none") return {};
  if (kind == "box") return AnomalyRegion::make_box(vec_from(j.at("lo"), where), vec_from(j.at("hi"), where));
  if (kind == "ball") return AnomalyRegion::make_ball(vec_from(j.at("center"), where), j.at("radius").get<double>());
  fail(ErrorKind::MalformedInput, where.string() + ": unknown region kind '" + kind + "'");
}

inline json dirdist_json(const DirectionDistribution& d) {
  return {{"mean_axis", {d.mean_axis.x(), d.mean_axis.y(), d.mean_axis.z()}}, {"kappa", d.kappa}};
}

inline DirectionDistribution dirdist_from(const json& j, const fs::path& where) {
  return {vec_from(j.at("mean_axis"), where), j.at("kappa").get<double>()};
}

inline void write_fibres_csv(const fs::path& p, const FibreSystem& fs) {
  auto out = open_out(p);
  out << join(kFibreHeader) << '\n';
  for (const auto& c : fs.cylinders) {
    out << fmt_double(c.center.x()) << ',' << fmt_double(c.center.y()) << ',' << fmt_double(c.center.z()) << ','
        << fmt_double(c.axis.x()) << ',' << fmt_double(c.axis.y()) << ',' << fmt_double(c.axis.z()) << ','
        << fmt_double(c.radius) << ',' << fmt_double(c.half_length) << ',' << (c.is_anomaly ? 1 : 0) << '\n';
  }
}

inline std::vector<Cylinder> read_fibres_csv(const fs::path& p) {
  CsvReader r(p, kFibreHeader);
  std::vector<Cylinder> out;
  while (r.next()) {
    Cylinder c;
    c.center = Vec3(r.real(0), r.real(1), r.real(2));
    try {
      c.axis = axis_from(Vec3(r.real(3), r.real(4), r.real(5)));
    } catch (const Error&) {
      r.error("fibre axis has zero length");
    }
    c.radius = r.real(6);
    c.half_length = r.real(7);
    if (!(c.radius > 0.0) || !(c.half_length > 0.0)) r.error("radius and half_length must be > 0");
    c.is_anomaly = r.integer(8) != 0;
    out.push_back(c);
  }
  return out;
}

/// System metadata (everything except the cylinder list).
inline void write_system_json(const fs::path& p, const FibreSystem& fs, const std::string& fibres_csv) {
  json j;
  j["dims"] = dims_json(fs.dims);
  j["anomaly_region"] = region_json(fs.anomaly);
  j["normal_dirs"] = dirdist_json(fs.normal_dirs);
  j["anomaly_dirs"] = dirdist_json(fs.anomaly_dirs);
  j["target_fraction"] = fs.target_fraction;
  j["placed_fraction"] = fs.placed_fraction;
  j["jammed"] = fs.jammed;
  j["fibre_count"] = fs.cylinders.size();
  j["fibres"] = fibres_csv;
  write_json(p, j);
}

/// Reads system metadata; the cylinder list is loaded when `with_fibres` is set.
inline FibreSystem read_system_json(const fs::path& p, bool with_fibres = true) {
  const json j = read_json(p);
  FibreSystem fs;
  try {
    fs.dims = dims_from(j.at("dims"), p);
    fs.anomaly = region_from(j.at("anomaly_region"), p);
    fs.normal_dirs = dirdist_from(j.at("normal_dirs"), p);
    fs.anomaly_dirs = dirdist_from(j.at("anomaly_dirs"), p);
    fs.target_fraction = j.at("target_fraction").get<double>();
    fs.placed_fraction = j.at("placed_fraction").get<double>();
    fs.jammed = j.at("jammed").get<bool>();
    if (with_fibres && j.contains("fibres")) fs.cylinders = read_fibres_csv(p.parent_path() / j["fibres"].get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedInput, p.string() + ": " + e.what());
  }
  return fs;
}

// ---------------------------------------------------------------- direction fields

inline const std::vector<std::string> kDirectionHeader = {"ix", "iy", "iz", "x", "y", "z", "count", "valid"};

inline void write_direction_csv(const fs::path& p, const DirectionField& df) {
  auto out = open_out(p);
  out << join(kDirectionHeader) << '\n';
  for (std::size_t z = 0; z < df.grid.nz; ++z)
    for (std::size_t y = 0; y < df.grid.ny; ++y)
      for (std::size_t x = 0; x < df.grid.nx; ++x) {
        const auto& c = df.at(x, y, z);
        out << x << ',' << y << ',' << z << ',';
        if (c.valid)
          out << fmt_double(c.axis.x()) << ',' << fmt_double(c.axis.y()) << ',' << fmt_double(c.axis.z());
        else
          out << ",,";
        out << ',' << c.count << ',' << (c.valid ? 1 : 0) << '\n';
      }
  json side;
  side["grid"] = dims_json(df.grid);
  side["cube_edge"] = df.cube_edge;
  write_json(sidecar_path(p), side);
}

inline DirectionField read_direction_csv(const fs::path& p) {
  const fs::path sc = sidecar_path(p);
  const json side = read_json(sc);
  DirectionField df;
  df.grid = dims_from(side.value("grid", json()), sc);
  df.cube_edge = get_field<int>(side, "cube_edge", sc);
  df.cells.resize(df.grid.count());
  std::vector<bool> seen(df.grid.count(), false);
  CsvReader r(p, kDirectionHeader);
  while (r.next()) {
    const long long ix = r.integer(0), iy = r.integer(1), iz = r.integer(2);
    if (ix < 0 || iy < 0 || iz < 0 || static_cast<std::size_t>(ix) >= df.grid.nx ||
        static_cast<std::size_t>(iy) >= df.grid.ny || static_cast<std::size_t>(iz) >= df.grid.nz)
      r.error("cube index outside grid");
    const std::size_t k = df.grid.index(ix, iy, iz);
    if (seen[k]) r.error("duplicate cube index");
    seen[k] = true;
    auto& c = df.cells[k];
    c.count = static_cast<std::uint32_t>(r.integer(6));
    c.valid = r.integer(7) != 0;
    if (c.valid) {
      try {
        c.axis = axis_from(Vec3(r.real(3), r.real(4), r.real(5)));
      } catch (const Error&) {
        r.error("valid cube with zero direction");
      }
    }
  }
  return df;
}

// ---------------------------------------------------------------- features

inline const std::vector<std::string> kFeatureHeader = {"wx", "wy", "wz", "N", "H", "X", "Y", "Z"};

inline void write_features(const fs::path& p, const FeatureGrid& g) {
  auto out = open_out(p);
  out << join(kFeatureHeader) << '\n';
  for (const auto& f : g.windows) {
    out << f.window.x << ',' << f.window.y << ',' << f.window.z << ',' << f.n << ',';
    out << (has_entropy(g.mode) ? fmt_double(f.entropy) : "") << ',';
    if (has_mean_dir(g.mode))
      out << fmt_double(f.mean.x()) << ',' << fmt_double(f.mean.y()) << ',' << fmt_double(f.mean.z());
    else
      out << ",,";
    out << '\n';
  }
  json side;
  side["grid"] = dims_json(g.grid);
  side["cube_grid"] = dims_json(g.cube_grid);
  side["cube_edge"] = g.cube_edge;
  side["window"] = g.spec.window;
  side["stride"] = g.spec.stride;
  side["min_samples"] = g.spec.min_samples;
  side["attributes"] = to_string(g.mode);
  side["metric"] = g.metric == Metric::axial ? "axial" : "spherical";
  side["normalization"] = {{"applied", g.normalization.applied},
                           {"shift", g.normalization.shift},
                           {"scale", g.normalization.scale}};
  std::vector<int> degenerate;
  for (std::size_t i = 0; i < g.windows.size(); ++i)
    if (g.windows[i].degenerate) degenerate.push_back(static_cast<int>(i));
  side["degenerate_windows"] = degenerate;
  write_json(sidecar_path(p), side);
}

inline FeatureGrid read_features(const fs::path& p) {
  const fs::path sc = sidecar_path(p);
  const json side = read_json(sc);
  FeatureGrid g;
  try {
    g.grid = dims_from(side.at("grid"), sc);
    g.cube_grid = dims_from(side.at("cube_grid"), sc);
    g.cube_edge = side.at("cube_edge").get<int>();
    g.spec.window = side.at("window").get<int>();
    g.spec.stride = side.at("stride").get<int>();
    g.spec.min_samples = side.at("min_samples").get<int>();
    g.mode = parse_attribute_mode(side.at("attributes").get<std::string>());
    g.metric = side.at("metric").get<std::string>() == "spherical" ? Metric::spherical : Metric::axial;
    const auto& nm = side.at("normalization");
    g.normalization.applied = nm.at("applied").get<bool>();
    g.normalization.shift = nm.at("shift").get<std::vector<double>>();
    g.normalization.scale = nm.at("scale").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedInput, sc.string() + ": " + e.what());
  }
  const auto d = static_cast<std::size_t>(g.dimension());
  if (g.normalization.applied && (g.normalization.shift.size() != d || g.normalization.scale.size() != d))
    fail(ErrorKind::MalformedInput, sc.string() + ": normalization record does not match the attribute mode");

  CsvReader r(p, kFeatureHeader);
  while (r.next()) {
    FeatureVector f;
    f.window = {static_cast<int>(r.integer(0)), static_cast<int>(r.integer(1)), static_cast<int>(r.integer(2))};
    if (f.window.x < 0 || f.window.y < 0 || f.window.z < 0 || static_cast<std::size_t>(f.window.x) >= g.grid.nx ||
        static_cast<std::size_t>(f.window.y) >= g.grid.ny || static_cast<std::size_t>(f.window.z) >= g.grid.nz)
      r.error("window index outside grid");
    f.n = static_cast<std::size_t>(r.integer(3));
    if (has_entropy(g.mode)) {
      if (r.empty(4)) r.error("missing entropy value");
      f.entropy = r.real(4);
    }
    if (has_mean_dir(g.mode)) {
      if (r.empty(5) || r.empty(6) || r.empty(7)) r.error("missing mean direction");
      f.mean = Vec3(r.real(5), r.real(6), r.real(7));
    }
    g.windows.push_back(f);
  }
  if (side.contains("degenerate_windows"))
    for (int i : side["degenerate_windows"].get<std::vector<int>>())
      if (i >= 0 && static_cast<std::size_t>(i) < g.windows.size()) g.windows[i].degenerate = true;
  return g;
}

// ---------------------------------------------------------------- cluster maps

inline const std::vector<std::string> kLabelHeader = {"wx", "wy", "wz", "label", "is_anomaly"};

inline const char* role_name(ClusterRole r) {
  switch (r) {
    case ClusterRole::normal: return "normal";
    case ClusterRole::anomaly: return "anomaly";
    case ClusterRole::artefact: return "artefact";
  }
  return "?";
}

inline void write_cluster_map(const fs::path& p, const ClusterMap& m, const json& extra = json::object()) {
  m.validate();
  auto out = open_out(p);
  out << join(kLabelHeader) << '\n';
  for (std::size_t i = 0; i < m.size(); ++i)
    out << m.windows[i].x << ',' << m.windows[i].y << ',' << m.windows[i].z << ',' << m.labels[i] << ','
        << (m.is_anomaly(i) ? 1 : 0) << '\n';
  json side = extra;
  side["grid"] = dims_json(m.grid);
  side["cluster_count"] = m.cluster_count();
  json roles = json::object();
  for (const auto& [label, role] : m.roles) roles[std::to_string(label)] = role_name(role);
  side["roles"] = roles;
  write_json(sidecar_path(p), side);
}

inline ClusterMap read_cluster_map(const fs::path& p) {
  ClusterMap m;
  const fs::path sc = sidecar_path(p);
  bool have_roles = false;
  if (fs::exists(sc)) {
    const json side = read_json(sc);
    m.grid = dims_from(side.value("grid", json()), sc);
    if (side.contains("roles")) {
      have_roles = true;
      for (const auto& [k, v] : side["roles"].items()) {
        const auto s = v.get<std::string>();
        m.roles[std::stoi(k)] = s == "anomaly" ? ClusterRole::anomaly
                                : s == "artefact" ? ClusterRole::artefact
                                                  : ClusterRole::normal;
      }
    }
  }
  CsvReader r(p, kLabelHeader);
  std::map<int, int> anomaly_flag;
  while (r.next()) {
    GridIndex w{static_cast<int>(r.integer(0)), static_cast<int>(r.integer(1)), static_cast<int>(r.integer(2))};
    const int label = static_cast<int>(r.integer(3));
    const int flag = static_cast<int>(r.integer(4));
    auto [it, inserted] = anomaly_flag.emplace(label, flag);
    if (!inserted && it->second != flag) r.error("is_anomaly differs within label " + std::to_string(label));
    m.windows.push_back(w);
    m.labels.push_back(label);
  }
  if (!have_roles)
    for (const auto& [label, flag] : anomaly_flag) m.roles[label] = flag ? ClusterRole::anomaly : ClusterRole::normal;
  if (m.grid.count() == 0) {
    for (const auto& w : m.windows) {
      m.grid.nx = std::max<std::size_t>(m.grid.nx, w.x + 1);
      m.grid.ny = std::max<std::size_t>(m.grid.ny, w.y + 1);
      m.grid.nz = std::max<std::size_t>(m.grid.nz, w.z + 1);
    }
  }
  m.validate();
  return m;
}

}  // namespace fibra::io
