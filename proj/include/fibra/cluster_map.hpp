#pragma once

// Per-window cluster labels and the anomaly/normal/artefact interpretation of them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "fibra/error.hpp"
#include "fibra/grid.hpp"

namespace fibra {

enum class ClusterRole : int { normal = 0, anomaly = 1, artefact = 2 };

struct ClusterMap {
  Dims3 grid;                      // window grid dimensions
  std::vector<GridIndex> windows;  // labelled windows, sorted
  std::vector<int> labels;         // one label per window
  std::map<int, ClusterRole> roles;

  std::size_t size() const { return windows.size(); }

  ClusterRole role_of(int label) const {
    auto it = roles.find(label);
    return it == roles.end() ? ClusterRole::normal : it->second;
  }
  bool is_anomaly(std::size_t i) const { return role_of(labels[i]) == ClusterRole::anomaly; }

  /// Cluster sizes keyed by label.
  std::map<int, std::size_t> populations() const {
    std::map<int, std::size_t> pop;
    for (int l : labels) ++pop[l];
    return pop;
  }
  std::size_t cluster_count() const { return populations().size(); }

  /// Export class code: normal 0, anomaly 1, artefacts 2, 3, ... in decreasing size.
  std::vector<int> display_classes() const {
    const auto pop = populations();
    std::vector<int> artefacts;
    for (const auto& [label, n] : pop)
      if (role_of(label) == ClusterRole::artefact) artefacts.push_back(label);
    std::stable_sort(artefacts.begin(), artefacts.end(),
                     [&](int a, int b) { return pop.at(a) > pop.at(b); });
    std::map<int, int> code;
    for (std::size_t i = 0; i < artefacts.size(); ++i) code[artefacts[i]] = 2 + static_cast<int>(i);
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      switch (role_of(labels[i])) {
        case ClusterRole::normal: out[i] = 0; break;
        case ClusterRole::anomaly: out[i] = 1; break;
        case ClusterRole::artefact: out[i] = code[labels[i]]; break;
      }
    }
    return out;
  }

  void validate() const {
    if (windows.size() != labels.size()) fail(ErrorKind::MalformedInput, "window/label count mismatch");
    for (const auto& w : windows) {
      if (w.x < 0 || w.y < 0 || w.z < 0 || static_cast<std::size_t>(w.x) >= grid.nx ||
          static_cast<std::size_t>(w.y) >= grid.ny || static_cast<std::size_t>(w.z) >= grid.nz)
        fail(ErrorKind::MalformedInput, "window index outside the window grid");
    }
  }
};

/// Assigns roles: of the two most populous clusters the smaller is the anomaly and the larger
/// the normal material; every other cluster is an artefact. Equal populations are broken toward
/// the higher mean entropy when `entropy` (one value per window) is given, otherwise toward the
/// cluster owning the window nearest the grid centre.
inline ClusterMap select_anomaly(ClusterMap map, std::span<const double> entropy = {}) {
  if (!entropy.empty() && entropy.size() != map.size())
    fail(ErrorKind::InvalidParameter, "entropy values must match the window count");
  map.roles.clear();
  const auto pop = map.populations();
  if (pop.empty()) return map;

  // Tie-break score per cluster (higher means more anomaly-like), then first member index.
  const double cx = (static_cast<double>(map.grid.nx) - 1) / 2;
  const double cy = (static_cast<double>(map.grid.ny) - 1) / 2;
  const double cz = (static_cast<double>(map.grid.nz) - 1) / 2;
  std::map<int, double> score, first;
  for (const auto& kv : pop) {
    score[kv.first] = entropy.empty() ? -std::numeric_limits<double>::infinity() : 0.0;
    first[kv.first] = std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < map.size(); ++i) {
    const int l = map.labels[i];
    first[l] = std::min(first[l], static_cast<double>(i));
    if (!entropy.empty()) {
      score[l] += entropy[i] / static_cast<double>(pop.at(l));
    } else {
      const auto& w = map.windows[i];
      score[l] = std::max(score[l], -std::hypot(w.x - cx, w.y - cy, w.z - cz));
    }
  }
  std::vector<int> order;
  for (const auto& kv : pop) order.push_back(kv.first);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pop.at(a) != pop.at(b)) return pop.at(a) > pop.at(b);
    if (score[a] != score[b]) return score[a] > score[b];
    return first[a] < first[b];
  });
  if (order.size() == 1) {
    map.roles[order[0]] = ClusterRole::normal;
    return map;
  }
  int big = order[0], small = order[1];
  if (pop.at(big) == pop.at(small)) std::swap(big, small);
  for (int l : order) map.roles[l] = ClusterRole::artefact;
  map.roles[big] = ClusterRole::normal;
  map.roles[small] = ClusterRole::anomaly;
  return map;
}

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

/// Converts disjoint-set roots to labels 0..k-1 ordered by component size (descending),
/// ties broken by the smallest member index.
inline std::vector<int> component_labels(UnionFind& uf, std::size_t n) {
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[uf.find(i)].push_back(i);
  std::vector<const std::vector<std::size_t>*> comps;
  for (const auto& kv : members) comps.push_back(&kv.second);
  std::stable_sort(comps.begin(), comps.end(), [](const auto* a, const auto* b) {
    if (a->size() != b->size()) return a->size() > b->size();
    return a->front() < b->front();
  });
  std::vector<int> labels(n, -1);
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (std::size_t i : *comps[c]) labels[i] = static_cast<int>(c);
  return labels;
}

}  // namespace fibra
