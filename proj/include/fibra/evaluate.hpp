#pragma once

// Window-level comparison of a predicted cluster map against ground truth.

#include <algorithm>
#include <cstddef>
#include <map>

#include "fibra/cluster_map.hpp"
#include "fibra/error.hpp"

namespace fibra {

struct EvaluationReport {
  std::size_t windows = 0;
  double misclassification = 0.0;  // after optimal anomaly/normal matching
  bool swapped = false;            // prediction matched with roles exchanged
  // Confusion counts with anomaly as the positive class (after matching).
  std::size_t true_positive = 0, false_positive = 0, false_negative = 0, true_negative = 0;
  double anomaly_precision = 0.0, anomaly_recall = 0.0;
  double normal_precision = 0.0, normal_recall = 0.0;
  double rand_index = 1.0;  // raw predicted labels vs binary truth
  std::size_t cluster_count = 0;
  std::size_t truth_anomalies = 0;
};

inline double safe_ratio(std::size_t a, std::size_t b) { return b == 0 ? 1.0 : static_cast<double>(a) / b; }

/// Rand index between two labelings from their contingency table.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto pairs = [](double m) { return m * (m - 1) / 2; };
  double sj = 0, sa = 0, sb = 0;
  for (const auto& kv : joint) sj += pairs(kv.second);
  for (const auto& kv : ca) sa += pairs(kv.second);
  for (const auto& kv : cb) sb += pairs(kv.second);
  const double total = pairs(static_cast<double>(n));
  return (total + 2 * sj - sa - sb) / total;
}

/// Compares predicted and true anomaly masks over the predicted windows.
/// Throws GridMismatch when grids differ or a predicted window is unknown to the truth.
inline EvaluationReport evaluate(const ClusterMap& pred, const ClusterMap& truth) {
  if (!(pred.grid == truth.grid)) fail(ErrorKind::GridMismatch, "prediction and truth window grids differ");
  std::map<GridIndex, bool> truth_mask;
  for (std::size_t i = 0; i < truth.size(); ++i) truth_mask[truth.windows[i]] = truth.is_anomaly(i);

  EvaluationReport r;
  r.windows = pred.size();
  r.cluster_count = pred.cluster_count();
  std::vector<int> truth_labels(pred.size());
  std::vector<bool> p(pred.size()), t(pred.size());
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto it = truth_mask.find(pred.windows[i]);
    if (it == truth_mask.end()) fail(ErrorKind::GridMismatch, "predicted window missing from the truth map");
    p[i] = pred.is_anomaly(i);
    t[i] = it->second;
    truth_labels[i] = t[i] ? 1 : 0;
    disagree += p[i] != t[i];
    r.truth_anomalies += t[i];
  }
  r.swapped = 2 * disagree > r.windows;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pi = r.swapped ? !p[i] : p[i];
    if (pi && t[i]) ++r.true_positive;
    else if (pi && !t[i]) ++r.false_positive;
    else if (!pi && t[i]) ++r.false_negative;
    else ++r.true_negative;
  }
  r.misclassification = r.windows ? static_cast<double>(r.false_positive + r.false_negative) / r.windows : 0.0;
  r.anomaly_precision = safe_ratio(r.true_positive, r.true_positive + r.false_positive);
  r.anomaly_recall = safe_ratio(r.true_positive, r.true_positive + r.false_negative);
  r.normal_precision = safe_ratio(r.true_negative, r.true_negative + r.false_negative);
  r.normal_recall = safe_ratio(r.true_negative, r.true_negative + r.false_positive);
  r.rand_index = rand_index(pred.labels, truth_labels);
  return r;
}

}  // namespace fibra
