#pragma once

// Adaptive Weights Clustering (AWC).
//
// Binary weights w_ij between points are re-estimated on a geometric radius
// schedule h_k = a h_{k-1}. For each pair within h_k, the overlap of the two
// previous neighbourhoods is compared with the overlap q expected for uniform
// density; a significant gap (test statistic > lambda) separates the pair.
// Clusters are the connected components of the final weight graph.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <Eigen/Core>

#include "fibra/cluster_map.hpp"
#include "fibra/error.hpp"
#include "fibra/features.hpp"
#include "fibra/parallel.hpp"

namespace fibra {

/// Overlap proportion V_cap / (2V - V_cap) of two d-balls of equal radius h whose centres
/// are t*h apart. V_cap / V is the regularized incomplete beta I_{1 - t^2/4}((d+1)/2, 1/2).
inline double ball_overlap_q(double t, int d) {
  require(d >= 1, "dimension must be >= 1");
  if (t <= 0.0) return 1.0;
  if (t >= 2.0) return 0.0;
  const double x = 1.0 - 0.25 * t * t;
  const double ratio = boost::math::ibeta(0.5 * (d + 1), 0.5, x);
  return ratio / (2.0 - ratio);
}

/// Bernoulli Kullback-Leibler divergence KL(theta || q) with 0 ln 0 = 0.
inline double kl_bernoulli(double theta, double q) {
  auto term = [](double a, double b) {
    if (a <= 0.0) return 0.0;
    if (b <= 0.0) return std::numeric_limits<double>::infinity();
    return a * std::log(a / b);
  };
  return term(theta, q) + term(1.0 - theta, 1.0 - q);
}

/// AWC test statistic (N_and + N_or) KL(theta, q) sign(q - theta).
inline double awc_statistic(double n_and, double n_or, double q) {
  const double total = n_and + n_or;
  const double theta = n_and / total;
  if (theta >= q) return theta == q ? 0.0 : -total * kl_bernoulli(theta, q);
  return total * kl_bernoulli(theta, q);
}

/// Published lambda values per data set and attribute mode.
struct AwcPreset {
  const char* data;
  AttributeMode mode;
  double lambda;
  bool raw_features;  // tuned on unstandardized attributes
};
inline constexpr AwcPreset kAwcPresets[] = {
    {"rsa", AttributeMode::entropy, 9.2, true},    {"rsa", AttributeMode::mean_dir, 10.0, true},
    {"rsa", AttributeMode::both, 0.2, true},       {"real", AttributeMode::entropy, 19.27, true},
    {"real", AttributeMode::mean_dir, 4.27, true}, {"real", AttributeMode::both, 1.21, true},
};

inline double awc_preset_lambda(const std::string& data, AttributeMode mode) {
  for (const auto& p : kAwcPresets)
    if (data == p.data && mode == p.mode) return p.lambda;
  fail(ErrorKind::InvalidParameter, "no AWC lambda preset for '" + data + "'");
}

struct AwcParams {
  double lambda = 10.0;
  int initial_neighbours = 0;  // n0; 0 means 2d + 2
  double growth = 1.25;
  int max_steps = 100;

  void validate() const {
    require(lambda > 0.0, "AWC lambda must be > 0");
    require(growth > 1.0, "radius growth factor must be > 1");
    require(initial_neighbours >= 0, "initial neighbour count must be >= 0");
    require(max_steps >= 0, "max_steps must be >= 0");
  }
};

/// Dense symmetric binary weight matrix stored as one bitset row per point.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  explicit WeightMatrix(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {
    for (std::size_t i = 0; i < n; ++i) set(i, i, true);
  }

  std::size_t size() const { return n_; }
  bool get(std::size_t i, std::size_t j) const { return (row(i)[j / 64] >> (j % 64)) & 1u; }
  void set(std::size_t i, std::size_t j, bool v) {
    set_half(i, j, v);
    set_half(j, i, v);
  }
  const std::uint64_t* row(std::size_t i) const { return bits_.data() + i * words_; }
  std::size_t words() const { return words_; }
  int step = 0;

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) e += get(i, j);
    return e;
  }

  static WeightMatrix identity(std::size_t n) { return WeightMatrix(n); }
  static WeightMatrix full(std::size_t n) {
    WeightMatrix w(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) w.set(i, j, true);
    return w;
  }

 private:
  void set_half(std::size_t i, std::size_t j, bool v) {
    auto& word = bits_[i * words_ + j / 64];
    const std::uint64_t mask = std::uint64_t{1} << (j % 64);
    word = v ? (word | mask) : (word & ~mask);
  }

  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Connected components of the weight graph; labels ordered by component size.
inline std::vector<int> weight_components(const WeightMatrix& w) {
  UnionFind uf(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = i + 1; j < w.size(); ++j)
      if (w.get(i, j)) uf.unite(i, j);
  return component_labels(uf, w.size());
}

/// Clusters of `w` as a ClusterMap over the given windows (roles unassigned).
inline ClusterMap components(const WeightMatrix& w, const std::vector<GridIndex>& windows = {}, Dims3 grid = {}) {
  ClusterMap map;
  map.grid = grid;
  map.labels = weight_components(w);
  if (windows.empty()) {
    for (std::size_t i = 0; i < w.size(); ++i) map.windows.push_back({static_cast<int>(i), 0, 0});
    if (map.grid.count() == 0) map.grid = {w.size(), 1, 1};
  } else {
    if (windows.size() != w.size()) fail(ErrorKind::InvalidParameter, "one window per point is required");
    map.windows = windows;
  }
  return map;
}

struct AwcResult {
  ClusterMap map;
  WeightMatrix weights;
  std::vector<double> radii;  // h_0, h_1, ...
  std::size_t degenerate_pairs = 0;
};

namespace awc_detail {

inline double distance(const Eigen::MatrixXd& x, std::size_t i, std::size_t j) {
  return (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
}

inline std::size_t popcount_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  std::size_t c = 0;
  for (std::size_t k = 0; k < words; ++k) c += static_cast<std::size_t>(std::popcount(a[k] & b[k]));
  return c;
}

inline std::size_t popcount_andnot(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  std::size_t c = 0;
  for (std::size_t k = 0; k < words; ++k) c += static_cast<std::size_t>(std::popcount(a[k] & ~b[k]));
  return c;
}

}  // namespace awc_detail

/// Runs AWC on the rows of x. Pairwise work is O(n^2 * n/64) per step on dense bitsets.
inline AwcResult awc_fit(const Eigen::MatrixXd& x, const AwcParams& p) {
  p.validate();
  using awc_detail::distance;
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const int d = static_cast<int>(x.cols());
  const std::size_t n0 = p.initial_neighbours > 0 ? static_cast<std::size_t>(p.initial_neighbours)
                                                  : static_cast<std::size_t>(2 * d + 2);
  if (d < 1 || n < n0 + 1) fail(ErrorKind::TooFewPoints, "AWC needs at least n0 + 1 points");

  // Pairwise distances, n0-th neighbour distances and the data diameter.
  std::vector<double> dist(n * n, 0.0);
  parallel_for(0, n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = distance(x, i, j);
  });
  double diameter = 0.0;
  std::vector<double> kth(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(dist.begin() + static_cast<std::ptrdiff_t>(i * n),
                            dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    diameter = std::max(diameter, *std::max_element(row.begin(), row.end()));
    row.erase(row.begin() + static_cast<std::ptrdiff_t>(i));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n0 - 1), row.end());
    kth[i] = row[n0 - 1];
  }
  std::nth_element(kth.begin(), kth.begin() + static_cast<std::ptrdiff_t>(n / 2), kth.end());
  double h = kth[n / 2];
  if (!(h > 0.0)) h = std::max(diameter * 1e-12, std::numeric_limits<double>::min());

  AwcResult res;
  res.radii.push_back(h);
  WeightMatrix w(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dist[i * n + j] <= h) w.set(i, j, true);

  for (int step = 1; step <= p.max_steps; ++step) {
    const double h_prev = h;
    h *= p.growth;
    if (h > 0.5 * diameter) break;
    res.radii.push_back(h);

    // Previous-radius ball memberships.
    WeightMatrix ball(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (dist[i * n + j] <= h_prev) ball.set(i, j, true);

    WeightMatrix next(n);
    std::vector<std::size_t> degenerate(n, 0);
    const std::size_t words = w.words();
    // Rows are computed independently from the frozen previous weights (upper triangle).
    std::vector<std::vector<std::uint8_t>> upper(n);
    parallel_for(0, n, [&](std::size_t i) {
      upper[i].assign(n, 0);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dij = dist[i * n + j];
        if (dij > h) continue;
        const std::uint64_t* wi = w.row(i);
        const std::uint64_t* wj = w.row(j);
        std::size_t n_and = awc_detail::popcount_and(wi, wj, words);
        // Exclude l = i and l = j from the intersection.
        n_and -= (w.get(j, i) ? 1 : 0) + (w.get(i, j) ? 1 : 0);
        const std::size_t n_i_not_j = awc_detail::popcount_andnot(wi, ball.row(j), words);
        const std::size_t n_j_not_i = awc_detail::popcount_andnot(wj, ball.row(i), words);
        const double n_or = static_cast<double>(n_i_not_j + n_j_not_i);
        if (static_cast<double>(n_and) + n_or == 0.0) {
          upper[i][j] = w.get(i, j);
          ++degenerate[i];
          continue;
        }
        const double q = ball_overlap_q(dij / h_prev, d);
        upper[i][j] = awc_statistic(static_cast<double>(n_and), n_or, q) <= p.lambda;
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      res.degenerate_pairs += degenerate[i];
      for (std::size_t j = i + 1; j < n; ++j)
        if (upper[i][j]) next.set(i, j, true);
    }
    next.step = step;
    w = std::move(next);
  }
  res.weights = std::move(w);
  res.map = components(res.weights);
  return res;
}

/// AWC over a feature grid; the two largest components become normal/anomaly, the rest artefacts.
inline AwcResult awc_fit(const FeatureGrid& g, const AwcParams& p) {
  AwcResult res = awc_fit(g.matrix(), p);
  ClusterMap map = components(res.weights, g.window_indices(), g.grid);
  res.map = select_anomaly(std::move(map), g.entropies());
  return res;
}

}  // namespace fibra
