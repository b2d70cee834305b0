#pragma once

// Spatial stochastic EM (SEM) for Gaussian mixtures on a window grid.
//
// Each iteration: M-step from hard labels, E-step posteriors, Potts-style spatial
// tilt exp(beta * m_ik) with m_ik the share of the 6-neighbourhood labelled k,
// S-step sampling of labels, pruning of under-populated components. The best of
// several restarts (observed-data log-likelihood) is reduced to two clusters by
// Bhattacharyya merging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fibra/cluster_map.hpp"
#include "fibra/error.hpp"
#include "fibra/features.hpp"
#include "fibra/grid.hpp"
#include "fibra/parallel.hpp"
#include "fibra/random.hpp"

namespace fibra {

struct SemParams {
  int k_init = 10;
  int max_iterations = 200;
  double beta = 1.0;
  bool spatial = true;                    // false skips the tilt step entirely
  std::optional<std::size_t> prune_min;   // default max(d + 2, ceil(0.005 n))
  double convergence = 0.005;             // stop when fewer labels than this fraction change
  int restarts = 5;
  std::uint64_t seed = 1;

  void validate() const {
    require(k_init >= 2, "K_init must be >= 2");
    require(beta >= 0.0, "spatial coupling beta must be >= 0");
    require(max_iterations >= 1, "max_iterations must be >= 1");
    require(restarts >= 1, "restarts must be >= 1");
    require(convergence >= 0.0, "convergence fraction must be >= 0");
  }
};

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct SemResult {
  ClusterMap map;
  std::vector<GaussianComponent> components;  // final two (or one) merged components, by label
  std::vector<double> trace;                  // observed-data log-likelihood per iteration, kept restart
  std::vector<double> restart_loglik;
  int kept_restart = 0;
  int iterations = 0;
  std::size_t surviving = 0;                  // live components before merging
};

namespace sem_detail {

struct Fitted {
  std::vector<GaussianComponent> comps;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol;
  std::vector<double> log_norm;  // -0.5 (d ln 2pi + ln det)
};

inline void factorize(Fitted& f) {
  f.chol.clear();
  f.log_norm.clear();
  for (const auto& c : f.comps) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    f.log_norm.push_back(-0.5 * (static_cast<double>(c.mean.size()) * std::log(2.0 * kPi) + logdet));
    f.chol.push_back(std::move(llt));
  }
}

inline double log_density(const Fitted& f, std::size_t k, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = f.chol[k].matrixL().solve(x - f.comps[k].mean);
  return f.log_norm[k] - 0.5 * z.squaredNorm();
}

/// Weight, mean and floored covariance of every group from hard labels.
inline Fitted m_step(const Eigen::MatrixXd& x, const std::vector<int>& labels, int groups,
                     const Eigen::VectorXd& floor) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Fitted f;
  f.comps.resize(groups);
  std::vector<double> count(groups, 0.0);
  for (auto& c : f.comps) {
    c.mean = Eigen::VectorXd::Zero(d);
    c.covariance = Eigen::MatrixXd::Zero(d, d);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    count[labels[i]] += 1.0;
    f.comps[labels[i]].mean += x.row(i).transpose();
  }
  for (int k = 0; k < groups; ++k)
    if (count[k] > 0) f.comps[k].mean /= count[k];
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd r = x.row(i).transpose() - f.comps[labels[i]].mean;
    f.comps[labels[i]].covariance += r * r.transpose();
  }
  for (int k = 0; k < groups; ++k) {
    auto& c = f.comps[k];
    c.weight = count[k] / static_cast<double>(n);
    if (count[k] > 0) c.covariance /= count[k];
    c.covariance.diagonal() += floor;
  }
  factorize(f);
  return f;
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : v) m = std::max(m, a);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double a : v) s += std::exp(a - m);
  return m + std::log(s);
}

inline double observed_loglik(const Eigen::MatrixXd& x, const Fitted& f) {
  double ll = 0.0;
  std::vector<double> terms(f.comps.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    for (std::size_t k = 0; k < f.comps.size(); ++k)
      terms[k] = std::log(f.comps[k].weight) + log_density(f, k, xi);
    ll += log_sum_exp(terms);
  }
  return ll;
}

/// Present 6-neighbours of every window.
inline std::vector<std::vector<std::size_t>> grid_neighbours(const std::vector<GridIndex>& windows) {
  std::map<GridIndex, std::size_t> where;
  for (std::size_t i = 0; i < windows.size(); ++i) where[windows[i]] = i;
  std::vector<std::vector<std::size_t>> nb(windows.size());
  static constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (std::size_t i = 0; i < windows.size(); ++i)
    for (const auto& o : off) {
      auto it = where.find({windows[i].x + o[0], windows[i].y + o[1], windows[i].z + o[2]});
      if (it != where.end()) nb[i].push_back(it->second);
    }
  return nb;
}

/// Log tilted posteriors (unnormalized) of window i for the given components and labels.
inline void tilted_log_posterior(const Eigen::MatrixXd& x, const Fitted& f, std::size_t i,
                                 const std::vector<int>& labels, const std::vector<std::vector<std::size_t>>& nb,
                                 double beta, bool spatial, std::vector<double>& out) {
  const std::size_t k_count = f.comps.size();
  out.assign(k_count, 0.0);
  const Eigen::VectorXd xi = x.row(static_cast<Eigen::Index>(i)).transpose();
  for (std::size_t k = 0; k < k_count; ++k) out[k] = std::log(f.comps[k].weight) + log_density(f, k, xi);
  if (!spatial || nb[i].empty()) return;
  const double share = 1.0 / static_cast<double>(nb[i].size());
  std::vector<double> m(k_count, 0.0);
  for (std::size_t j : nb[i]) m[labels[j]] += share;
  for (std::size_t k = 0; k < k_count; ++k) out[k] += beta * m[k];
}

inline double bhattacharyya(const GaussianComponent& a, const GaussianComponent& b) {
  const Eigen::MatrixXd s = 0.5 * (a.covariance + b.covariance);
  Eigen::LLT<Eigen::MatrixXd> ls(s), la(a.covariance), lb(b.covariance);
  const auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& l) {
    return 2.0 * l.matrixLLT().diagonal().array().log().sum();
  };
  const Eigen::VectorXd diff = a.mean - b.mean;
  const double maha = diff.dot(ls.solve(diff));
  return 0.125 * maha + 0.5 * (logdet(ls) - 0.5 * (logdet(la) + logdet(lb)));
}

/// Moment-matched merge of two components.
inline GaussianComponent merge(const GaussianComponent& a, const GaussianComponent& b) {
  GaussianComponent m;
  m.weight = a.weight + b.weight;
  const double wa = a.weight / m.weight, wb = b.weight / m.weight;
  m.mean = wa * a.mean + wb * b.mean;
  const Eigen::VectorXd da = a.mean - m.mean, db = b.mean - m.mean;
  m.covariance = wa * (a.covariance + da * da.transpose()) + wb * (b.covariance + db * db.transpose());
  return m;
}

struct RestartOutcome {
  std::vector<int> labels;  // compact 0..live-1
  Fitted fitted;
  double loglik = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  int iterations = 0;
};

inline RestartOutcome run_restart(const Eigen::MatrixXd& x, const std::vector<std::vector<std::size_t>>& nb,
                                  const SemParams& p, std::size_t prune_min, const Eigen::VectorXd& floor,
                                  std::uint64_t restart) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  int live = p.k_init;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = counter_uniform(p.seed, restart, 0, i);
    labels[i] = std::min(p.k_init - 1, static_cast<int>(u * p.k_init));
  }
  // Components empty at initialization never get parameters; compact them away.
  auto compact = [&](std::vector<int>& lab, int groups) {
    std::vector<int> count(groups, 0);
    for (int l : lab) ++count[l];
    std::vector<int> remap(groups, -1);
    int next = 0;
    for (int k = 0; k < groups; ++k)
      if (count[k] > 0) remap[k] = next++;
    for (int& l : lab) l = remap[l];
    return next;
  };
  live = compact(labels, live);

  RestartOutcome out;
  std::vector<int> sampled(n);
  std::vector<std::vector<double>> post(n);
  for (int it = 1; it <= p.max_iterations; ++it) {
    Fitted f = m_step(x, labels, live, floor);
    out.trace.push_back(observed_loglik(x, f));

    parallel_for(0, n, [&](std::size_t i) {
      tilted_log_posterior(x, f, i, labels, nb, p.beta, p.spatial, post[i]);
      const double lse = log_sum_exp(post[i]);
      const double u = counter_uniform(p.seed, restart, static_cast<std::uint64_t>(it), i);
      double acc = 0.0;
      int pick = live - 1;
      for (int k = 0; k < live; ++k) {
        post[i][k] = std::exp(post[i][k] - lse);
        acc += post[i][k];
        if (u < acc) {
          pick = k;
          break;
        }
      }
      sampled[i] = pick;
    });

    // Prune components with fewer than prune_min members; their windows move to the
    // most probable surviving component.
    std::vector<std::size_t> count(live, 0);
    for (int l : sampled) ++count[l];
    std::vector<bool> keep(live);
    bool any = false;
    for (int k = 0; k < live; ++k) any |= (keep[k] = count[k] >= prune_min);
    if (!any) keep[std::distance(count.begin(), std::max_element(count.begin(), count.end()))] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (keep[sampled[i]]) continue;
      int best = -1;
      for (int k = 0; k < live; ++k)
        if (keep[k] && (best < 0 || post[i][k] > post[i][best])) best = k;
      sampled[i] = best;
    }

    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) changed += sampled[i] != labels[i];
    labels = sampled;
    live = compact(labels, live);
    out.iterations = it;
    if (static_cast<double>(changed) < p.convergence * static_cast<double>(n)) break;
  }
  out.fitted = m_step(x, labels, live, floor);
  out.loglik = observed_loglik(x, out.fitted);
  out.labels = std::move(labels);
  return out;
}

}  // namespace sem_detail

/// Fits the spatial SEM to the rows of `x` (one row per window).
/// `entropy` (optional, one value per window) drives the anomaly tie-break.
inline SemResult sem_fit(const Eigen::MatrixXd& x, const std::vector<GridIndex>& windows, const Dims3& grid,
                         const SemParams& p, std::span<const double> entropy = {}) {
  p.validate();
  using namespace sem_detail;
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (windows.size() != n) fail(ErrorKind::InvalidParameter, "one grid index per feature row is required");
  if (d == 0 || n < static_cast<std::size_t>(p.k_init) * (d + 2))
    fail(ErrorKind::TooFewWindows, "SEM needs at least K_init * (d + 2) windows, got " + std::to_string(n));

  const std::size_t prune_min =
      p.prune_min.value_or(std::max<std::size_t>(d + 2, static_cast<std::size_t>(std::ceil(0.005 * n))));
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::VectorXd floor(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double var = (x.col(k).array() - mu(k)).square().mean();
    floor(k) = std::max(1e-6 * var, 1e-12);
  }
  const auto nb = grid_neighbours(windows);

  SemResult res;
  RestartOutcome best;
  for (int r = 0; r < p.restarts; ++r) {
    RestartOutcome o = run_restart(x, nb, p, prune_min, floor, static_cast<std::uint64_t>(r));
    res.restart_loglik.push_back(o.loglik);
    if (r == 0 || o.loglik > best.loglik) {
      best = std::move(o);
      res.kept_restart = r;
    }
  }
  res.trace = best.trace;
  res.iterations = best.iterations;
  res.surviving = best.fitted.comps.size();

  // Reduce to two components by repeatedly merging the closest pair; indistinguishable
  // components (distance <= 1e-9) are merged even below two.
  std::vector<GaussianComponent> comps = best.fitted.comps;
  std::vector<int> group(comps.size());
  std::iota(group.begin(), group.end(), 0);
  std::vector<int> alive(comps.size());
  std::iota(alive.begin(), alive.end(), 0);
  while (alive.size() > 1) {
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < alive.size(); ++a)
      for (std::size_t b = a + 1; b < alive.size(); ++b) {
        const double dist = bhattacharyya(comps[alive[a]], comps[alive[b]]);
        if (dist < best_d) {
          best_d = dist;
          ba = a;
          bb = b;
        }
      }
    if (alive.size() <= 2 && best_d > 1e-9) break;
    const int keep = alive[ba], drop = alive[bb];
    comps[keep] = merge(comps[keep], comps[drop]);
    for (int& g : group)
      if (g == drop) g = keep;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(bb));
  }

  // Final classification: one MAP sweep under the merged mixture with the spatial tilt.
  Fitted merged;
  for (int a : alive) merged.comps.push_back(comps[a]);
  factorize(merged);
  std::map<int, int> slot;
  for (std::size_t s = 0; s < alive.size(); ++s) slot[alive[s]] = static_cast<int>(s);
  std::vector<int> current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = slot.at(group[best.labels[i]]);
  std::vector<int> final_labels(n);
  parallel_for(0, n, [&](std::size_t i) {
    std::vector<double> lp;
    tilted_log_posterior(x, merged, i, current, nb, p.beta, p.spatial, lp);
    final_labels[i] = static_cast<int>(std::distance(lp.begin(), std::max_element(lp.begin(), lp.end())));
  });

  // Labels ordered by population (descending); empty components are dropped.
  std::vector<std::size_t> pop(alive.size(), 0);
  for (int l : final_labels) ++pop[l];
  std::vector<int> order(alive.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pop[a] > pop[b]; });
  std::vector<int> relabel(alive.size(), -1);
  for (std::size_t r = 0; r < order.size(); ++r)
    if (pop[order[r]] > 0) {
      relabel[order[r]] = static_cast<int>(res.components.size());
      res.components.push_back(merged.comps[order[r]]);
    }
  // Mixture weights follow the final assignment.
  for (std::size_t r = 0; r < order.size(); ++r)
    if (relabel[order[r]] >= 0) res.components[relabel[order[r]]].weight = static_cast<double>(pop[order[r]]) / n;

  res.map.grid = grid;
  res.map.windows = windows;
  res.map.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.map.labels[i] = relabel[final_labels[i]];
  res.map = select_anomaly(std::move(res.map), entropy);
  return res;
}

inline SemResult sem_fit(const FeatureGrid& g, const SemParams& p) {
  const auto h = g.entropies();
  return sem_fit(g.matrix(), g.window_indices(), g.grid, p, h);
}

}  // namespace fibra
