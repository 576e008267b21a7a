#pragma once

#include "unitflow/units/types.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace unitflow::units {

struct KMeansOptions {
  int max_iters = 300;
  double tol = 1e-4;  // max centroid shift (L2) that counts as converged
  int n_init = 10;    // independent k-means++ restarts, best inertia wins
};

/// Per-iteration record of a single Lloyd run (inertia after each assignment step).
struct KMeansTrace {
  std::vector<double> inertia;
};

namespace detail {

inline double sq_dist(const MatD& a, Eigen::Index i, const MatD& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

/// Nearest centroid per row, lowest index on ties. Fills `dist` with the squared distances.
inline std::vector<int> nearest(const MatD& x, const MatD& c, std::vector<double>& dist) {
  std::vector<int> ids(static_cast<std::size_t>(x.rows()));
  dist.assign(static_cast<std::size_t>(x.rows()), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = sq_dist(x, i, c, j);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    ids[i] = best;
    dist[i] = best_d;
  }
  return ids;
}

inline MatD kmeans_pp_init(const MatD& x, int k, std::mt19937_64& rng) {
  const auto n = x.rows();
  MatD c(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  c.row(0) = x.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(x, i, c, 0);
  for (int j = 1; j < k; ++j) {
    std::discrete_distribution<Eigen::Index> draw(d2.begin(), d2.end());
    c.row(j) = x.row(draw(rng));
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x, i, c, j));
  }
  return c;
}

struct LloydResult {
  MatD centroids;
  double inertia = 0.0;
  int iterations = 0;
  KMeansTrace trace;
};

/// Single-point transfers that lower the inertia once centroids are updated
/// (Hartigan's criterion). A Lloyd fixed point is the starting state.
inline void refine_by_transfers(const MatD& x, MatD& c, KMeansTrace& trace) {
  const int k = static_cast<int>(c.rows());
  std::vector<double> dist;
  auto ids = nearest(x, c, dist);
  std::vector<long> count(static_cast<std::size_t>(k), 0);
  for (int id : ids) ++count[id];
  for (int j = 0; j < k; ++j) {
    if (count[j] == 0) return;
  }
  MatD sums = MatD::Zero(k, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) sums.row(ids[i]) += x.row(i);
  for (int j = 0; j < k; ++j) c.row(j) = sums.row(j) / static_cast<double>(count[j]);

  bool moved = true;
  while (moved) {
    moved = false;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int a = ids[i];
      if (count[a] < 2) continue;
      const double na = static_cast<double>(count[a]);
      const double leave = na / (na - 1.0) * sq_dist(x, i, c, a);
      int best = a;
      double best_delta = -1e-12 * (1.0 + leave);
      for (int b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(count[b]);
        const double delta = nb / (nb + 1.0) * sq_dist(x, i, c, b) - leave;
        if (delta < best_delta) {
          best_delta = delta;
          best = b;
        }
      }
      if (best == a) continue;
      sums.row(a) -= x.row(i);
      sums.row(best) += x.row(i);
      --count[a];
      ++count[best];
      c.row(a) = sums.row(a) / static_cast<double>(count[a]);
      c.row(best) = sums.row(best) / static_cast<double>(count[best]);
      ids[i] = best;
      moved = true;
    }
    if (moved) {
      double inertia = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) inertia += sq_dist(x, i, c, ids[i]);
      trace.inertia.push_back(inertia);
    }
  }
}

inline LloydResult lloyd(const MatD& x, MatD c, const KMeansOptions& opt) {
  LloydResult r;
  const int k = static_cast<int>(c.rows());
  std::vector<double> dist;
  for (int it = 0; it < opt.max_iters; ++it) {
    auto ids = nearest(x, c, dist);
    double inertia = 0.0;
    for (double d : dist) inertia += d;
    r.trace.inertia.push_back(inertia);

    MatD next = MatD::Zero(k, x.cols());
    std::vector<long> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      next.row(ids[i]) += x.row(i);
      ++count[ids[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (count[j] > 0) {
        next.row(j) /= static_cast<double>(count[j]);
        continue;
      }
      // empty cluster: move it onto the worst-served point
      const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      next.row(j) = x.row(far);
      dist[far] = 0.0;
    }
    const double shift = (next - c).rowwise().norm().maxCoeff();
    c = std::move(next);
    r.iterations = it + 1;
    if (shift < opt.tol) break;
  }
  refine_by_transfers(x, c, r.trace);
  std::vector<double> final_dist;
  nearest(x, c, final_dist);
  r.inertia = 0.0;
  for (double d : final_dist) r.inertia += d;
  r.centroids = std::move(c);
  return r;
}

inline std::size_t count_distinct_rows(const MatF& x, std::size_t stop_at) {
  std::set<std::vector<float>> seen;
  for (Eigen::Index i = 0; i < x.rows() && seen.size() < stop_at; ++i)
    seen.insert(std::vector<float>(x.row(i).data(), x.row(i).data() + x.cols()));
  return seen.size();
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; deterministic for a given seed.
/// When `trace` is given it receives the per-iteration inertia of the winning restart.
inline Codebook fit_kmeans(const FeatureMatrix& features, int k, std::uint64_t seed,
                           const KMeansOptions& opt = {}, KMeansTrace* trace = nullptr) {
  require(k >= 2, ErrorKind::InvalidInput, "fit_kmeans: k must be >= 2");
  require(features.rows.rows() >= k, ErrorKind::InvalidInput,
          "fit_kmeans: need at least k feature rows");
  features.validate();
  const auto distinct = detail::count_distinct_rows(features.rows, static_cast<std::size_t>(k));
  require(distinct > 1, ErrorKind::DegenerateData, "fit_kmeans: all feature rows are identical");
  require(distinct >= static_cast<std::size_t>(k), ErrorKind::DegenerateData,
          "fit_kmeans: fewer distinct rows than clusters");

  const MatD x = features.rows.cast<double>();
  std::mt19937_64 rng(seed);
  detail::LloydResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < std::max(1, opt.n_init); ++run) {
    auto r = detail::lloyd(x, detail::kmeans_pp_init(x, k, rng), opt);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  if (trace) *trace = best.trace;

  Codebook cb;
  cb.centroids = best.centroids.cast<float>();
  cb.seed = seed;
  cb.iterations = best.iterations;
  cb.inertia = best.inertia;
  return cb;
}

/// Nearest-centroid quantization; ties go to the lowest centroid index.
inline UnitSequence assign(const FeatureMatrix& features, const Codebook& cb) {
  require(features.dim() == cb.feature_dim(), ErrorKind::InvalidInput,
          "assign: feature dim " + std::to_string(features.dim()) + " != codebook dim " +
              std::to_string(cb.feature_dim()));
  std::vector<double> dist;
  UnitSequence u;
  u.ids = detail::nearest(features.rows.cast<double>(), cb.centroids.cast<double>(), dist);
  u.collapsed = false;
  return u;
}

}  // namespace unitflow::units
