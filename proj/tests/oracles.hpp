#pragma once

// Independent reference computations used as test oracles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <vector>

namespace oracle {

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Minimum within-cluster sum of squares over every labelling of the rows into k groups.
inline double exhaustive_kmeans_inertia(const MatD& x, int k) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double inertia = 0;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (label[i] == c) {
          sum += x.row(i);
          ++count;
        }
      if (count == 0) continue;
      const Eigen::RowVectorXd mean = sum / count;
      for (int i = 0; i < n; ++i)
        if (label[i] == c) inertia += (x.row(i) - mean).squaredNorm();
    }
    best = std::min(best, inertia);
    int pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

/// Argmin over the full distance matrix, scanning centroids in index order.
inline std::vector<int> brute_force_assign(const MatD& x, const MatD& c) {
  MatD d(x.rows(), c.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      double s = 0;
      for (Eigen::Index q = 0; q < x.cols(); ++q) s += (x(i, q) - c(j, q)) * (x(i, q) - c(j, q));
      d(i, j) = std::sqrt(s);
    }
  std::vector<int> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < c.rows(); ++j)
      if (d(i, j) < d(i, arg)) arg = j;
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

inline std::vector<int> unique_runs(const std::vector<int>& v) {
  std::vector<int> out;
  std::unique_copy(v.begin(), v.end(), std::back_inserter(out));
  return out;
}

/// Recursive edit distance with memoisation.
inline std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
    if (i == 0) return static_cast<long>(j);
    if (j == 0) return static_cast<long>(i);
    auto& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({go(i - 1, j) + 1, go(i, j - 1) + 1, go(i - 1, j - 1) + (a[i - 1] != b[j - 1])});
    return m;
  };
  return static_cast<std::size_t>(go(a.size(), b.size()));
}

/// Least-squares slope of log(err) against log(h): the observed convergence order.
inline double convergence_order(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
