#pragma once

#include "unitflow/core/error.hpp"
#include "unitflow/core/tensor.hpp"

#include <algorithm>

namespace unitflow::cfm {

/// Optimal-transport conditional path
///   x_t = t * x1 + (1 - (1 - sigma_min) t) * x0,   x0 ~ N(0, I)
/// whose target field along the path is the constant x1 - (1 - sigma_min) x0.
struct PathConfig {
  double sigma_min = 1e-5;

  void validate() const {
    require(sigma_min > 0.0 && sigma_min < 1.0, ErrorKind::InvalidInput,
            "sigma_min must lie in (0, 1)");
  }
};

/// Standard deviation of the conditional path at time t.
inline double path_std(double t, double sigma_min) { return 1.0 - (1.0 - sigma_min) * t; }

template <typename Derived1, typename Derived2>
auto sample_conditional_path(const Eigen::MatrixBase<Derived1>& x1, double t,
                             const Eigen::MatrixBase<Derived2>& noise, const PathConfig& cfg) {
  using Scalar = typename Derived1::Scalar;
  require(t >= 0.0 && t <= 1.0, ErrorKind::InvalidInput, "path time must lie in [0, 1]");
  require(x1.rows() == noise.rows() && x1.cols() == noise.cols(), ErrorKind::InvalidInput,
          "noise shape must match x1");
  Mat<Scalar> xt = static_cast<Scalar>(t) * x1 + static_cast<Scalar>(path_std(t, cfg.sigma_min)) * noise;
  return xt;
}

/// u_t(x | x1) = (x1 - (1 - sigma_min) x) / (1 - (1 - sigma_min) t); the denominator is
/// floored at sigma_min so t = 1 stays finite.
template <typename Derived1, typename Derived2>
auto target_vector_field(const Eigen::MatrixBase<Derived1>& x, const Eigen::MatrixBase<Derived2>& x1,
                         double t, const PathConfig& cfg) {
  using Scalar = typename Derived1::Scalar;
  require(t >= 0.0 && t <= 1.0, ErrorKind::InvalidInput, "path time must lie in [0, 1]");
  require(x.rows() == x1.rows() && x.cols() == x1.cols(), ErrorKind::InvalidInput,
          "x and x1 shapes differ");
  const double denom = std::max(path_std(t, cfg.sigma_min), cfg.sigma_min);
  const double a = 1.0 - cfg.sigma_min;
  Mat<Scalar> u = (x1 - static_cast<Scalar>(a) * x) / static_cast<Scalar>(denom);
  return u;
}

}  // namespace unitflow::cfm
