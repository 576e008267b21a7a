#pragma once

#include "unitflow/cfm/mask.hpp"

namespace unitflow::cfm {

/// Mean squared error over the frames with m == 1, all channels.
template <typename Derived1, typename Derived2>
double cfm_loss(const Eigen::MatrixBase<Derived1>& v_pred, const Eigen::MatrixBase<Derived2>& u_t,
                const FrameMask& m) {
  require(v_pred.rows() == u_t.rows() && v_pred.cols() == u_t.cols(), ErrorKind::InvalidInput,
          "cfm_loss: prediction and target shapes differ");
  require(static_cast<Eigen::Index>(m.size()) == v_pred.rows(), ErrorKind::InvalidInput,
          "cfm_loss: mask length differs from frame count");
  const auto n = count_masked(m);
  require(n > 0, ErrorKind::InvalidInput, "cfm_loss: mask selects no frames");
  double acc = 0.0;
  for (Eigen::Index r = 0; r < v_pred.rows(); ++r) {
    if (!m[r]) continue;
    acc += (v_pred.row(r).template cast<double>() - u_t.row(r).template cast<double>()).squaredNorm();
  }
  return acc / (static_cast<double>(n) * static_cast<double>(v_pred.cols()));
}

}  // namespace unitflow::cfm
