#pragma once

#include "unitflow/cfm/loss.hpp"
#include "unitflow/cfm/mask.hpp"
#include "unitflow/cfm/path.hpp"
#include "unitflow/units/types.hpp"

#include <random>

namespace unitflow::cfm {

/// One infilling training example: the model sees (x_t, x_ctx, units, t) and
/// regresses u_t on the masked frames.
struct FlowBatch {
  MatF x1;
  MatF x0;
  double t = 0.0;
  MatF x_t;
  MatF u_t;
  FrameMask mask;
  MatF x_ctx;
  units::PaddedUnits units;
};

template <typename Derived>
MatF context_from_mask(const Eigen::MatrixBase<Derived>& x1, const FrameMask& m) {
  MatF ctx = x1;
  for (Eigen::Index r = 0; r < ctx.rows(); ++r)
    if (m[r]) ctx.row(r).setZero();
  return ctx;
}

inline MatF standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

/// Draws t ~ U[0,1], x0 ~ N(0, I) and a mask (in that order) and fills every field.
inline FlowBatch make_flow_batch(const MatF& x1, const units::PaddedUnits& units, const MaskSpec& spec,
                                 const PathConfig& cfg, std::mt19937_64& rng) {
  require(static_cast<Eigen::Index>(units.ids.size()) == x1.rows(), ErrorKind::InvalidInput,
          "make_flow_batch: unit length differs from mel frame count");
  require(x1.rows() >= 1, ErrorKind::InvalidInput, "make_flow_batch: empty mel");
  cfg.validate();
  FlowBatch b;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  b.t = uni(rng);
  b.x1 = x1;
  b.x0 = standard_normal(x1.rows(), x1.cols(), rng);
  b.mask = sample_mask(static_cast<std::size_t>(x1.rows()), spec, rng);
  // evaluated in double: near t = 1 the field divides by a denominator close to sigma_min
  const MatD xt = sample_conditional_path(b.x1.cast<double>(), b.t, b.x0.cast<double>(), cfg);
  b.x_t = xt.cast<float>();
  b.u_t = target_vector_field(xt, b.x1.cast<double>(), b.t, cfg).cast<float>();
  b.x_ctx = context_from_mask(b.x1, b.mask);
  b.units = units;
  return b;
}

}  // namespace unitflow::cfm
