#pragma once

#include "unitflow/vfnet/model.hpp"

#include <vector>

namespace unitflow::vfnet {

/// A padded training batch before the condition embedding is applied.
template <typename T>
struct ObjectiveBatch {
  FieldInput<T> input;                // cond is filled by `loss_and_grad`
  std::vector<int> unit_ids;          // units mode: one id per row (BATCH_PAD on padding)
  Mat<T> cond_mel;                    // mel_input mode: degraded mel per row
  std::vector<std::uint8_t> cond_valid;
  Mat<T> target;                      // u_t per row
  std::vector<std::uint8_t> loss_mask;  // 1 on masked frames of real sequences
};

template <typename T>
Mat<T> embed_condition(const ObjectiveBatch<T>& b, const ModelParams<T>& p, const ModelConfig& cfg) {
  return cfg.cond_mode == CondMode::units ? embed_units(b.unit_ids, p, cfg)
                                          : embed_degraded_mel(b.cond_mel, b.cond_valid, p, cfg);
}

/// Masked-frame mean squared error of the predicted field; when `grads` is
/// non-null the parameter gradients are accumulated into it.
template <typename T>
double loss_and_grad(const VectorFieldNet<T>& net, const ModelParams<T>& p, ObjectiveBatch<T>& b,
                     ModelParams<T>* grads) {
  const auto& cfg = net.config();
  b.input.cond = embed_condition(b, p, cfg);
  ForwardCache<T> cache;
  const Mat<T> y = net.forward(p, b.input, grads ? &cache : nullptr);
  require(y.rows() == b.target.rows() && static_cast<std::size_t>(y.rows()) == b.loss_mask.size(),
          ErrorKind::InvalidInput, "loss_and_grad: target shape mismatch");

  std::size_t masked = 0;
  for (auto m : b.loss_mask) masked += m;
  require(masked > 0, ErrorKind::InvalidInput, "loss_and_grad: no masked frames in batch");
  const double denom = static_cast<double>(masked) * static_cast<double>(y.cols());

  Mat<T> dy = Mat<T>::Zero(y.rows(), y.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (!b.loss_mask[r]) continue;
    const auto diff = (y.row(r) - b.target.row(r)).eval();
    loss += diff.template cast<double>().squaredNorm();
    dy.row(r) = diff * static_cast<T>(2.0 / denom);
  }
  loss /= denom;

  if (grads) {
    const Mat<T> dcond = net.backward(p, b.input, cache, dy, *grads);
    if (cfg.cond_mode == CondMode::units)
      embed_units_backward(b.unit_ids, dcond, *grads);
    else
      embed_degraded_mel_backward(b.cond_mel, b.cond_valid, dcond, *grads);
  }
  return loss;
}

}  // namespace unitflow::vfnet
