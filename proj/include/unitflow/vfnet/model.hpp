#pragma once

#include "unitflow/units/types.hpp"
#include "unitflow/vfnet/net.hpp"

#include <vector>

namespace unitflow::vfnet {

/// Row t is the table row of ids[t].
template <typename T>
Mat<T> embed_units(const std::vector<int>& ids, const ModelParams<T>& p, const ModelConfig& cfg) {
  require(cfg.cond_mode == CondMode::units, ErrorKind::InvalidInput,
          "embed_units: model is not in units mode");
  Mat<T> out(static_cast<Eigen::Index>(ids.size()), cfg.unit_emb_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < cfg.unit_vocab, ErrorKind::InvalidInput,
            "embed_units: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                std::to_string(cfg.unit_vocab));
    out.row(static_cast<Eigen::Index>(i)) = p.unit_table.row(ids[i]);
  }
  return out;
}

template <typename T>
Mat<T> embed_units(const units::PaddedUnits& u, const ModelParams<T>& p, const ModelConfig& cfg) {
  return embed_units(u.ids, p, cfg);
}

template <typename T>
void embed_units_backward(const std::vector<int>& ids, const Mat<T>& dcond, ModelParams<T>& g) {
  for (std::size_t i = 0; i < ids.size(); ++i) g.unit_table.row(ids[i]) += dcond.row(static_cast<Eigen::Index>(i));
}

/// Mel-input ablation condition: rows [0, valid) are a linear projection of the
/// degraded mel, later rows the learned padding embedding.
template <typename T>
Mat<T> embed_degraded_mel(const Mat<T>& mel, const std::vector<std::uint8_t>& valid, const ModelParams<T>& p,
                          const ModelConfig& cfg) {
  require(cfg.cond_mode == CondMode::mel_input, ErrorKind::InvalidInput,
          "embed_degraded_mel: model is not in mel_input mode");
  require(mel.cols() == cfg.mel_dim && static_cast<std::size_t>(mel.rows()) == valid.size(),
          ErrorKind::InvalidInput, "embed_degraded_mel: shape mismatch");
  Mat<T> out;
  out.noalias() = mel * p.cond_w;
  out.rowwise() += p.cond_b.row(0);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    if (!valid[r]) out.row(r) = p.cond_pad.row(0);
  return out;
}

template <typename T>
void embed_degraded_mel_backward(const Mat<T>& mel, const std::vector<std::uint8_t>& valid, const Mat<T>& dcond,
                                 ModelParams<T>& g) {
  Mat<T> dproj = dcond;
  for (Eigen::Index r = 0; r < dproj.rows(); ++r) {
    if (valid[r]) continue;
    g.cond_pad.row(0) += dcond.row(r);
    dproj.row(r).setZero();
  }
  g.cond_w.noalias() += mel.transpose() * dproj;
  g.cond_b.row(0) += dproj.colwise().sum();
}

/// Single-sequence convenience: T x mel field prediction.
template <typename T>
Mat<T> forward(const Mat<T>& x_t, const Mat<T>& x_ctx, const Mat<T>& cond, double t, const ModelParams<T>& p,
               const VectorFieldNet<T>& net) {
  require(x_t.rows() == x_ctx.rows() && x_t.rows() == cond.rows(), ErrorKind::InvalidInput,
          "forward: inputs disagree on frame count");
  FieldInput<T> in;
  in.batch = 1;
  in.frames = static_cast<int>(x_t.rows());
  in.lengths = {in.frames};
  in.t = {t};
  in.x_t = x_t;
  in.x_ctx = x_ctx;
  in.cond = cond;
  return net.forward(p, in);
}

}  // namespace unitflow::vfnet
