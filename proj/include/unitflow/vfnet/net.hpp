#pragma once

#include "unitflow/vfnet/params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace unitflow::vfnet {

/// A padded batch of `batch` sequences, each laid out as `frames` consecutive
/// rows. Rows past `lengths[b]` are batch padding: excluded as attention keys
/// and expected to carry zero loss weight.
template <typename T>
struct FieldInput {
  int batch = 1;
  int frames = 0;
  std::vector<int> lengths;
  std::vector<double> t;  // one flow time per sequence
  Mat<T> x_t;             // (batch*frames) x mel_dim
  Mat<T> x_ctx;           // (batch*frames) x mel_dim
  Mat<T> cond;            // (batch*frames) x unit_emb_dim

  Eigen::Index rows() const { return static_cast<Eigen::Index>(batch) * frames; }
};

namespace ops {

// tanh-approximated GELU; `th` receives tanh(c (x + 0.044715 x^3)) for the backward pass
template <typename T>
Mat<T> gelu(const Mat<T>& x, Mat<T>& th) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const auto xa = x.array();
  th = (c * (xa + T(0.044715) * xa.cube())).tanh().matrix();
  return (T(0.5) * xa * (T(1) + th.array())).matrix();
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& th) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const auto xa = x.array();
  const auto ta = th.array();
  return (dy.array() * (T(0.5) * (T(1) + ta) +
                        T(0.5) * xa * (T(1) - ta.square()) * c * (T(1) + T(3 * 0.044715) * xa.square())))
      .matrix();
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  Vec<T> rstd;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, LayerNormCache<T>* cache) {
  constexpr double eps = 1e-5;
  const auto n = x.cols();
  Mat<T> xhat(x.rows(), n);
  Vec<T> rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mu = x.row(r).mean();
    const T var = (x.row(r).array() - mu).square().sum() / static_cast<T>(n);
    rstd(r) = T(1) / std::sqrt(var + static_cast<T>(eps));
    xhat.row(r) = (x.row(r).array() - mu) * rstd(r);
  }
  Mat<T> y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& c, const Mat<T>& g, Mat<T>& dg,
                           Mat<T>& db) {
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * g.row(0).array();
  const T inv_n = T(1) / static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T m1 = dxhat.row(r).sum() * inv_n;
    const T m2 = dxhat.row(r).dot(c.xhat.row(r)) * inv_n;
    dx.row(r) = c.rstd(r) * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return dx;
}

template <typename T>
void add_bias(Mat<T>& y, const Mat<T>& b) {
  y.rowwise() += b.row(0);
}

/// Sinusoidal features [sin(w_i * s) | cos(w_i * s)], w_i = base^(-i / half).
template <typename T>
Mat<T> sinusoid(const std::vector<double>& positions, int width, double base, double scale) {
  const int half = width / 2;
  Mat<T> out(static_cast<Eigen::Index>(positions.size()), width);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (int i = 0; i < half; ++i) {
      const double w = std::exp(-std::log(base) * i / half);
      const double a = scale * positions[r] * w;
      out(static_cast<Eigen::Index>(r), i) = static_cast<T>(std::sin(a));
      out(static_cast<Eigen::Index>(r), half + i) = static_cast<T>(std::cos(a));
    }
  }
  return out;
}

}  // namespace ops

/// Activations kept from the forward pass for the backward pass.
template <typename T>
struct ForwardCache {
  struct Layer {
    ops::LayerNormCache<T> ln1, ln2;
    Mat<T> x1;       // ln1 output
    Mat<T> q, k, v;  // rotated q/k
    std::vector<Mat<T>> probs;  // batch*heads blocks, frames x length
    Mat<T> attn;     // concatenated head outputs
    Mat<T> x2;       // ln2 output
    Mat<T> pre_act;  // ff1 output before GELU
    Mat<T> tanh_act;
    Mat<T> act;
  };
  Mat<T> input;        // [x_t | x_ctx | cond]
  Mat<T> time_feat, time_pre, time_act;
  std::vector<Layer> layers;
  ops::LayerNormCache<T> lnf;
  Mat<T> final_x;
};

/// The learnable vector field: per-frame concatenation of (x_t, x_ctx, cond)
/// projected to model width, plus a time embedding and absolute sinusoidal
/// positions, through pre-norm transformer blocks with rotary self-attention,
/// and a zero-initialized linear head back to mel channels.
template <typename T>
class VectorFieldNet {
 public:
  explicit VectorFieldNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int half = cfg_.head_dim() / 2;
    rope_cos_.resize(cfg_.max_frames, half);
    rope_sin_.resize(cfg_.max_frames, half);
    for (int p = 0; p < cfg_.max_frames; ++p)
      for (int i = 0; i < half; ++i) {
        const double a = p * std::pow(10000.0, -static_cast<double>(i) / half);
        rope_cos_(p, i) = static_cast<T>(std::cos(a));
        rope_sin_(p, i) = static_cast<T>(std::sin(a));
      }
    std::vector<double> pos(static_cast<std::size_t>(cfg_.max_frames));
    for (int p = 0; p < cfg_.max_frames; ++p) pos[p] = p;
    abs_pos_ = ops::sinusoid<T>(pos, cfg_.dim, 1000.0, 1.0);
  }

  const ModelConfig& config() const { return cfg_; }

  Mat<T> forward(const ModelParams<T>& p, const FieldInput<T>& in, ForwardCache<T>* cache = nullptr) const {
    check_input(in);
    const int d = cfg_.dim, a = cfg_.attn_dim(), mel = cfg_.mel_dim;
    const Eigen::Index n = in.rows();

    Mat<T> input(n, cfg_.input_dim());
    input.leftCols(mel) = in.x_t;
    input.middleCols(mel, mel) = in.x_ctx;
    input.rightCols(cfg_.unit_emb_dim) = in.cond;

    Mat<T> h;
    h.noalias() = input * p.in_w;
    ops::add_bias(h, p.in_b);

    const Mat<T> tf = ops::sinusoid<T>(in.t, cfg_.time_freq_dim, 10000.0, 1000.0);
    Mat<T> tpre;
    tpre.noalias() = tf * p.time_w1;
    ops::add_bias(tpre, p.time_b1);
    const Mat<T> tact = tpre.unaryExpr([](T x) { return x * ops::sigmoid(x); });
    Mat<T> temb;
    temb.noalias() = tact * p.time_w2;
    ops::add_bias(temb, p.time_b2);
    for (int b = 0; b < in.batch; ++b) {
      auto block = h.middleRows(static_cast<Eigen::Index>(b) * in.frames, in.frames);
      block.rowwise() += temb.row(b);
      if (cfg_.abs_positions) block += abs_pos_.topRows(in.frames);
    }

    if (cache) {
      cache->input = std::move(input);
      cache->time_feat = tf;
      cache->time_pre = std::move(tpre);
      cache->time_act = tact;
      cache->layers.assign(p.layers.size(), {});
    }

    for (std::size_t li = 0; li < p.layers.size(); ++li) {
      const auto& lp = p.layers[li];
      typename ForwardCache<T>::Layer local;
      auto& lc = cache ? cache->layers[li] : local;

      lc.x1 = ops::layer_norm(h, lp.ln1_g, lp.ln1_b, &lc.ln1);
      Mat<T> qkv;
      qkv.noalias() = lc.x1 * lp.qkv_w;
      ops::add_bias(qkv, lp.qkv_b);
      lc.q = qkv.leftCols(a);
      lc.k = qkv.middleCols(a, a);
      lc.v = qkv.rightCols(a);
      rotate(lc.q, in, false);
      rotate(lc.k, in, false);
      lc.attn = attention(lc, in);
      Mat<T> ao;
      ao.noalias() = lc.attn * lp.out_w;
      ops::add_bias(ao, lp.out_b);
      h += ao;

      lc.x2 = ops::layer_norm(h, lp.ln2_g, lp.ln2_b, &lc.ln2);
      lc.pre_act.noalias() = lc.x2 * lp.ff1_w;
      ops::add_bias(lc.pre_act, lp.ff1_b);
      lc.act = ops::gelu(lc.pre_act, lc.tanh_act);
      Mat<T> fo;
      fo.noalias() = lc.act * lp.ff2_w;
      ops::add_bias(fo, lp.ff2_b);
      h += fo;
    }

    ops::LayerNormCache<T> lnf;
    Mat<T> xf = ops::layer_norm(h, p.lnf_g, p.lnf_b, &lnf);
    Mat<T> y;
    y.noalias() = xf * p.head_w;
    ops::add_bias(y, p.head_b);
    if (cache) {
      cache->lnf = std::move(lnf);
      cache->final_x = std::move(xf);
    }
    return y;
  }

  /// Accumulates parameter gradients into `g` and returns d(loss)/d(cond).
  Mat<T> backward(const ModelParams<T>& p, const FieldInput<T>& in, const ForwardCache<T>& c,
                  const Mat<T>& dy, ModelParams<T>& g) const {
    const int d = cfg_.dim, a = cfg_.attn_dim();
    g.head_w.noalias() += c.final_x.transpose() * dy;
    g.head_b.row(0) += dy.colwise().sum();
    Mat<T> dxf;
    dxf.noalias() = dy * p.head_w.transpose();
    Mat<T> dh = ops::layer_norm_backward(dxf, c.lnf, p.lnf_g, g.lnf_g, g.lnf_b);

    for (std::size_t li = p.layers.size(); li-- > 0;) {
      const auto& lp = p.layers[li];
      auto& lg = g.layers[li];
      const auto& lc = c.layers[li];

      // feed-forward branch
      lg.ff2_w.noalias() += lc.act.transpose() * dh;
      lg.ff2_b.row(0) += dh.colwise().sum();
      Mat<T> dact;
      dact.noalias() = dh * lp.ff2_w.transpose();
      const Mat<T> dpre = ops::gelu_backward(dact, lc.pre_act, lc.tanh_act);
      lg.ff1_w.noalias() += lc.x2.transpose() * dpre;
      lg.ff1_b.row(0) += dpre.colwise().sum();
      Mat<T> dx2;
      dx2.noalias() = dpre * lp.ff1_w.transpose();
      dh += ops::layer_norm_backward(dx2, lc.ln2, lp.ln2_g, lg.ln2_g, lg.ln2_b);

      // attention branch
      lg.out_w.noalias() += lc.attn.transpose() * dh;
      lg.out_b.row(0) += dh.colwise().sum();
      Mat<T> dattn;
      dattn.noalias() = dh * lp.out_w.transpose();
      Mat<T> dq, dk, dv;
      attention_backward(lc, in, dattn, dq, dk, dv);
      rotate(dq, in, true);
      rotate(dk, in, true);
      Mat<T> dqkv(dq.rows(), 3 * a);
      dqkv.leftCols(a) = dq;
      dqkv.middleCols(a, a) = dk;
      dqkv.rightCols(a) = dv;
      lg.qkv_w.noalias() += lc.x1.transpose() * dqkv;
      lg.qkv_b.row(0) += dqkv.colwise().sum();
      Mat<T> dx1;
      dx1.noalias() = dqkv * lp.qkv_w.transpose();
      dh += ops::layer_norm_backward(dx1, lc.ln1, lp.ln1_g, lg.ln1_g, lg.ln1_b);
    }

    // time embedding
    Mat<T> dtemb(in.batch, d);
    for (int b = 0; b < in.batch; ++b)
      dtemb.row(b) = dh.middleRows(static_cast<Eigen::Index>(b) * in.frames, in.frames).colwise().sum();
    g.time_w2.noalias() += c.time_act.transpose() * dtemb;
    g.time_b2.row(0) += dtemb.colwise().sum();
    Mat<T> dtact;
    dtact.noalias() = dtemb * p.time_w2.transpose();
    const Mat<T> dtpre = dtact.binaryExpr(c.time_pre, [](T gr, T x) {
      const T s = ops::sigmoid(x);
      return gr * s * (T(1) + x * (T(1) - s));
    });
    g.time_w1.noalias() += c.time_feat.transpose() * dtpre;
    g.time_b1.row(0) += dtpre.colwise().sum();

    g.in_w.noalias() += c.input.transpose() * dh;
    g.in_b.row(0) += dh.colwise().sum();
    Mat<T> dinput;
    dinput.noalias() = dh * p.in_w.bottomRows(cfg_.unit_emb_dim).transpose();
    return dinput;
  }

 private:
  void check_input(const FieldInput<T>& in) const {
    require(in.batch >= 1 && in.frames >= 1, ErrorKind::InvalidInput, "forward: empty batch");
    require(in.frames <= cfg_.max_frames, ErrorKind::InvalidInput,
            "forward: " + std::to_string(in.frames) + " frames exceed max_frames " +
                std::to_string(cfg_.max_frames));
    require(static_cast<int>(in.lengths.size()) == in.batch && static_cast<int>(in.t.size()) == in.batch,
            ErrorKind::InvalidInput, "forward: lengths/t must have one entry per sequence");
    for (int len : in.lengths)
      require(len >= 1 && len <= in.frames, ErrorKind::InvalidInput, "forward: bad sequence length");
    const auto n = in.rows();
    require(in.x_t.rows() == n && in.x_t.cols() == cfg_.mel_dim, ErrorKind::InvalidInput,
            "forward: x_t shape mismatch");
    require(in.x_ctx.rows() == n && in.x_ctx.cols() == cfg_.mel_dim, ErrorKind::InvalidInput,
            "forward: x_ctx shape mismatch");
    require(in.cond.rows() == n && in.cond.cols() == cfg_.unit_emb_dim, ErrorKind::InvalidInput,
            "forward: condition embedding shape mismatch");
  }

  /// In-place rotary embedding on every head; `inverse` applies the transpose rotation.
  void rotate(Mat<T>& x, const FieldInput<T>& in, bool inverse) const {
    const int dh = cfg_.head_dim(), half = dh / 2;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto pos = static_cast<Eigen::Index>(r % in.frames);
      for (int h = 0; h < cfg_.heads; ++h) {
        T* v = x.row(r).data() + h * dh;
        for (int i = 0; i < half; ++i) {
          const T cs = rope_cos_(pos, i);
          const T sn = inverse ? -rope_sin_(pos, i) : rope_sin_(pos, i);
          const T a = v[i], b = v[i + half];
          v[i] = a * cs - b * sn;
          v[i + half] = a * sn + b * cs;
        }
      }
    }
  }

  Mat<T> attention(typename ForwardCache<T>::Layer& lc, const FieldInput<T>& in) const {
    const int dh = cfg_.head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Mat<T> out(lc.q.rows(), cfg_.attn_dim());
    lc.probs.assign(static_cast<std::size_t>(in.batch) * cfg_.heads, {});
    for (int b = 0; b < in.batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * in.frames;
      const int len = in.lengths[b];
      for (int h = 0; h < cfg_.heads; ++h) {
        const auto q = lc.q.block(r0, h * dh, in.frames, dh);
        const auto k = lc.k.block(r0, h * dh, len, dh);
        const auto v = lc.v.block(r0, h * dh, len, dh);
        Mat<T> s;
        s.noalias() = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
          const T mx = s.row(i).maxCoeff();
          s.row(i) = (s.row(i).array() - mx).exp();
          s.row(i) /= s.row(i).sum();
        }
        out.block(r0, h * dh, in.frames, dh).noalias() = s * v;
        lc.probs[static_cast<std::size_t>(b) * cfg_.heads + h] = std::move(s);
      }
    }
    return out;
  }

  void attention_backward(const typename ForwardCache<T>::Layer& lc, const FieldInput<T>& in,
                          const Mat<T>& dout, Mat<T>& dq, Mat<T>& dk, Mat<T>& dv) const {
    const int dh = cfg_.head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    dq = Mat<T>::Zero(dout.rows(), cfg_.attn_dim());
    dk = Mat<T>::Zero(dout.rows(), cfg_.attn_dim());
    dv = Mat<T>::Zero(dout.rows(), cfg_.attn_dim());
    for (int b = 0; b < in.batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * in.frames;
      const int len = in.lengths[b];
      for (int h = 0; h < cfg_.heads; ++h) {
        const Mat<T>& pr = lc.probs[static_cast<std::size_t>(b) * cfg_.heads + h];
        const auto q = lc.q.block(r0, h * dh, in.frames, dh);
        const auto k = lc.k.block(r0, h * dh, len, dh);
        const auto v = lc.v.block(r0, h * dh, len, dh);
        const auto go = dout.block(r0, h * dh, in.frames, dh);
        dv.block(r0, h * dh, len, dh).noalias() = pr.transpose() * go;
        Mat<T> dp;
        dp.noalias() = go * v.transpose();
        const Vec<T> rowdot = (dp.array() * pr.array()).rowwise().sum();
        Mat<T> ds = pr.array() * (dp.array().colwise() - rowdot.array());
        ds *= scale;
        dq.block(r0, h * dh, in.frames, dh).noalias() = ds * k;
        dk.block(r0, h * dh, len, dh).noalias() = ds.transpose() * q;
      }
    }
  }

  ModelConfig cfg_;
  Mat<T> rope_cos_, rope_sin_;
  Mat<T> abs_pos_;
};

}  // namespace unitflow::vfnet
