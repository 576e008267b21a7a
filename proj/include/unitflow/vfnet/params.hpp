#pragma once

#include "unitflow/core/tensor.hpp"
#include "unitflow/vfnet/config.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace unitflow::vfnet {

template <typename T>
struct LayerParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> qkv_w, qkv_b;  // dim x 3*attn
  Mat<T> out_w, out_b;  // attn x dim
  Mat<T> ln2_g, ln2_b;
  Mat<T> ff1_w, ff1_b;  // dim x ff
  Mat<T> ff2_w, ff2_b;  // ff x dim
};

/// All learnable tensors; row vectors are stored as 1 x n matrices so every
/// tensor can be visited uniformly. Tensors unused by the configured
/// condition mode stay empty.
template <typename T>
struct ModelParams {
  Mat<T> unit_table;                 // unit_vocab x unit_emb_dim (units mode)
  Mat<T> cond_w, cond_b, cond_pad;   // mel_dim x unit_emb_dim, 1 x E, 1 x E (mel_input mode)
  Mat<T> in_w, in_b;                 // (2*mel + E) x dim
  Mat<T> time_w1, time_b1;           // time_freq_dim x dim
  Mat<T> time_w2, time_b2;           // dim x dim
  std::vector<LayerParams<T>> layers;
  Mat<T> lnf_g, lnf_b;
  Mat<T> head_w, head_b;             // dim x mel_dim, zero at init

  template <typename F>
  void visit(F&& f) {
    auto v = [&](const std::string& name, Mat<T>& m) {
      if (m.size() > 0) f(name, m);
    };
    v("unit_table", unit_table);
    v("cond.w", cond_w);
    v("cond.b", cond_b);
    v("cond.pad", cond_pad);
    v("in.w", in_w);
    v("in.b", in_b);
    v("time.w1", time_w1);
    v("time.b1", time_b1);
    v("time.w2", time_w2);
    v("time.b2", time_b2);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      auto& l = layers[i];
      v(p + "ln1.g", l.ln1_g);
      v(p + "ln1.b", l.ln1_b);
      v(p + "qkv.w", l.qkv_w);
      v(p + "qkv.b", l.qkv_b);
      v(p + "attn_out.w", l.out_w);
      v(p + "attn_out.b", l.out_b);
      v(p + "ln2.g", l.ln2_g);
      v(p + "ln2.b", l.ln2_b);
      v(p + "ff1.w", l.ff1_w);
      v(p + "ff1.b", l.ff1_b);
      v(p + "ff2.w", l.ff2_w);
      v(p + "ff2.b", l.ff2_b);
    }
    v("final_ln.g", lnf_g);
    v("final_ln.b", lnf_b);
    v("head.w", head_w);
    v("head.b", head_b);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const std::string& n, Mat<T>& m) { f(n, static_cast<const Mat<T>&>(m)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  /// Same shapes, all zeros (gradient accumulator / optimizer moments).
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
    return z;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.layers.resize(layers.size());
    out.unit_table = unit_table.template cast<U>();
    out.cond_w = cond_w.template cast<U>();
    out.cond_b = cond_b.template cast<U>();
    out.cond_pad = cond_pad.template cast<U>();
    out.in_w = in_w.template cast<U>();
    out.in_b = in_b.template cast<U>();
    out.time_w1 = time_w1.template cast<U>();
    out.time_b1 = time_b1.template cast<U>();
    out.time_w2 = time_w2.template cast<U>();
    out.time_b2 = time_b2.template cast<U>();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& a = layers[i];
      auto& b = out.layers[i];
      b.ln1_g = a.ln1_g.template cast<U>();
      b.ln1_b = a.ln1_b.template cast<U>();
      b.qkv_w = a.qkv_w.template cast<U>();
      b.qkv_b = a.qkv_b.template cast<U>();
      b.out_w = a.out_w.template cast<U>();
      b.out_b = a.out_b.template cast<U>();
      b.ln2_g = a.ln2_g.template cast<U>();
      b.ln2_b = a.ln2_b.template cast<U>();
      b.ff1_w = a.ff1_w.template cast<U>();
      b.ff1_b = a.ff1_b.template cast<U>();
      b.ff2_w = a.ff2_w.template cast<U>();
      b.ff2_b = a.ff2_b.template cast<U>();
    }
    out.lnf_g = lnf_g.template cast<U>();
    out.lnf_b = lnf_b.template cast<U>();
    out.head_w = head_w.template cast<U>();
    out.head_b = head_b.template cast<U>();
    return out;
  }
};

namespace detail {

template <typename T>
Mat<T> uniform_fan_in(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
  return m;
}

template <typename T>
Mat<T> normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n01(rng));
  return m;
}

}  // namespace detail

/// Linear layers: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases;
/// embeddings N(0, 1); layer norms identity; output head zero.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg.dim, a = cfg.attn_dim(), e = cfg.unit_emb_dim, mel = cfg.mel_dim, ff = cfg.ff_dim();
  ModelParams<T> p;
  if (cfg.cond_mode == CondMode::units) {
    p.unit_table = detail::normal<T>(cfg.unit_vocab, e, rng);
  } else {
    p.cond_w = detail::uniform_fan_in<T>(mel, e, mel, rng);
    p.cond_b = detail::uniform_fan_in<T>(1, e, mel, rng);
    p.cond_pad = detail::normal<T>(1, e, rng);
  }
  p.in_w = detail::uniform_fan_in<T>(cfg.input_dim(), d, cfg.input_dim(), rng);
  p.in_b = detail::uniform_fan_in<T>(1, d, cfg.input_dim(), rng);
  p.time_w1 = detail::uniform_fan_in<T>(cfg.time_freq_dim, d, cfg.time_freq_dim, rng);
  p.time_b1 = detail::uniform_fan_in<T>(1, d, cfg.time_freq_dim, rng);
  p.time_w2 = detail::uniform_fan_in<T>(d, d, d, rng);
  p.time_b2 = detail::uniform_fan_in<T>(1, d, d, rng);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& l : p.layers) {
    l.ln1_g = Mat<T>::Ones(1, d);
    l.ln1_b = Mat<T>::Zero(1, d);
    l.qkv_w = detail::uniform_fan_in<T>(d, 3 * a, d, rng);
    l.qkv_b = detail::uniform_fan_in<T>(1, 3 * a, d, rng);
    l.out_w = detail::uniform_fan_in<T>(a, d, a, rng);
    l.out_b = detail::uniform_fan_in<T>(1, d, a, rng);
    l.ln2_g = Mat<T>::Ones(1, d);
    l.ln2_b = Mat<T>::Zero(1, d);
    l.ff1_w = detail::uniform_fan_in<T>(d, ff, d, rng);
    l.ff1_b = detail::uniform_fan_in<T>(1, ff, d, rng);
    l.ff2_w = detail::uniform_fan_in<T>(ff, d, ff, rng);
    l.ff2_b = detail::uniform_fan_in<T>(1, d, ff, rng);
  }
  p.lnf_g = Mat<T>::Ones(1, d);
  p.lnf_b = Mat<T>::Zero(1, d);
  p.head_w = Mat<T>::Zero(d, mel);
  p.head_b = Mat<T>::Zero(1, mel);
  return p;
}

}  // namespace unitflow::vfnet
