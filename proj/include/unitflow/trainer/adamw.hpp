#pragma once

#include "unitflow/vfnet/params.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace unitflow::trainer {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment estimates with the same layout as the parameters.
template <typename T>
struct AdamWState {
  vfnet::ModelParams<T> m;
  vfnet::ModelParams<T> v;
  long updates = 0;
};

template <typename T>
AdamWState<T> make_adamw_state(const vfnet::ModelParams<T>& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

template <typename T>
double global_norm(const vfnet::ModelParams<T>& g) {
  double acc = 0.0;
  g.visit([&](const std::string&, const Mat<T>& m) { acc += m.template cast<double>().squaredNorm(); });
  return std::sqrt(acc);
}

/// Rescales gradients so their global L2 norm is at most `max_norm`. Returns the pre-clip norm.
template <typename T>
double clip_global_norm(vfnet::ModelParams<T>& g, double max_norm) {
  const double norm = global_norm(g);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-6));
    g.visit([&](const std::string&, Mat<T>& m) { m *= scale; });
  }
  return norm;
}

/// Decoupled weight decay (p *= 1 - lr*wd) followed by the bias-corrected Adam step.
template <typename T>
void adamw_step(vfnet::ModelParams<T>& params, const vfnet::ModelParams<T>& grads, AdamWState<T>& state,
                double lr, const AdamWConfig& cfg) {
  ++state.updates;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.updates));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.updates));
  std::vector<Mat<T>*> p_list, g_list, m_list, v_list;
  params.visit([&](const std::string&, Mat<T>& x) { p_list.push_back(&x); });
  const_cast<vfnet::ModelParams<T>&>(grads).visit([&](const std::string&, Mat<T>& x) { g_list.push_back(&x); });
  state.m.visit([&](const std::string&, Mat<T>& x) { m_list.push_back(&x); });
  state.v.visit([&](const std::string&, Mat<T>& x) { v_list.push_back(&x); });

  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T step = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < p_list.size(); ++i) {
    auto p = p_list[i]->array();
    const auto g = g_list[i]->array();
    auto m = m_list[i]->array();
    auto v = v_list[i]->array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.square();
    p *= decay;
    p -= step * m / ((v * inv_bc2).sqrt() + eps);
  }
}

}  // namespace unitflow::trainer
