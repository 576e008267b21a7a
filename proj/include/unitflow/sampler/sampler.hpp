#pragma once

#include "unitflow/cfm/flow_batch.hpp"
#include "unitflow/dsp/types.hpp"
#include "unitflow/units/sequence.hpp"
#include "unitflow/vfnet/model.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace unitflow::sampler {

enum class OdeMethod { euler, midpoint };

inline std::string to_string(OdeMethod m) { return m == OdeMethod::euler ? "euler" : "midpoint"; }

inline OdeMethod ode_method_from_string(const std::string& s) {
  if (s == "euler") return OdeMethod::euler;
  if (s == "midpoint") return OdeMethod::midpoint;
  throw Error(ErrorKind::InvalidInput, "unknown ODE method '" + s + "'");
}

struct SwayConfig {
  int n_steps = 32;
  double s = -1.0;
  OdeMethod method = OdeMethod::euler;

  void validate() const {
    require(n_steps >= 1, ErrorKind::InvalidInput, "sway: n_steps must be >= 1");
    require(s >= -1.0 && s <= 1.0, ErrorKind::InvalidInput, "sway: s must lie in [-1, 1]");
  }
};

/// n_steps + 1 timesteps: u + s (cos(pi u / 2) - 1 + u) over the uniform grid u = i / n.
inline std::vector<double> sway_schedule(const SwayConfig& cfg) {
  cfg.validate();
  std::vector<double> t(static_cast<std::size_t>(cfg.n_steps) + 1);
  for (int i = 0; i <= cfg.n_steps; ++i) {
    const double u = static_cast<double>(i) / cfg.n_steps;
    t[i] = u + cfg.s * (std::cos(std::numbers::pi / 2.0 * u) - 1.0 + u);
  }
  t.front() = 0.0;
  t.back() = 1.0;
  return t;
}

/// Integrates dx/dt = field(x, t) across the schedule.
template <typename M, typename Field>
M integrate_ode(Field&& field, M x, const std::vector<double>& schedule, OdeMethod method) {
  require(schedule.size() >= 2, ErrorKind::InvalidInput, "integrate_ode: schedule needs at least two points");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    require(schedule[i] > schedule[i - 1], ErrorKind::InvalidInput, "integrate_ode: schedule must increase");
  using S = typename M::Scalar;
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    const double t = schedule[i];
    const double dt = schedule[i + 1] - t;
    if (method == OdeMethod::euler) {
      x += static_cast<S>(dt) * field(x, t);
    } else {
      const M mid = x + static_cast<S>(dt / 2.0) * field(x, t);
      x += static_cast<S>(dt) * field(mid, t + dt / 2.0);
    }
    if (!x.allFinite())
      throw Error(ErrorKind::NumericalError, "ODE state became non-finite at t=" + std::to_string(schedule[i + 1]));
  }
  return x;
}

/// Condition for one conversion. In units mode `units` are the collapsed units
/// of the degraded utterance; `ref_units` (if any) are those of the reference.
/// In the mel-input ablation `cond_mel` carries the degraded mel instead.
struct GenerationRequest {
  units::UnitSequence units;
  MatF ref_mel;  // reference clean mel used as unmasked prefix; may have 0 rows
  std::vector<int> ref_units;
  MatF cond_mel;
  int target_frames = 0;
  std::uint64_t seed = 0;
};

/// Field callback: (x, x_ctx, t) -> dx/dt over the full (reference + target) layout.
using FieldFn = std::function<MatF(const MatF& x, const MatF& ctx, double t)>;

/// Infilling: the reference occupies the unmasked prefix, the target region is
/// zero in the context and is integrated from N(0, I) noise. Returns the
/// target region only.
inline dsp::MelSpectrogram generate_with_field(const FieldFn& field, const MatF& ref_mel, int total_frames,
                                               int target_frames, int mel_dim, std::uint64_t seed,
                                               const SwayConfig& cfg) {
  const auto ref_len = static_cast<int>(ref_mel.rows());
  require(target_frames >= 1, ErrorKind::InvalidInput, "generate: target_frames must be >= 1");
  require(ref_len == 0 || ref_mel.cols() == mel_dim, ErrorKind::InvalidInput,
          "generate: reference mel width differs from the model");
  MatF ctx = MatF::Zero(total_frames, mel_dim);
  if (ref_len > 0) ctx.topRows(ref_len) = ref_mel;
  std::mt19937_64 rng(seed);
  MatF x0 = cfm::standard_normal(total_frames, mel_dim, rng);
  const MatF x1 = integrate_ode([&](const MatF& x, double t) { return field(x, ctx, t); }, std::move(x0),
                                sway_schedule(cfg), cfg.method);
  dsp::MelSpectrogram out;
  out.frames = x1.middleRows(ref_len, target_frames);
  return out;
}

inline dsp::MelSpectrogram generate(const GenerationRequest& req, const vfnet::ModelParams<float>& params,
                                    const vfnet::VectorFieldNet<float>& net, const SwayConfig& cfg,
                                    const cfm::PathConfig& path_cfg = {}) {
  cfg.validate();
  path_cfg.validate();
  const auto& model = net.config();
  const int ref_len = static_cast<int>(req.ref_mel.rows());
  require(req.target_frames >= 1, ErrorKind::InvalidInput, "generate: target_frames must be >= 1");
  int total = ref_len + req.target_frames;

  MatF cond;
  if (model.cond_mode == vfnet::CondMode::units) {
    require(req.units.collapsed, ErrorKind::InvalidInput, "generate: units must be collapsed");
    if (req.units.size() > static_cast<std::size_t>(req.target_frames))
      throw Error(ErrorKind::LengthOverflow, std::to_string(req.units.size()) + " units exceed " +
                                                 std::to_string(req.target_frames) + " target frames");
    units::UnitSequence all{req.ref_units, true};
    all.ids.insert(all.ids.end(), req.units.ids.begin(), req.units.ids.end());
    cond = vfnet::embed_units(units::pad_to_frames(all, static_cast<std::size_t>(total), model.filler_id()), params,
                              model);
  } else {
    require(req.cond_mel.rows() >= 1 && req.cond_mel.cols() == model.mel_dim, ErrorKind::InvalidInput,
            "generate: mel-input mode needs a degraded mel condition");
    total = std::max(total, ref_len + static_cast<int>(req.cond_mel.rows()));
    MatF cm = MatF::Zero(total, model.mel_dim);
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(total), 0);
    if (ref_len > 0) {
      cm.topRows(ref_len) = req.ref_mel;
      std::fill_n(valid.begin(), ref_len, 1);
    }
    cm.middleRows(ref_len, req.cond_mel.rows()) = req.cond_mel;
    std::fill_n(valid.begin() + ref_len, req.cond_mel.rows(), 1);
    cond = vfnet::embed_degraded_mel(cm, valid, params, model);
  }
  if (total > model.max_frames)
    throw Error(ErrorKind::LengthOverflow,
                std::to_string(total) + " frames exceed the model's max_frames " + std::to_string(model.max_frames));

  const FieldFn field = [&](const MatF& x, const MatF& ctx, double t) {
    return vfnet::forward(x, ctx, cond, t, params, net);
  };
  return generate_with_field(field, req.ref_mel, total, req.target_frames, model.mel_dim, req.seed, cfg);
}

/// target_frames = round(units x median duplication factor).
inline int target_length(std::size_t n_units, double duplication_factor) {
  require(duplication_factor > 0.0, ErrorKind::InvalidInput, "duplication factor must be positive");
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(n_units) * duplication_factor)));
}

}  // namespace unitflow::sampler
