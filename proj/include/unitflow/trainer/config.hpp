#pragma once

#include "unitflow/cfm/mask.hpp"
#include "unitflow/cfm/path.hpp"
#include "unitflow/trainer/adamw.hpp"
#include "unitflow/vfnet/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <string>

namespace unitflow::trainer {

enum class Stage { pretrain, finetune };

inline std::string to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

inline Stage stage_from_string(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw Error(ErrorKind::InvalidInput, "unknown stage '" + s + "'");
}

struct TrainConfig {
  Stage stage = Stage::pretrain;
  double peak_lr = 7.5e-5;
  long warmup_steps = 20000;
  long total_updates = 600000;
  int batch_frames = 4096;
  std::uint64_t seed = 0;
  cfm::MaskSpec mask_spec;
  cfm::PathConfig path_config;
  vfnet::CondMode ablation_mode = vfnet::CondMode::units;
  AdamWConfig adamw;
  double clip_norm = 1.0;
  long checkpoint_every = 1000;
  long log_every = 1;

  void validate() const {
    require(peak_lr > 0.0, ErrorKind::InvalidInput, "peak_lr must be positive");
    require(warmup_steps >= 0 && warmup_steps < total_updates, ErrorKind::InvalidInput,
            "warmup_steps must be smaller than total_updates");
    require(batch_frames >= 1, ErrorKind::InvalidInput, "batch_frames must be positive");
    require(log_every >= 1 && checkpoint_every >= 1, ErrorKind::InvalidInput,
            "log/checkpoint intervals must be positive");
    mask_spec.validate();
    path_config.validate();
  }

  /// Optimizer defaults for pretraining (peak 7.5e-5, 20k warmup).
  static TrainConfig paper_pretrain() { return {}; }
  /// Optimizer defaults for finetuning (peak 1e-5, 10k warmup).
  static TrainConfig paper_finetune() {
    TrainConfig c;
    c.stage = Stage::finetune;
    c.peak_lr = 1e-5;
    c.warmup_steps = 10000;
    c.total_updates = 400000;
    return c;
  }
};

/// Linear warmup 0 -> peak over warmup_steps, then linear decay to 0 at total_updates.
inline double lr_schedule(long step, const TrainConfig& cfg) {
  if (step <= 0) return 0.0;
  if (step < cfg.warmup_steps) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const double remaining = static_cast<double>(cfg.total_updates - step);
  const double span = static_cast<double>(cfg.total_updates - cfg.warmup_steps);
  return cfg.peak_lr * std::max(0.0, remaining / span);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"stage", to_string(c.stage)},
       {"peak_lr", c.peak_lr},
       {"warmup_steps", c.warmup_steps},
       {"total_updates", c.total_updates},
       {"batch_frames", c.batch_frames},
       {"seed", c.seed},
       {"mask_min_frac", c.mask_spec.min_frac},
       {"mask_max_frac", c.mask_spec.max_frac},
       {"sigma_min", c.path_config.sigma_min},
       {"ablation_mode", vfnet::to_string(c.ablation_mode)},
       {"beta1", c.adamw.beta1},
       {"beta2", c.adamw.beta2},
       {"adam_eps", c.adamw.eps},
       {"weight_decay", c.adamw.weight_decay},
       {"clip_norm", c.clip_norm},
       {"checkpoint_every", c.checkpoint_every},
       {"log_every", c.log_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.stage = stage_from_string(j.at("stage"));
  c.peak_lr = j.at("peak_lr");
  c.warmup_steps = j.at("warmup_steps");
  c.total_updates = j.at("total_updates");
  c.batch_frames = j.at("batch_frames");
  c.seed = j.at("seed");
  c.mask_spec.min_frac = j.at("mask_min_frac");
  c.mask_spec.max_frac = j.at("mask_max_frac");
  c.path_config.sigma_min = j.at("sigma_min");
  c.ablation_mode = vfnet::cond_mode_from_string(j.at("ablation_mode"));
  c.adamw.beta1 = j.at("beta1");
  c.adamw.beta2 = j.at("beta2");
  c.adamw.eps = j.at("adam_eps");
  c.adamw.weight_decay = j.at("weight_decay");
  c.clip_norm = j.at("clip_norm");
  c.checkpoint_every = j.at("checkpoint_every");
  c.log_every = j.at("log_every");
}

}  // namespace unitflow::trainer
