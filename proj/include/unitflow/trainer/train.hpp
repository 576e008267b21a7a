#pragma once

#include "unitflow/cfm/flow_batch.hpp"
#include "unitflow/trainer/checkpoint.hpp"
#include "unitflow/trainer/data.hpp"
#include "unitflow/vfnet/objective.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

namespace unitflow::trainer {

/// Pads a list of examples into one objective batch, drawing (t, x0, mask) per
/// example from `rng`. Rows past an example's own length carry BATCH_PAD and
/// zero loss weight. In the mel-input ablation a sequence spans
/// max(target, condition) frames; target rows past the clean length are noise
/// only and excluded from the loss.
inline vfnet::ObjectiveBatch<float> assemble_batch(const std::vector<const TrainExample*>& items,
                                                   const vfnet::ModelConfig& model, const TrainConfig& cfg,
                                                   std::mt19937_64& rng) {
  require(!items.empty(), ErrorKind::InvalidInput, "train batch is empty");
  const auto mode = model.cond_mode;
  int frames = 0;
  for (const auto* ex : items) frames = std::max(frames, ex->seq_len(mode));
  require(frames <= model.max_frames, ErrorKind::LengthOverflow,
          "batch sequence of " + std::to_string(frames) + " frames exceeds max_frames");

  const int batch = static_cast<int>(items.size());
  const Eigen::Index rows = static_cast<Eigen::Index>(batch) * frames;
  const int mel = model.mel_dim;
  vfnet::ObjectiveBatch<float> out;
  auto& in = out.input;
  in.batch = batch;
  in.frames = frames;
  in.x_t = MatF::Zero(rows, mel);
  in.x_ctx = MatF::Zero(rows, mel);
  out.target = MatF::Zero(rows, mel);
  out.loss_mask.assign(static_cast<std::size_t>(rows), 0);
  if (mode == vfnet::CondMode::units) {
    out.unit_ids.assign(static_cast<std::size_t>(rows), model.batch_pad_id());
  } else {
    out.cond_mel = MatF::Zero(rows, mel);
    out.cond_valid.assign(static_cast<std::size_t>(rows), 0);
  }

  for (int b = 0; b < batch; ++b) {
    const auto& ex = *items[b];
    require(ex.target.cols() == mel, ErrorKind::InvalidInput, ex.id + ": target mel width differs from the model");
    const Eigen::Index base = static_cast<Eigen::Index>(b) * frames;
    const auto t_len = ex.target.rows();
    const int len = ex.seq_len(mode);

    const units::PaddedUnits padded =
        mode == vfnet::CondMode::units
            ? units::pad_to_frames(units::UnitSequence{ex.units, true}, static_cast<std::size_t>(t_len),
                                   model.filler_id())
            : units::PaddedUnits{std::vector<int>(static_cast<std::size_t>(t_len), model.filler_id()),
                                 model.filler_id()};
    const cfm::FlowBatch fb = cfm::make_flow_batch(ex.target, padded, cfg.mask_spec, cfg.path_config, rng);

    in.lengths.push_back(len);
    in.t.push_back(fb.t);
    in.x_t.middleRows(base, t_len) = fb.x_t;
    in.x_ctx.middleRows(base, t_len) = fb.x_ctx;
    out.target.middleRows(base, t_len) = fb.u_t;
    for (Eigen::Index r = 0; r < t_len; ++r) out.loss_mask[base + r] = fb.mask[r];

    if (mode == vfnet::CondMode::units) {
      std::copy(padded.ids.begin(), padded.ids.end(), out.unit_ids.begin() + base);
    } else {
      if (len > t_len) {
        const MatF extra = cfm::standard_normal(len - t_len, mel, rng);
        in.x_t.middleRows(base + t_len, len - t_len) =
            extra * static_cast<float>(cfm::path_std(fb.t, cfg.path_config.sigma_min));
      }
      const auto c_len = ex.cond_mel.rows();
      out.cond_mel.middleRows(base, c_len) = ex.cond_mel;
      std::fill_n(out.cond_valid.begin() + base, c_len, 1);
    }
  }
  return out;
}

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

/// One AdamW update on the masked flow-matching loss. The update uses
/// lr_schedule(step + 1); a non-finite loss or gradient leaves the state untouched.
inline StepResult train_step(const std::vector<const TrainExample*>& items, TrainState& state,
                             const TrainConfig& cfg, const vfnet::VectorFieldNet<float>& net) {
  auto rng = state.rng;
  auto batch = assemble_batch(items, net.config(), cfg, rng);
  auto grads = state.params.zeros_like();
  StepResult r;
  r.loss = vfnet::loss_and_grad(net, state.params, batch, &grads);
  r.grad_norm = global_norm(grads);
  if (!std::isfinite(r.loss) || !std::isfinite(r.grad_norm))
    throw Error(ErrorKind::DivergenceError, "non-finite loss at step " + std::to_string(state.step + 1));
  clip_global_norm(grads, cfg.clip_norm);
  r.lr = lr_schedule(state.step + 1, cfg);
  adamw_step(state.params, grads, state.optim, r.lr, cfg.adamw);
  state.rng = rng;
  ++state.step;
  state.loss_history.emplace_back(state.step, r.loss);
  return r;
}

/// Deterministic batch plan for one epoch.
inline std::vector<std::vector<int>> epoch_plan(const PreparedData& data, const TrainConfig& cfg,
                                                vfnet::CondMode mode, long epoch) {
  std::vector<int> lengths;
  for (const auto& ex : data.examples) lengths.push_back(ex.seq_len(mode));
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0xba7cu};
  std::mt19937_64 rng(seq);
  return plan_batches(lengths, cfg.batch_frames, rng);
}

struct StageOptions {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> init_checkpoint;    // finetune: pretrained weights
  std::optional<std::filesystem::path> resume_checkpoint;  // continue an interrupted stage
  bool allow_scratch_finetune = false;
  long stop_after = -1;  // stop early at this step (still checkpointed), for interruption tests
  std::function<void(long step, const StepResult&)> on_step;
};

struct StageResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_csv;
  Checkpoint final;
  std::size_t skipped = 0;
};

inline std::string checkpoint_name(long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step-%08ld.ufckp", step);
  return buf;
}

/// Trains one stage on the corpus train split. Checkpoints land in
/// run_dir/checkpoints (plus `last.ufckp`) and per-step metrics in
/// run_dir/metrics.csv as `step,loss,lr,wall_s`.
inline StageResult run_stage(const benchkit::CorpusManifest& corpus, const units::Codebook& codebook,
                             const vfnet::ModelConfig& model, const TrainConfig& cfg, const StageOptions& opt) {
  cfg.validate();
  model.validate();
  require(model.codebook_size() == codebook.k(), ErrorKind::IncompatibleCheckpoint,
          "model unit vocabulary expects K=" + std::to_string(model.codebook_size()) + " but codebook has K=" +
              std::to_string(codebook.k()));
  require(model.cond_mode == cfg.ablation_mode, ErrorKind::InvalidInput,
          "model condition mode differs from the training ablation mode");
  require(!corpus.entries.empty(), ErrorKind::InvalidInput, "corpus is empty");

  Checkpoint ck;
  ck.model = model;
  ck.train = cfg;
  if (opt.resume_checkpoint) {
    ck = load_checkpoint(*opt.resume_checkpoint);
    require_compatible(ck, model, opt.resume_checkpoint->string());
    require(ck.has_optimizer, ErrorKind::IncompatibleCheckpoint, "resume checkpoint has no optimizer state");
    require(ck.train.stage == cfg.stage, ErrorKind::IncompatibleCheckpoint,
            "resume checkpoint belongs to the " + to_string(ck.train.stage) + " stage");
    ck.train = cfg;
  } else if (cfg.stage == Stage::finetune) {
    if (opt.init_checkpoint) {
      const Checkpoint pre = load_checkpoint(*opt.init_checkpoint);
      require_compatible(pre, model, opt.init_checkpoint->string());
      ck.state = fresh_state(pre.state.params, cfg.seed);
    } else if (opt.allow_scratch_finetune) {
      ck.state = fresh_state(vfnet::init_params<float>(model, cfg.seed), cfg.seed);
    } else {
      throw Error(ErrorKind::IncompatibleCheckpoint,
                  "finetuning needs a pretrain checkpoint (or an explicit from-scratch override)");
    }
  } else {
    ck.state = fresh_state(vfnet::init_params<float>(model, cfg.seed), cfg.seed);
  }

  const PreparedData data = prepare_examples(corpus, "train", codebook, cfg.stage, model);
  ck.duplication_factor = data.duplication_factor;
  ck.length_ratio = data.length_ratio;
  const vfnet::VectorFieldNet<float> net(model);

  std::error_code ec;
  std::filesystem::create_directories(opt.run_dir / "checkpoints", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + opt.run_dir.string() + ": " + ec.message());
  const auto csv_path = opt.run_dir / "metrics.csv";
  std::ofstream csv;
  if (opt.resume_checkpoint && std::filesystem::exists(csv_path)) {
    // keep the rows up to the resumed step so the log stays one row per logged step
    std::ifstream old(csv_path);
    std::string line, kept;
    std::getline(old, line);
    kept = line + "\n";
    while (std::getline(old, line))
      if (!line.empty() && std::stol(line.substr(0, line.find(','))) <= ck.state.step) kept += line + "\n";
    old.close();
    csv.open(csv_path, std::ios::trunc);
    csv << kept;
  } else {
    csv.open(csv_path, std::ios::trunc);
    csv << "step,loss,lr,wall_s\n";
  }
  if (!csv) throw Error(ErrorKind::IoError, "cannot write " + csv_path.string());
  csv << std::setprecision(9);

  auto plan = epoch_plan(data, cfg, model.cond_mode, ck.state.epoch);
  const auto t0 = std::chrono::steady_clock::now();
  auto save = [&](long step) {
    save_checkpoint(opt.run_dir / "checkpoints" / checkpoint_name(step), ck);
    save_checkpoint(opt.run_dir / "last.ufckp", ck);
  };

  const long stop = opt.stop_after >= 0 ? std::min(opt.stop_after, cfg.total_updates) : cfg.total_updates;
  while (ck.state.step < stop) {
    if (ck.state.cursor >= static_cast<long>(plan.size())) {
      ++ck.state.epoch;
      ck.state.cursor = 0;
      plan = epoch_plan(data, cfg, model.cond_mode, ck.state.epoch);
    }
    std::vector<const TrainExample*> items;
    for (int i : plan[static_cast<std::size_t>(ck.state.cursor)]) items.push_back(&data.examples[i]);
    const StepResult r = train_step(items, ck.state, cfg, net);
    ++ck.state.cursor;
    const long step = ck.state.step;
    if (step % cfg.log_every == 0 || step == cfg.total_updates) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      csv << step << ',' << r.loss << ',' << r.lr << ',' << wall << '\n';
      csv.flush();
    }
    if (opt.on_step) opt.on_step(step, r);
    if (step % cfg.checkpoint_every == 0 && step != stop) save(step);
  }
  save(ck.state.step);

  StageResult res;
  res.checkpoint = opt.run_dir / "last.ufckp";
  res.metrics_csv = csv_path;
  res.final = std::move(ck);
  res.skipped = data.skipped;
  return res;
}

}  // namespace unitflow::trainer
