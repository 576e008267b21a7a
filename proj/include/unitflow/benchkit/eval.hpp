#pragma once

#include "unitflow/benchkit/metrics.hpp"
#include "unitflow/sampler/sampler.hpp"
#include "unitflow/trainer/checkpoint.hpp"
#include "unitflow/trainer/data.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace unitflow::benchkit {

struct EvalOptions {
  sampler::SwayConfig sway;
  std::uint64_t seed = 0;
  int max_items = -1;
  dsp::VadConfig vad;
  std::optional<std::filesystem::path> output_dir;  // generated mels + report.json
  int save_examples = 3;  // degraded/generated/clean triples kept for heatmaps
};

struct EvalItem {
  std::string id;
  std::vector<int> script;
  std::vector<int> hypothesis;
  double pseudo_wer = 0.0;
  double mel_mse_dtw = 0.0;
  double baseline_pseudo_wer = 0.0;
  double baseline_mel_mse_dtw = 0.0;
  int generated_frames = 0;
  int clean_frames = 0;
};

struct EvalReport {
  std::string cond_mode;
  std::vector<EvalItem> items;
  double pseudo_wer = 0.0;
  double mel_mse_dtw = 0.0;
  double baseline_pseudo_wer = 0.0;
  double baseline_mel_mse_dtw = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"cond_mode", cond_mode},
                        {"n", items.size()},
                        {"pseudo_wer", pseudo_wer},
                        {"mel_mse_dtw", mel_mse_dtw},
                        {"baseline_pseudo_wer", baseline_pseudo_wer},
                        {"baseline_mel_mse_dtw", baseline_mel_mse_dtw}};
    auto& arr = j["items"] = nlohmann::json::array();
    for (const auto& it : items)
      arr.push_back({{"id", it.id},
                     {"script", it.script},
                     {"hypothesis", it.hypothesis},
                     {"pseudo_wer", it.pseudo_wer},
                     {"mel_mse_dtw", it.mel_mse_dtw},
                     {"baseline_pseudo_wer", it.baseline_pseudo_wer},
                     {"baseline_mel_mse_dtw", it.baseline_mel_mse_dtw},
                     {"generated_frames", it.generated_frames},
                     {"clean_frames", it.clean_frames}});
    return j;
  }
};

/// Converts every held-out entry with the checkpoint and scores it against the
/// clean target. The baseline scores the trimmed degraded mel itself.
inline EvalReport evaluate(const CorpusManifest& corpus, const units::Codebook& codebook,
                           const trainer::Checkpoint& ck, const EvalOptions& opt) {
  const SynthVoice voice = make_voice(corpus.config.voice);
  const vfnet::VectorFieldNet<float> net(ck.model);
  const bool units_mode = ck.model.cond_mode == vfnet::CondMode::units;
  EvalReport report;
  report.cond_mode = vfnet::to_string(ck.model.cond_mode);
  const auto entries = corpus.split("test");
  require(!entries.empty(), ErrorKind::InvalidInput, "corpus has no test entries");
  if (opt.output_dir) std::filesystem::create_directories(*opt.output_dir);

  int index = 0;
  for (const auto* e : entries) {
    if (opt.max_items >= 0 && index >= opt.max_items) break;
    const MatF clean = dsp::load_mel(e->clean_mel_path).frames;
    units::FeatureMatrix feats = units::load_features(e->degraded_feature_path);
    MatF deg = dsp::load_mel(e->degraded_mel_path).frames;
    trainer::trim_degraded(feats, deg, opt.vad);

    sampler::GenerationRequest req;
    req.seed = entry_seed(opt.seed, 3, index, 0);
    if (units_mode) {
      req.units = units::collapse(units::assign(feats, codebook));
      req.target_frames = sampler::target_length(req.units.size(), ck.duplication_factor);
    } else {
      req.cond_mel = deg;
      req.target_frames = std::max(1, static_cast<int>(std::lround(deg.rows() * ck.length_ratio)));
    }
    const dsp::MelSpectrogram gen = sampler::generate(req, ck.state.params, net, opt.sway, ck.train.path_config);

    EvalItem it;
    it.id = e->id;
    it.script = e->script;
    it.hypothesis = decode_symbols(gen.frames, voice);
    it.pseudo_wer = pseudo_wer(it.hypothesis, e->script);
    dsp::MelSpectrogram clean_m, deg_m;
    clean_m.frames = clean;
    deg_m.frames = deg;
    it.mel_mse_dtw = mel_mse(gen, clean_m, true);
    it.baseline_pseudo_wer = pseudo_wer(decode_symbols(deg, voice), e->script);
    it.baseline_mel_mse_dtw = mel_mse(deg_m, clean_m, true);
    it.generated_frames = static_cast<int>(gen.frames.rows());
    it.clean_frames = static_cast<int>(clean.rows());
    if (opt.output_dir) {
      dsp::save_mel(*opt.output_dir / (e->id + ".generated.ufmel"), gen);
      if (index < opt.save_examples) {
        dsp::save_mel(*opt.output_dir / (e->id + ".degraded.ufmel"), deg_m);
        dsp::save_mel(*opt.output_dir / (e->id + ".clean.ufmel"), clean_m);
      }
    }
    report.items.push_back(std::move(it));
    ++index;
  }
  const double n = static_cast<double>(report.items.size());
  for (const auto& it : report.items) {
    report.pseudo_wer += it.pseudo_wer / n;
    report.mel_mse_dtw += it.mel_mse_dtw / n;
    report.baseline_pseudo_wer += it.baseline_pseudo_wer / n;
    report.baseline_mel_mse_dtw += it.baseline_mel_mse_dtw / n;
  }
  if (opt.output_dir) io::write_file_atomic(*opt.output_dir / "report.json", report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace unitflow::benchkit
