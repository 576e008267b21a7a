#pragma once

#include "unitflow/benchkit/corpus.hpp"
#include "unitflow/dsp/vad.hpp"
#include "unitflow/sampler/sampler.hpp"
#include "unitflow/trainer/config.hpp"
#include "unitflow/units/kmeans.hpp"
#include "unitflow/vfnet/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace unitflow::cli {

/// Everything a pipeline run depends on. Loaded from an INI file with
/// `[section]` headers; flags override the file, which overrides the defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string run_root = "runs";
  int workers = 1;

  int n_train = 200;
  int n_test = 20;
  benchkit::CorpusConfig corpus;

  int k = 512;
  units::KMeansOptions kmeans;

  std::string model_preset = "tiny";
  vfnet::ModelConfig model = vfnet::ModelConfig::tiny(512);

  trainer::TrainConfig pretrain = trainer::TrainConfig::paper_pretrain();
  trainer::TrainConfig finetune = trainer::TrainConfig::paper_finetune();

  sampler::SwayConfig sway;
  dsp::VadConfig vad;
  int eval_max_items = -1;
  int eval_save_examples = 3;

  trainer::TrainConfig& stage(trainer::Stage s) { return s == trainer::Stage::pretrain ? pretrain : finetune; }

  void validate() const {
    require(n_train >= 1 && n_test >= 1, ErrorKind::InvalidInput, "corpus.n_train and corpus.n_test must be >= 1");
    require(k >= 2, ErrorKind::InvalidInput, "units.k must be >= 2");
    require(workers >= 1, ErrorKind::InvalidInput, "run.workers must be >= 1");
    require(model.unit_vocab == k + 2, ErrorKind::InvalidInput, "model vocabulary does not match units.k");
    require(model.mel_dim == corpus.voice.mel_dim, ErrorKind::InvalidInput,
            "model mel_dim differs from corpus.mel_dim");
    corpus.validate();
    model.validate();
    pretrain.validate();
    finetune.validate();
    sway.validate();
    vad.validate();
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"n_train", n_train},
            {"n_test", n_test},
            {"corpus", corpus},
            {"k", k},
            {"kmeans", {{"max_iters", kmeans.max_iters}, {"tol", kmeans.tol}, {"n_init", kmeans.n_init}}},
            {"model", model},
            {"pretrain", pretrain},
            {"finetune", finetune},
            {"sampler", {{"steps", sway.n_steps}, {"sway", sway.s}, {"method", sampler::to_string(sway.method)}}},
            {"vad",
             {{"frame_s", vad.frame_s},
              {"energy_threshold_db", vad.energy_threshold_db},
              {"edge_threshold_db", vad.edge_threshold_db},
              {"min_speech_frames", vad.min_speech_frames}}},
            {"eval", {{"max_items", eval_max_items}, {"save_examples", eval_save_examples}}}};
  }

  /// Identity of a run directory: the whole resolved config except the
  /// condition mode, so both ablation arms share corpus and codebook.
  std::string hash() const {
    nlohmann::json j = to_json();
    j["model"].erase("cond_mode");
    for (const char* s : {"pretrain", "finetune"}) j[s].erase("ablation_mode");
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 12);
  }
};

using Settings = std::map<std::string, std::string>;  // "section.key" -> value

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error(ErrorKind::InvalidInput, key + ": expected a boolean, got '" + text + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    in >> v;
    require(static_cast<bool>(in) && (in >> std::ws).eof(), ErrorKind::InvalidInput,
            key + ": cannot parse '" + text + "'");
    return v;
  }
}

struct Field {
  std::string help;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
};

template <typename T>
Field field(std::string help, std::function<T&(RunConfig&)> ref) {
  return {std::move(help), [ref](RunConfig& c, const std::string& key, const std::string& v) {
            ref(c) = parse_value<T>(key, v);
          }};
}

inline void add_train_fields(std::map<std::string, Field>& f, const std::string& s, trainer::Stage stage) {
  auto t = [stage](RunConfig& c) -> trainer::TrainConfig& { return c.stage(stage); };
  f[s + ".peak_lr"] = field<double>("peak learning rate", [t](RunConfig& c) -> double& { return t(c).peak_lr; });
  f[s + ".warmup_steps"] = field<long>("linear warmup updates", [t](RunConfig& c) -> long& { return t(c).warmup_steps; });
  f[s + ".total_updates"] =
      field<long>("total optimizer updates", [t](RunConfig& c) -> long& { return t(c).total_updates; });
  f[s + ".batch_frames"] = field<int>("mel frames per batch", [t](RunConfig& c) -> int& { return t(c).batch_frames; });
  f[s + ".clip_norm"] = field<double>("global gradient norm clip", [t](RunConfig& c) -> double& { return t(c).clip_norm; });
  f[s + ".weight_decay"] =
      field<double>("decoupled weight decay", [t](RunConfig& c) -> double& { return t(c).adamw.weight_decay; });
  f[s + ".beta1"] = field<double>("Adam beta1", [t](RunConfig& c) -> double& { return t(c).adamw.beta1; });
  f[s + ".beta2"] = field<double>("Adam beta2", [t](RunConfig& c) -> double& { return t(c).adamw.beta2; });
  f[s + ".eps"] = field<double>("Adam epsilon", [t](RunConfig& c) -> double& { return t(c).adamw.eps; });
  f[s + ".checkpoint_every"] =
      field<long>("updates between checkpoints", [t](RunConfig& c) -> long& { return t(c).checkpoint_every; });
  f[s + ".log_every"] = field<long>("updates between metric rows", [t](RunConfig& c) -> long& { return t(c).log_every; });
}

inline const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> s = [] {
    std::map<std::string, Field> f;
    f["run.seed"] = field<std::uint64_t>("seed for corpus, k-means, training and sampling",
                                         [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    f["run.root"] = field<std::string>("directory holding run directories (env UNITFLOW_RUN_ROOT)",
                                       [](RunConfig& c) -> std::string& { return c.run_root; });
    f["run.workers"] = field<int>("worker threads for corpus generation (env UNITFLOW_WORKERS)",
                                  [](RunConfig& c) -> int& { return c.workers; });

    f["corpus.n_train"] = field<int>("training scripts", [](RunConfig& c) -> int& { return c.n_train; });
    f["corpus.n_test"] = field<int>("held-out scripts", [](RunConfig& c) -> int& { return c.n_test; });
    f["corpus.n_symbols"] = field<int>("symbol inventory", [](RunConfig& c) -> int& { return c.corpus.voice.n_symbols; });
    f["corpus.mel_dim"] = field<int>("mel bands", [](RunConfig& c) -> int& { return c.corpus.voice.mel_dim; });
    f["corpus.feature_dim"] =
        field<int>("feature dimension", [](RunConfig& c) -> int& { return c.corpus.voice.feature_dim; });
    f["corpus.min_duration"] =
        field<int>("shortest symbol duration", [](RunConfig& c) -> int& { return c.corpus.voice.min_duration; });
    f["corpus.max_duration"] =
        field<int>("longest symbol duration", [](RunConfig& c) -> int& { return c.corpus.voice.max_duration; });
    f["corpus.voice_seed"] =
        field<std::uint64_t>("voice seed", [](RunConfig& c) -> std::uint64_t& { return c.corpus.voice.seed; });
    f["corpus.min_script_len"] =
        field<int>("shortest script", [](RunConfig& c) -> int& { return c.corpus.min_script_len; });
    f["corpus.max_script_len"] =
        field<int>("longest script", [](RunConfig& c) -> int& { return c.corpus.max_script_len; });
    f["corpus.clean_noise_std"] =
        field<double>("clean mel noise", [](RunConfig& c) -> double& { return c.corpus.clean_noise_std; });
    f["corpus.severity"] =
        field<double>("degradation severity in [0, 1]", [](RunConfig& c) -> double& { return c.corpus.degrade.severity; });
    f["corpus.stretch_min"] =
        field<double>("minimum segment stretch", [](RunConfig& c) -> double& { return c.corpus.degrade.stretch_min; });
    f["corpus.stretch_max"] =
        field<double>("maximum segment stretch", [](RunConfig& c) -> double& { return c.corpus.degrade.stretch_max; });
    f["corpus.segment_min"] =
        field<int>("shortest stretched segment", [](RunConfig& c) -> int& { return c.corpus.degrade.segment_min; });
    f["corpus.segment_max"] =
        field<int>("longest stretched segment", [](RunConfig& c) -> int& { return c.corpus.degrade.segment_max; });
    f["corpus.repeat_prob"] =
        field<double>("frame repetition probability", [](RunConfig& c) -> double& { return c.corpus.degrade.repeat_prob; });
    f["corpus.jitter_std"] =
        field<double>("feature jitter", [](RunConfig& c) -> double& { return c.corpus.degrade.jitter_std; });
    f["corpus.mel_noise_std"] =
        field<double>("degraded mel noise", [](RunConfig& c) -> double& { return c.corpus.degrade.mel_noise_std; });
    f["corpus.speaker_tilt"] =
        field<double>("spectral tilt", [](RunConfig& c) -> double& { return c.corpus.degrade.speaker_tilt; });
    f["corpus.speaker_warp"] =
        field<double>("frequency warp log-std", [](RunConfig& c) -> double& { return c.corpus.degrade.speaker_warp; });
    f["corpus.edge_silence_frames"] = field<int>(
        "pause frames around degraded speech", [](RunConfig& c) -> int& { return c.corpus.degrade.edge_silence_frames; });

    f["units.k"] = field<int>("k-means clusters", [](RunConfig& c) -> int& { return c.k; });
    f["units.max_iters"] = field<int>("Lloyd iterations", [](RunConfig& c) -> int& { return c.kmeans.max_iters; });
    f["units.tol"] = field<double>("centroid shift tolerance", [](RunConfig& c) -> double& { return c.kmeans.tol; });
    f["units.n_init"] = field<int>("k-means++ restarts", [](RunConfig& c) -> int& { return c.kmeans.n_init; });

    f["model.preset"] = field<std::string>("tiny, paper_base or paper_small; other model keys refine it",
                                           [](RunConfig& c) -> std::string& { return c.model_preset; });
    f["model.layers"] = field<int>("transformer blocks", [](RunConfig& c) -> int& { return c.model.layers; });
    f["model.heads"] = field<int>("attention heads", [](RunConfig& c) -> int& { return c.model.heads; });
    f["model.dim"] = field<int>("model width", [](RunConfig& c) -> int& { return c.model.dim; });
    f["model.head_width"] =
        field<int>("per-head attention width, 0 for dim / heads", [](RunConfig& c) -> int& { return c.model.head_width; });
    f["model.ff_mult"] = field<int>("feed-forward expansion", [](RunConfig& c) -> int& { return c.model.ff_mult; });
    f["model.unit_emb_dim"] = field<int>("unit embedding width", [](RunConfig& c) -> int& { return c.model.unit_emb_dim; });
    f["model.max_frames"] = field<int>("longest sequence", [](RunConfig& c) -> int& { return c.model.max_frames; });
    f["model.time_freq_dim"] =
        field<int>("sinusoidal time embedding width", [](RunConfig& c) -> int& { return c.model.time_freq_dim; });
    f["model.abs_positions"] =
        field<bool>("add absolute sinusoidal positions", [](RunConfig& c) -> bool& { return c.model.abs_positions; });
    f["model.cond_mode"] = {"units or mel_input", [](RunConfig& c, const std::string&, const std::string& v) {
                              c.model.cond_mode = vfnet::cond_mode_from_string(v);
                            }};

    f["flow.sigma_min"] = {"residual noise at t = 1", [](RunConfig& c, const std::string& k, const std::string& v) {
                             c.pretrain.path_config.sigma_min = c.finetune.path_config.sigma_min = parse_value<double>(k, v);
                           }};
    f["flow.mask_min"] = {"smallest masked fraction", [](RunConfig& c, const std::string& k, const std::string& v) {
                            c.pretrain.mask_spec.min_frac = c.finetune.mask_spec.min_frac = parse_value<double>(k, v);
                          }};
    f["flow.mask_max"] = {"largest masked fraction", [](RunConfig& c, const std::string& k, const std::string& v) {
                            c.pretrain.mask_spec.max_frac = c.finetune.mask_spec.max_frac = parse_value<double>(k, v);
                          }};

    add_train_fields(f, "pretrain", trainer::Stage::pretrain);
    add_train_fields(f, "finetune", trainer::Stage::finetune);

    f["sampler.steps"] = field<int>("ODE steps", [](RunConfig& c) -> int& { return c.sway.n_steps; });
    f["sampler.sway"] = field<double>("sway coefficient in [-1, 1]", [](RunConfig& c) -> double& { return c.sway.s; });
    f["sampler.method"] = {"euler or midpoint", [](RunConfig& c, const std::string&, const std::string& v) {
                             c.sway.method = sampler::ode_method_from_string(v);
                           }};

    f["vad.frame_s"] = field<double>("waveform VAD frame length", [](RunConfig& c) -> double& { return c.vad.frame_s; });
    f["vad.energy_threshold_db"] =
        field<double>("interior speech threshold", [](RunConfig& c) -> double& { return c.vad.energy_threshold_db; });
    f["vad.edge_threshold_db"] =
        field<double>("threshold that opens a speech region", [](RunConfig& c) -> double& { return c.vad.edge_threshold_db; });
    f["vad.min_speech_frames"] =
        field<int>("shortest speech run", [](RunConfig& c) -> int& { return c.vad.min_speech_frames; });

    f["eval.max_items"] = field<int>("held-out items scored, -1 for all", [](RunConfig& c) -> int& { return c.eval_max_items; });
    f["eval.save_examples"] =
        field<int>("examples kept for heatmaps", [](RunConfig& c) -> int& { return c.eval_save_examples; });
    return f;
  }();
  return s;
}

inline vfnet::ModelConfig preset(const std::string& name, int k) {
  if (name == "tiny") return vfnet::ModelConfig::tiny(k);
  if (name == "paper_base") return vfnet::ModelConfig::paper_base(k);
  if (name == "paper_small") return vfnet::ModelConfig::paper_small(k);
  throw Error(ErrorKind::InvalidInput, "model.preset: unknown preset '" + name + "'");
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, f] : detail::schema()) out.emplace_back(k, f.help);
  return out;
}

/// Flattens an INI file into "section.key" settings. Keys outside a section are rejected.
inline Settings read_settings(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidInput, "config " + path.string() + ": " + e.what());
  }
  Settings s;
  for (const auto& [section, body] : tree) {
    require(!body.empty(), ErrorKind::InvalidInput,
            "config " + path.string() + ": key '" + section + "' is outside a [section]");
    for (const auto& [key, value] : body) s[section + "." + key] = value.get_value<std::string>();
  }
  return s;
}

/// Settings from the process environment.
inline Settings env_settings() {
  Settings s;
  if (const char* v = std::getenv("UNITFLOW_RUN_ROOT"); v && *v) s["run.root"] = v;
  if (const char* v = std::getenv("UNITFLOW_WORKERS"); v && *v) s["run.workers"] = v;
  return s;
}

/// Later layers win. Unknown keys are rejected before anything is applied.
inline RunConfig resolve(const std::vector<Settings>& layers) {
  Settings merged;
  for (const auto& layer : layers)
    for (const auto& [k, v] : layer) merged[k] = v;
  const auto& sch = detail::schema();
  for (const auto& [k, v] : merged)
    require(sch.count(k) == 1, ErrorKind::InvalidInput, "unknown config key '" + k + "'");

  RunConfig c;
  auto apply = [&](const std::string& key) {
    if (auto it = merged.find(key); it != merged.end()) sch.at(key).set(c, key, it->second);
  };
  apply("units.k");
  apply("model.preset");
  c.model = detail::preset(c.model_preset, c.k);
  for (const auto& [k, v] : merged)
    if (k != "units.k" && k != "model.preset") sch.at(k).set(c, k, v);
  c.model.unit_vocab = c.k + 2;
  c.model.mel_dim = c.corpus.voice.mel_dim;
  c.corpus.workers = c.workers;
  for (auto* t : {&c.pretrain, &c.finetune}) {
    t->seed = c.seed;
    t->ablation_mode = c.model.cond_mode;
  }
  c.pretrain.stage = trainer::Stage::pretrain;
  c.finetune.stage = trainer::Stage::finetune;
  c.validate();
  return c;
}

}  // namespace unitflow::cli
