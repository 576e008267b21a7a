#pragma once

#include "unitflow/benchkit/voice.hpp"
#include "unitflow/dsp/io.hpp"
#include "unitflow/units/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace unitflow::benchkit {

struct SymbolScript {
  std::vector<int> symbols;
  std::vector<int> durations;  // frames per symbol

  int total_frames() const {
    int n = 0;
    for (int d : durations) n += d;
    return n;
  }

  void validate() const {
    require(!symbols.empty(), ErrorKind::InvalidInput, "script is empty");
    require(symbols.size() == durations.size(), ErrorKind::InvalidInput, "script/duration length mismatch");
    for (int d : durations) require(d >= 1, ErrorKind::InvalidInput, "symbol duration must be >= 1");
  }
};

inline SymbolScript make_script(const std::vector<int>& symbols, const SynthVoice& voice) {
  SymbolScript s;
  s.symbols = symbols;
  for (int sym : symbols) {
    require(sym >= 0 && sym < voice.n_symbols(), ErrorKind::InvalidInput,
            "symbol " + std::to_string(sym) + " outside the voice alphabet");
    s.durations.push_back(voice.durations[sym]);
  }
  return s;
}

/// Random symbol string without adjacent repeats.
inline std::vector<int> random_symbols(std::mt19937_64& rng, int n_symbols, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len), sym(0, n_symbols - 1);
  const int n = len(rng);
  std::vector<int> out{sym(rng)};
  while (static_cast<int>(out.size()) < n) {
    const int c = sym(rng);
    if (c != out.back()) out.push_back(c);
  }
  return out;
}

struct CleanSample {
  dsp::MelSpectrogram mel;
  units::FeatureMatrix features;
  std::vector<int> frame_symbols;
};

inline CleanSample make_clean_sample(const SymbolScript& script, std::uint64_t seed, const SynthVoice& voice,
                                     double noise_std = 0.1) {
  script.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int frames = script.total_frames();
  CleanSample out;
  out.mel.frames.resize(frames, voice.mel_dim());
  int r = 0;
  for (std::size_t i = 0; i < script.symbols.size(); ++i) {
    const int s = script.symbols[i];
    require(s >= 0 && s < voice.n_symbols(), ErrorKind::InvalidInput, "symbol outside the voice alphabet");
    for (int k = 0; k < script.durations[i]; ++k, ++r) {
      for (int c = 0; c < voice.mel_dim(); ++c)
        out.mel.frames(r, c) = static_cast<float>(voice.patterns(s, c) + noise_std * n01(rng));
      out.frame_symbols.push_back(s);
    }
  }
  out.features.rows = voice.features_of(out.mel.frames);
  return out;
}

struct DegradeConfig {
  double severity = 0.5;
  double stretch_min = 1.0;
  double stretch_max = 1.6;
  int segment_min = 5;
  int segment_max = 14;
  double repeat_prob = 0.5;
  double jitter_std = 0.6;
  double mel_noise_std = 0.3;
  double speaker_tilt = 1.0;
  double speaker_warp = 0.3;  // log-std of the per-utterance frequency-axis scale
  int edge_silence_frames = 8;
  std::uint64_t seed = 0;

  void validate() const {
    require(severity >= 0.0 && severity <= 1.0, ErrorKind::InvalidInput, "severity must lie in [0, 1]");
    require(stretch_min >= 1.0 && stretch_max >= stretch_min, ErrorKind::InvalidInput,
            "stretch range must satisfy 1 <= min <= max");
    require(segment_min >= 1 && segment_max >= segment_min, ErrorKind::InvalidInput, "bad segment length range");
    require(repeat_prob >= 0.0 && repeat_prob <= 1.0, ErrorKind::InvalidInput, "repeat_prob must lie in [0, 1]");
    require(jitter_std >= 0.0 && mel_noise_std >= 0.0 && speaker_tilt >= 0.0 && speaker_warp >= 0.0 &&
                edge_silence_frames >= 0,
            ErrorKind::InvalidInput, "degradation magnitudes must be non-negative");
  }
};

namespace detail {

// Source frame per output frame; -1 marks an inserted pause frame.
inline std::vector<int> degrade_index_map(int frames, const DegradeConfig& cfg, std::mt19937_64& rng) {
  std::vector<int> stretched;
  std::uniform_int_distribution<int> seg(cfg.segment_min, cfg.segment_max);
  std::uniform_real_distribution<double> factor(cfg.stretch_min, cfg.stretch_max);
  for (int i = 0; i < frames;) {
    const int len = std::min(seg(rng), frames - i);
    const double f = 1.0 + cfg.severity * (factor(rng) - 1.0);
    const int n = static_cast<int>(std::lround(len * f));
    for (int k = 0; k < n; ++k) stretched.push_back(i + std::min(len - 1, static_cast<int>(k / f)));
    i += len;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double p = cfg.repeat_prob * cfg.severity;
  std::vector<int> repeated;
  repeated.reserve(stretched.size() * 2);
  for (int j : stretched) {
    repeated.push_back(j);
    if (u01(rng) < p) repeated.push_back(j);
  }
  std::uniform_real_distribution<double> pause(0.0, cfg.edge_silence_frames);
  const int lead = static_cast<int>(std::lround(cfg.severity * pause(rng)));
  const int trail = static_cast<int>(std::lround(cfg.severity * pause(rng)));
  std::vector<int> out(lead, -1);
  out.insert(out.end(), repeated.begin(), repeated.end());
  out.insert(out.end(), trail, -1);
  return out;
}

inline void add_noise(MatF& m, double stddev, std::mt19937_64& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i] + stddev * n01(rng));
}

// Resamples every row along the channel axis at c * scale (linear interpolation, clamped at the edges).
inline MatF warp_channels(const MatF& m, double scale) {
  if (scale == 1.0) return m;
  const Eigen::Index n = m.cols();
  MatF out(m.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double src = std::clamp(static_cast<double>(c) * scale, 0.0, static_cast<double>(n - 1));
    const auto lo = static_cast<Eigen::Index>(std::floor(src));
    const auto hi = std::min(lo + 1, n - 1);
    const auto a = static_cast<float>(src - static_cast<double>(lo));
    out.col(c) = (1.0f - a) * m.col(lo) + a * m.col(hi);
  }
  return out;
}

template <typename RowFn>
MatF gather(const std::vector<int>& index, Eigen::Index cols, RowFn&& row_of) {
  MatF out(static_cast<Eigen::Index>(index.size()), cols);
  for (std::size_t r = 0; r < index.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = row_of(index[r]);
  return out;
}

}  // namespace detail

struct DegradedSample {
  dsp::MelSpectrogram mel;
  units::FeatureMatrix features;
};

/// Degrades features and mel through one shared frame map (stretch, repeats,
/// pauses). Features then get jitter. The mel additionally takes on a random
/// per-utterance voice (frequency-axis scaling and spectral tilt) plus noise,
/// which the speaker-robust features do not see.
inline DegradedSample degrade_sample(const CleanSample& clean, const DegradeConfig& cfg, const SynthVoice& voice) {
  cfg.validate();
  clean.features.validate();
  require(clean.mel.frames.rows() == clean.features.rows.rows(), ErrorKind::InvalidInput,
          "degrade: mel and features disagree on frame count");
  DegradedSample out;
  out.mel.config = clean.mel.config;
  if (cfg.severity == 0.0) {
    out.mel = clean.mel;
    out.features = clean.features;
    return out;
  }
  std::mt19937_64 rng(cfg.seed);
  const auto index = detail::degrade_index_map(static_cast<int>(clean.features.rows.rows()), cfg, rng);

  const MatF silence_feat = voice.features_of(MatF(voice.silence));
  out.features.rows = detail::gather(index, clean.features.rows.cols(), [&](int j) -> RowVec<float> {
    return j < 0 ? RowVec<float>(silence_feat.row(0)) : RowVec<float>(clean.features.rows.row(j));
  });
  detail::add_noise(out.features.rows, cfg.jitter_std * cfg.severity, rng);

  std::normal_distribution<double> n01(0.0, 1.0);
  const double slope = n01(rng), offset = n01(rng);
  const double scale = std::exp(cfg.severity * cfg.speaker_warp * n01(rng));
  const int mel_dim = static_cast<int>(clean.mel.frames.cols());
  const MatF warped = detail::warp_channels(clean.mel.frames, scale);
  RowVec<float> tilt(mel_dim);
  for (int c = 0; c < mel_dim; ++c) {
    const double x = mel_dim > 1 ? -1.0 + 2.0 * c / (mel_dim - 1) : 0.0;
    tilt(c) = static_cast<float>(cfg.speaker_tilt * cfg.severity * (slope * x + offset));
  }
  out.mel.frames = detail::gather(index, mel_dim, [&](int j) -> RowVec<float> {
    return j < 0 ? RowVec<float>(voice.silence) : RowVec<float>(warped.row(j) + tilt);
  });
  detail::add_noise(out.mel.frames, cfg.mel_noise_std * cfg.severity, rng);
  return out;
}

/// Feature-side view of `degrade_sample`; identical features for the same config.
inline units::FeatureMatrix degrade(const units::FeatureMatrix& features, const DegradeConfig& cfg,
                                    const SynthVoice& voice) {
  cfg.validate();
  features.validate();
  if (cfg.severity == 0.0) return features;
  std::mt19937_64 rng(cfg.seed);
  const auto index = detail::degrade_index_map(static_cast<int>(features.rows.rows()), cfg, rng);
  const MatF silence_feat = voice.features_of(MatF(voice.silence));
  units::FeatureMatrix out;
  out.rows = detail::gather(index, features.rows.cols(), [&](int j) -> RowVec<float> {
    return j < 0 ? RowVec<float>(silence_feat.row(0)) : RowVec<float>(features.rows.row(j));
  });
  detail::add_noise(out.rows, cfg.jitter_std * cfg.severity, rng);
  return out;
}

struct CorpusConfig {
  VoiceConfig voice;
  DegradeConfig degrade;
  int min_script_len = 4;
  int max_script_len = 10;
  double clean_noise_std = 0.1;
  int workers = 1;

  void validate() const {
    voice.validate();
    degrade.validate();
    require(min_script_len >= 1 && max_script_len >= min_script_len, ErrorKind::InvalidInput,
            "bad script length range");
    require(clean_noise_std >= 0.0, ErrorKind::InvalidInput, "clean_noise_std must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"n_symbols", c.voice.n_symbols},       {"mel_dim", c.voice.mel_dim},
       {"feature_dim", c.voice.feature_dim},   {"min_duration", c.voice.min_duration},
       {"max_duration", c.voice.max_duration}, {"voice_seed", c.voice.seed},
       {"severity", c.degrade.severity},       {"stretch_min", c.degrade.stretch_min},
       {"stretch_max", c.degrade.stretch_max}, {"segment_min", c.degrade.segment_min},
       {"segment_max", c.degrade.segment_max}, {"repeat_prob", c.degrade.repeat_prob},
       {"jitter_std", c.degrade.jitter_std},   {"mel_noise_std", c.degrade.mel_noise_std},
       {"speaker_tilt", c.degrade.speaker_tilt}, {"speaker_warp", c.degrade.speaker_warp},
       {"edge_silence_frames", c.degrade.edge_silence_frames},
       {"min_script_len", c.min_script_len},   {"max_script_len", c.max_script_len},
       {"clean_noise_std", c.clean_noise_std}};
}

inline void from_json(const nlohmann::json& j, CorpusConfig& c) {
  c.voice.n_symbols = j.at("n_symbols");
  c.voice.mel_dim = j.at("mel_dim");
  c.voice.feature_dim = j.at("feature_dim");
  c.voice.min_duration = j.at("min_duration");
  c.voice.max_duration = j.at("max_duration");
  c.voice.seed = j.at("voice_seed");
  c.degrade.severity = j.at("severity");
  c.degrade.stretch_min = j.at("stretch_min");
  c.degrade.stretch_max = j.at("stretch_max");
  c.degrade.segment_min = j.at("segment_min");
  c.degrade.segment_max = j.at("segment_max");
  c.degrade.repeat_prob = j.at("repeat_prob");
  c.degrade.jitter_std = j.at("jitter_std");
  c.degrade.mel_noise_std = j.at("mel_noise_std");
  c.degrade.speaker_tilt = j.at("speaker_tilt");
  c.degrade.speaker_warp = j.at("speaker_warp");
  c.degrade.edge_silence_frames = j.at("edge_silence_frames");
  c.min_script_len = j.at("min_script_len");
  c.max_script_len = j.at("max_script_len");
  c.clean_noise_std = j.at("clean_noise_std");
}

struct ManifestEntry {
  std::string id;
  std::string split;  // "train" or "test" (held-out scripts)
  std::vector<int> script;
  double severity = 0.0;
  std::filesystem::path clean_mel_path;
  std::filesystem::path clean_feature_path;
  std::filesystem::path degraded_feature_path;
  std::filesystem::path degraded_mel_path;
  std::filesystem::path script_path;
};

struct CorpusManifest {
  std::filesystem::path root;
  CorpusConfig config;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(const std::string& name) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == name) out.push_back(&e);
    return out;
  }
};

inline std::string manifest_line(const ManifestEntry& e) {
  const nlohmann::json j = {{"id", e.id},
                            {"split", e.split},
                            {"script", e.script},
                            {"severity", e.severity},
                            {"clean_mel_path", e.clean_mel_path.generic_string()},
                            {"clean_feature_path", e.clean_feature_path.generic_string()},
                            {"degraded_feature_path", e.degraded_feature_path.generic_string()},
                            {"degraded_mel_path", e.degraded_mel_path.generic_string()},
                            {"script_path", e.script_path.generic_string()}};
  return j.dump();
}

/// Reads `manifest.jsonl` and `corpus.json` from a corpus directory; paths are
/// resolved relative to it.
inline CorpusManifest load_manifest(const std::filesystem::path& dir) {
  CorpusManifest m;
  m.root = dir;
  try {
    m.config = nlohmann::json::parse(io::read_file(dir / "corpus.json")).get<CorpusConfig>();
    std::istringstream lines(io::read_file(dir / "manifest.jsonl"));
    std::string line;
    std::set<std::string> ids;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id");
      e.split = j.at("split");
      e.script = j.at("script").get<std::vector<int>>();
      e.severity = j.at("severity");
      e.clean_mel_path = dir / j.at("clean_mel_path").get<std::string>();
      e.clean_feature_path = dir / j.at("clean_feature_path").get<std::string>();
      e.degraded_feature_path = dir / j.at("degraded_feature_path").get<std::string>();
      e.degraded_mel_path = dir / j.at("degraded_mel_path").get<std::string>();
      e.script_path = dir / j.at("script_path").get<std::string>();
      require(ids.insert(e.id).second, ErrorKind::InvalidInput, "duplicate manifest id " + e.id);
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::IoError, "malformed corpus in " + dir.string() + ": " + ex.what());
  }
  return m;
}

inline std::uint64_t entry_seed(std::uint64_t seed, int split, int index, int stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// Writes a paired clean/degraded corpus under `out_dir`. Test entries use
/// scripts that never occur in the training split.
inline CorpusManifest build_corpus(const std::filesystem::path& out_dir, int n_train, int n_test,
                                   const CorpusConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(n_train >= 1 && n_test >= 1, ErrorKind::InvalidInput, "corpus counts must be >= 1");
  const SynthVoice voice = make_voice(cfg.voice);

  std::mt19937_64 script_rng(entry_seed(seed, 0, 0, 0));
  std::vector<std::vector<int>> scripts;
  std::set<std::vector<int>> train_set;
  for (int i = 0; i < n_train; ++i) {
    scripts.push_back(random_symbols(script_rng, cfg.voice.n_symbols, cfg.min_script_len, cfg.max_script_len));
    train_set.insert(scripts.back());
  }
  for (int i = 0, attempts = 0; i < n_test; ++attempts) {
    require(attempts < 1000 * (n_test + 1), ErrorKind::DegenerateData,
            "cannot draw enough held-out scripts; widen the script length range");
    auto s = random_symbols(script_rng, cfg.voice.n_symbols, cfg.min_script_len, cfg.max_script_len);
    if (train_set.count(s)) continue;
    scripts.push_back(std::move(s));
    ++i;
  }

  CorpusManifest manifest;
  manifest.root = out_dir;
  manifest.config = cfg;
  manifest.entries.resize(scripts.size());
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const bool train = static_cast<int>(i) < n_train;
    const int index = train ? static_cast<int>(i) : static_cast<int>(i) - n_train;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%05d", train ? "train" : "test", index);
    auto& e = manifest.entries[i];
    e.id = id;
    e.split = train ? "train" : "test";
    e.script = scripts[i];
    e.severity = cfg.degrade.severity;
    const std::filesystem::path base = std::filesystem::path(e.split) / e.id;
    e.clean_mel_path = base.string() + ".clean.ufmel";
    e.clean_feature_path = base.string() + ".clean.uffea";
    e.degraded_feature_path = base.string() + ".degraded.uffea";
    e.degraded_mel_path = base.string() + ".degraded.ufmel";
    e.script_path = base.string() + ".script.units";
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "train", ec);
  std::filesystem::create_directories(out_dir / "test", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  auto write_entry = [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const int split = e.split == "train" ? 0 : 1;
    const int index = std::stoi(e.id.substr(e.id.find('-') + 1));
    const auto script = make_script(e.script, voice);
    const CleanSample clean = make_clean_sample(script, entry_seed(seed, split, index, 1), voice, cfg.clean_noise_std);
    DegradeConfig dc = cfg.degrade;
    dc.seed = entry_seed(seed, split, index, 2);
    const DegradedSample deg = degrade_sample(clean, dc, voice);
    dsp::save_mel(out_dir / e.clean_mel_path, clean.mel);
    units::save_features(out_dir / e.clean_feature_path, clean.features);
    units::save_features(out_dir / e.degraded_feature_path, deg.features);
    dsp::save_mel(out_dir / e.degraded_mel_path, deg.mel);
    units::save_units(out_dir / e.script_path, units::UnitSequence{e.script, true}, cfg.voice.n_symbols);
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) write_entry(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < manifest.entries.size(); i += workers) write_entry(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::string lines;
  for (const auto& e : manifest.entries) lines += manifest_line(e) + "\n";
  io::write_file_atomic(out_dir / "manifest.jsonl", lines);
  io::write_file_atomic(out_dir / "corpus.json", nlohmann::json(cfg).dump(2) + "\n");
  for (auto& e : manifest.entries) {
    e.clean_mel_path = out_dir / e.clean_mel_path;
    e.clean_feature_path = out_dir / e.clean_feature_path;
    e.degraded_feature_path = out_dir / e.degraded_feature_path;
    e.degraded_mel_path = out_dir / e.degraded_mel_path;
    e.script_path = out_dir / e.script_path;
  }
  return manifest;
}

}  // namespace unitflow::benchkit
