#pragma once

#include "unitflow/core/error.hpp"
#include "unitflow/core/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace unitflow::benchkit {

/// The single synthetic "speaker": a fixed symbol -> mel pattern mapping,
/// fixed per-symbol durations, and a fixed projection from mel to features.
struct SynthVoice {
  MatF patterns;            // n_symbols x mel_dim
  std::vector<int> durations;
  MatF projection;          // feature_dim x mel_dim
  RowVec<float> mean_pattern;
  RowVec<float> silence;    // log-floor frame used for leading/trailing pauses
  std::uint64_t seed = 0;

  int n_symbols() const { return static_cast<int>(patterns.rows()); }
  int mel_dim() const { return static_cast<int>(patterns.cols()); }
  int feature_dim() const { return static_cast<int>(projection.rows()); }

  /// (mel - mean) W^T for each row.
  MatF features_of(const MatF& mel) const {
    MatF centered = mel.rowwise() - mean_pattern;
    MatF out;
    out.noalias() = centered * projection.transpose();
    return out;
  }
};

struct VoiceConfig {
  int n_symbols = 12;
  int mel_dim = 80;
  int feature_dim = 16;
  int min_duration = 4;
  int max_duration = 8;
  std::uint64_t seed = 1234;

  void validate() const {
    require(n_symbols >= 2, ErrorKind::InvalidInput, "voice needs at least two symbols");
    require(mel_dim >= 1 && feature_dim >= 1, ErrorKind::InvalidInput, "voice dims must be positive");
    require(min_duration >= 1 && max_duration >= min_duration, ErrorKind::InvalidInput,
            "voice durations must satisfy 1 <= min <= max");
  }
};

inline SynthVoice make_voice(const VoiceConfig& cfg = {}) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> centre(5.0, 75.0 * cfg.mel_dim / 80.0), width(3.0, 8.0), amp(2.0, 4.0);
  SynthVoice v;
  v.seed = cfg.seed;
  v.patterns.resize(cfg.n_symbols, cfg.mel_dim);
  for (int s = 0; s < cfg.n_symbols; ++s) {
    std::vector<double> row(cfg.mel_dim);
    for (int c = 0; c < cfg.mel_dim; ++c) row[c] = -5.0 - 0.02 * c;
    for (int bump = 0; bump < 2; ++bump) {
      const double mu = centre(rng), w = width(rng), a = amp(rng);
      for (int c = 0; c < cfg.mel_dim; ++c) row[c] += a * std::exp(-0.5 * std::pow((c - mu) / w, 2));
    }
    for (int c = 0; c < cfg.mel_dim; ++c) v.patterns(s, c) = static_cast<float>(row[c]);
  }
  std::uniform_int_distribution<int> dur(cfg.min_duration, cfg.max_duration);
  v.durations.resize(cfg.n_symbols);
  for (auto& d : v.durations) d = dur(rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  v.projection.resize(cfg.feature_dim, cfg.mel_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.mel_dim));
  for (Eigen::Index i = 0; i < v.projection.size(); ++i) v.projection.data()[i] = static_cast<float>(n01(rng) * scale);
  v.mean_pattern = v.patterns.colwise().mean();
  v.silence = RowVec<float>::Constant(cfg.mel_dim, static_cast<float>(std::log(1e-10)));
  return v;
}

}  // namespace unitflow::benchkit
