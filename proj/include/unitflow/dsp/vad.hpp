#pragma once

#include "unitflow/dsp/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace unitflow::dsp {

/// Energy VAD used to trim leading/trailing silence. A speech region must
/// start with `min_speech_frames` consecutive frames at or above the edge
/// threshold; the kept region then grows outward over adjacent frames that
/// still clear the (looser) interior threshold.
struct VadConfig {
  double frame_s = 0.020;
  double energy_threshold_db = -45.0;
  double edge_threshold_db = -35.0;
  int min_speech_frames = 3;

  void validate() const {
    require(frame_s > 0.0, ErrorKind::InvalidInput, "vad: frame_s must be positive");
    require(edge_threshold_db >= energy_threshold_db, ErrorKind::InvalidInput,
            "vad: edge threshold must be at least the interior threshold");
    require(min_speech_frames >= 1, ErrorKind::InvalidInput, "vad: min_speech_frames must be >= 1");
  }
};

/// Mean-square energy in dBFS per frame; the last frame may be partial.
inline std::vector<double> frame_energy_db(const Waveform& w, int frame_len) {
  const std::size_t n = w.samples.size();
  const std::size_t frames = (n + frame_len - 1) / frame_len;
  std::vector<double> db(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t lo = f * frame_len;
    const std::size_t hi = std::min(n, lo + frame_len);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += w.samples[i] * w.samples[i];
    db[f] = 10.0 * std::log10(acc / static_cast<double>(hi - lo) + 1e-12);
  }
  return db;
}

/// Inclusive [first, last] frame range kept by the hysteresis rule.
inline std::pair<long, long> speech_bounds(const std::vector<double>& db, const VadConfig& cfg) {
  cfg.validate();
  const long frames = static_cast<long>(db.size());

  auto strict_run_at = [&](long start, long step) -> long {
    // first frame (scanning from `start` by `step`) that begins a qualifying run
    long run = 0;
    for (long f = start; f >= 0 && f < frames; f += step) {
      run = db[f] >= cfg.edge_threshold_db ? run + 1 : 0;
      if (run >= cfg.min_speech_frames) return f - step * (run - 1);
    }
    return -1;
  };

  long first = strict_run_at(0, 1);
  if (first < 0) throw Error(ErrorKind::EmptyAfterTrim, "no frame exceeds the edge threshold");
  long last = strict_run_at(frames - 1, -1);
  while (first > 0 && db[first - 1] >= cfg.energy_threshold_db) --first;
  while (last + 1 < frames && db[last + 1] >= cfg.energy_threshold_db) ++last;
  return {first, last};
}

inline Waveform trim_silence(const Waveform& w, const VadConfig& cfg = {}) {
  cfg.validate();
  w.validate();
  const int frame_len = std::max(1, static_cast<int>(std::lround(cfg.frame_s * w.sample_rate)));
  const auto [first, last] = speech_bounds(frame_energy_db(w, frame_len), cfg);

  const std::size_t lo = static_cast<std::size_t>(first) * frame_len;
  const std::size_t hi = std::min(w.samples.size(), static_cast<std::size_t>(last + 1) * frame_len);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<long>(lo), w.samples.begin() + static_cast<long>(hi));
  return out;
}

/// Per-frame energy of a log-mel matrix: 10 log10 of the mean band power.
inline std::vector<double> mel_frame_energy_db(const MatF& log_mel) {
  std::vector<double> db(static_cast<std::size_t>(log_mel.rows()));
  for (Eigen::Index r = 0; r < log_mel.rows(); ++r)
    db[r] = 10.0 * std::log10(log_mel.row(r).cast<double>().array().exp().mean() + 1e-12);
  return db;
}

}  // namespace unitflow::dsp
