#pragma once

#include "unitflow/dsp/stft.hpp"
#include "unitflow/dsp/types.hpp"

#include <algorithm>
#include <cmath>

namespace unitflow::dsp {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

/// n_mels x n_bins triangular filterbank with area (Slaney) normalization.
inline MatD mel_filterbank(const MelConfig& cfg) {
  const int n_bins = cfg.n_bins();
  MatD fb = MatD::Zero(cfg.n_mels, n_bins);
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double enorm = 2.0 / (hi - lo);
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(m, b) = std::max(0.0, std::min(rise, fall)) * enorm;
    }
  }
  return fb;
}

/// Power spectrogram (frames x bins) to natural-log mel, clamped at the floor.
inline MatF power_to_log_mel(const MatD& power, const MatD& filterbank, double floor_power) {
  MatD mel = power * filterbank.transpose();
  return mel.cwiseMax(floor_power).array().log().matrix().cast<float>();
}

inline MelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg = {}) {
  require(w.sample_rate == cfg.sample_rate, ErrorKind::InvalidInput,
          "log_mel: expected " + std::to_string(cfg.sample_rate) + " Hz input, got " +
              std::to_string(w.sample_rate) + " (resample first)");
  require(w.samples.size() >= static_cast<std::size_t>(cfg.hop_length), ErrorKind::InvalidInput,
          "log_mel: input shorter than one hop");
  w.validate();
  const ComplexMat spec = stft(w.samples, cfg);
  const MatD power = spec.cwiseAbs2();
  return MelSpectrogram{power_to_log_mel(power, mel_filterbank(cfg), cfg.log_floor_power), cfg};
}

}  // namespace unitflow::dsp
