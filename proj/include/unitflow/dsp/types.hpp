#pragma once

#include "unitflow/core/error.hpp"
#include "unitflow/core/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace unitflow::dsp {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    require(sample_rate > 0, ErrorKind::InvalidInput, "sample_rate must be positive");
    for (double s : samples)
      require(std::isfinite(s), ErrorKind::InvalidInput, "waveform contains non-finite samples");
  }
};

/// Analysis settings of the log-mel front-end. Defaults are the 16 kHz,
/// 40 ms window / 10 ms hop / 1024-point FFT / 80-band configuration.
struct MelConfig {
  int sample_rate = 16000;
  int win_length = 640;
  int hop_length = 160;
  int fft_size = 1024;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor_power = 1e-10;

  double hop_s() const { return static_cast<double>(hop_length) / sample_rate; }
  double win_s() const { return static_cast<double>(win_length) / sample_rate; }
  double log_floor() const { return std::log(log_floor_power); }
  int n_bins() const { return fft_size / 2 + 1; }
};

/// T x n_mels natural-log mel power, row per frame.
struct MelSpectrogram {
  MatF frames;
  MelConfig config;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int num_mels() const { return static_cast<int>(frames.cols()); }
};

}  // namespace unitflow::dsp
