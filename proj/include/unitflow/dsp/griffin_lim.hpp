#pragma once

#include "unitflow/dsp/mel.hpp"
#include "unitflow/dsp/stft.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <numbers>
#include <random>

namespace unitflow::dsp {

struct GriffinLimOptions {
  int iterations = 32;
  double momentum = 0.0;  // 0 gives the classic alternating projection
  std::uint64_t seed = 0;
};

/// Non-negative linear magnitude estimate (frames x bins) from a log-mel matrix,
/// via the filterbank pseudo-inverse.
inline MatD mel_to_linear_magnitude(const MelSpectrogram& m) {
  const MatD fb = mel_filterbank(m.config);
  const MatD pinv = fb.completeOrthogonalDecomposition().pseudoInverse();  // bins x mels
  const MatD mel_power = m.frames.cast<double>().array().exp().matrix();
  const MatD power = (mel_power * pinv.transpose()).cwiseMax(0.0);
  return power.cwiseSqrt();
}

/// Phase retrieval for a fixed STFT magnitude. `observer(iter, signal)` is
/// invoked after every iteration when provided. Zero iterations returns the
/// random-phase reconstruction.
inline std::vector<double> griffin_lim(
    const MatD& magnitude, const MelConfig& cfg, const GriffinLimOptions& opt,
    const std::function<void(int, const std::vector<double>&)>& observer = {}) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
  ComplexMat phase(magnitude.rows(), magnitude.cols());
  for (Eigen::Index i = 0; i < phase.size(); ++i) phase.data()[i] = std::polar(1.0, uni(rng));

  ComplexMat prev = ComplexMat::Zero(magnitude.rows(), magnitude.cols());
  std::vector<double> signal = istft(magnitude.cast<std::complex<double>>().cwiseProduct(phase), cfg);
  for (int it = 0; it < opt.iterations; ++it) {
    const ComplexMat est = stft(signal, cfg);
    ComplexMat accel = est - (opt.momentum / (1.0 + opt.momentum)) * prev;
    prev = est;
    for (Eigen::Index i = 0; i < accel.size(); ++i) {
      const double a = std::abs(accel.data()[i]);
      phase.data()[i] = a > 1e-16 ? accel.data()[i] / a : std::complex<double>(1.0, 0.0);
    }
    signal = istft(magnitude.cast<std::complex<double>>().cwiseProduct(phase), cfg);
    if (observer) observer(it, signal);
  }
  return signal;
}

/// Audition helper: log-mel back to audio by iterative phase reconstruction.
inline Waveform mel_to_audio(const MelSpectrogram& m, int iters = 32, std::uint64_t seed = 0) {
  require(iters > 0, ErrorKind::InvalidInput, "mel_to_audio: iters must be >= 1");
  require(m.num_frames() >= 1 && m.num_mels() == m.config.n_mels, ErrorKind::InvalidInput,
          "mel_to_audio: malformed mel spectrogram");
  const MatD mag = mel_to_linear_magnitude(m);
  Waveform w;
  w.sample_rate = m.config.sample_rate;
  w.samples = griffin_lim(mag, m.config, {iters, 0.0, seed});
  return w;
}

}  // namespace unitflow::dsp
