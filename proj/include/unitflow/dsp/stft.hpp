#pragma once

#include "unitflow/core/tensor.hpp"
#include "unitflow/dsp/types.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <numbers>
#include <vector>

namespace unitflow::dsp {

using ComplexMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Periodic Hann window of `win_length`, zero-padded symmetrically to `fft_size`.
inline std::vector<double> padded_hann(int win_length, int fft_size) {
  std::vector<double> w(static_cast<std::size_t>(fft_size), 0.0);
  const int offset = (fft_size - win_length) / 2;
  for (int i = 0; i < win_length; ++i)
    w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length);
  return w;
}

/// Index into a signal of length n under repeated reflect padding (no edge repeat).
inline long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline int centered_frame_count(std::size_t n_samples, int hop) {
  return static_cast<int>(n_samples / static_cast<std::size_t>(hop)) + 1;
}

/// Center-padded STFT. Rows are frames, columns the fft_size/2+1 bins.
inline ComplexMat stft(const std::vector<double>& x, const MelConfig& cfg) {
  const int n_fft = cfg.fft_size;
  const int hop = cfg.hop_length;
  const int pad = n_fft / 2;
  const long n = static_cast<long>(x.size());
  const int frames = centered_frame_count(x.size(), hop);
  const auto window = padded_hann(cfg.win_length, n_fft);

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spec;
  ComplexMat out(frames, cfg.n_bins());
  for (int f = 0; f < frames; ++f) {
    const long start = static_cast<long>(f) * hop - pad;
    for (int i = 0; i < n_fft; ++i) buf[i] = window[i] * x[reflect_index(start + i, n)];
    fft.fwd(spec, buf);
    for (int b = 0; b < cfg.n_bins(); ++b) out(f, b) = spec[b];
  }
  return out;
}

/// Weighted overlap-add inverse of `stft`, returning (frames-1)*hop samples.
inline std::vector<double> istft(const ComplexMat& spec, const MelConfig& cfg) {
  const int n_fft = cfg.fft_size;
  const int hop = cfg.hop_length;
  const int pad = n_fft / 2;
  const int frames = static_cast<int>(spec.rows());
  const auto window = padded_hann(cfg.win_length, n_fft);
  const std::size_t full = static_cast<std::size_t>(n_fft + hop * (frames - 1));

  std::vector<double> acc(full, 0.0), norm(full, 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> half(static_cast<std::size_t>(cfg.n_bins()));
  std::vector<std::complex<double>> full_spec(static_cast<std::size_t>(n_fft));
  std::vector<double> frame;
  for (int f = 0; f < frames; ++f) {
    for (int b = 0; b < cfg.n_bins(); ++b) full_spec[b] = spec(f, b);
    for (int b = cfg.n_bins(); b < n_fft; ++b) full_spec[b] = std::conj(full_spec[n_fft - b]);
    fft.inv(frame, full_spec);
    const std::size_t off = static_cast<std::size_t>(f) * hop;
    for (int i = 0; i < n_fft; ++i) {
      acc[off + i] += frame[i] * window[i];
      norm[off + i] += window[i] * window[i];
    }
  }
  const std::size_t out_len = static_cast<std::size_t>(hop) * (frames - 1);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double w = norm[i + pad];
    out[i] = w > 1e-8 ? acc[i + pad] / w : 0.0;
  }
  return out;
}

}  // namespace unitflow::dsp
