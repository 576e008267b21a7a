#pragma once

#include "unitflow/dsp/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace unitflow::dsp {

/// Band-limited windowed-sinc resampler.
struct ResampleOptions {
  int zero_crossings = 64;   // half-width of the kernel in low-rate periods
  double rolloff = 0.94;     // cutoff as a fraction of the lower Nyquist rate
  double kaiser_beta = 10.0;
};

namespace detail {

inline double kaiser(double x, double beta) {
  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace detail

inline Waveform resample(const Waveform& w, int target_rate, const ResampleOptions& opt = {}) {
  require(!w.samples.empty(), ErrorKind::InvalidInput, "resample: empty input");
  require(target_rate > 0, ErrorKind::InvalidInput, "resample: target rate must be positive");
  w.validate();
  if (target_rate == w.sample_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const auto n_in = static_cast<long>(w.samples.size());
  const auto n_out = static_cast<long>(std::llround(static_cast<double>(n_in) * ratio));

  // cutoff in cycles per input sample
  const double fc = 0.5 * std::min(1.0, ratio) * opt.rolloff;
  const double half_width = opt.zero_crossings / (2.0 * fc);

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(std::max<long>(n_out, 1)));
  for (long n = 0; n < static_cast<long>(out.samples.size()); ++n) {
    const double x = static_cast<double>(n) / ratio;
    const long lo = std::max<long>(0, static_cast<long>(std::ceil(x - half_width)));
    const long hi = std::min<long>(n_in - 1, static_cast<long>(std::floor(x + half_width)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double tau = x - static_cast<double>(k);
      acc += w.samples[k] * 2.0 * fc * detail::sinc(2.0 * fc * tau) *
             detail::kaiser(tau / half_width, opt.kaiser_beta);
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace unitflow::dsp
