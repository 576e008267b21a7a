#pragma once

#include "unitflow/core/error.hpp"
#include "unitflow/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace unitflow::cfm {

/// One contiguous masked span covering round(r * T) frames, r ~ U(min_frac, max_frac).
struct MaskSpec {
  double min_frac = 0.7;
  double max_frac = 1.0;

  void validate() const {
    require(min_frac > 0.0 && min_frac <= 1.0 && max_frac > 0.0 && max_frac <= 1.0,
            ErrorKind::InvalidInput, "mask fractions must lie in (0, 1]");
    require(min_frac <= max_frac, ErrorKind::InvalidInput, "mask min_frac exceeds max_frac");
  }
};

inline FrameMask sample_mask(std::size_t num_frames, const MaskSpec& spec, std::mt19937_64& rng) {
  require(num_frames >= 1, ErrorKind::InvalidInput, "sample_mask: num_frames must be >= 1");
  spec.validate();
  std::uniform_real_distribution<double> frac(spec.min_frac, spec.max_frac);
  const double r = spec.min_frac == spec.max_frac ? spec.min_frac : frac(rng);
  const auto len = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(r * static_cast<double>(num_frames))), 1, num_frames);
  std::uniform_int_distribution<std::size_t> pos(0, num_frames - len);
  const std::size_t start = pos(rng);
  FrameMask m(num_frames, 0);
  std::fill(m.begin() + static_cast<long>(start), m.begin() + static_cast<long>(start + len), 1);
  return m;
}

inline std::size_t count_masked(const FrameMask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

}  // namespace unitflow::cfm
