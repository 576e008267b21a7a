#pragma once

#include "unitflow/core/error.hpp"
#include "unitflow/core/tensor.hpp"

#include <cstdint>
#include <vector>

namespace unitflow::units {

/// T x D self-supervised feature frames, one row per 20 ms stride.
struct FeatureMatrix {
  MatF rows;

  int num_frames() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }

  void validate() const {
    require(rows.rows() >= 1 && rows.cols() >= 1, ErrorKind::InvalidInput, "feature matrix is empty");
    require(rows.allFinite(), ErrorKind::InvalidInput, "feature matrix has non-finite entries");
  }
};

struct Codebook {
  MatF centroids;  // K x D
  std::uint64_t seed = 0;
  int iterations = 0;
  double inertia = 0.0;

  int k() const { return static_cast<int>(centroids.rows()); }
  int feature_dim() const { return static_cast<int>(centroids.cols()); }
  /// Id appended after the real units to reach the mel length.
  int filler_id() const { return k(); }
};

struct UnitSequence {
  std::vector<int> ids;
  bool collapsed = false;

  std::size_t size() const { return ids.size(); }
  bool operator==(const UnitSequence&) const = default;
};

/// Unit ids padded with FILLER (= K) to exactly `ids.size()` frames.
struct PaddedUnits {
  std::vector<int> ids;
  int filler_id = 0;

  std::size_t target_len() const { return ids.size(); }
};

}  // namespace unitflow::units
