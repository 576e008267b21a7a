#pragma once

#include "unitflow/benchkit/corpus.hpp"
#include "unitflow/dsp/vad.hpp"
#include "unitflow/trainer/config.hpp"
#include "unitflow/units/kmeans.hpp"
#include "unitflow/units/sequence.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace unitflow::trainer {

/// One utterance ready for the objective: the clean target mel plus the
/// stage-appropriate condition (collapsed units, or a mel for the ablation).
struct TrainExample {
  std::string id;
  MatF target;
  std::vector<int> units;
  MatF cond_mel;

  /// Frames the sequence occupies in a batch.
  int seq_len(vfnet::CondMode mode) const {
    const auto t = static_cast<int>(target.rows());
    return mode == vfnet::CondMode::mel_input ? std::max(t, static_cast<int>(cond_mel.rows())) : t;
  }
};

struct PreparedData {
  std::vector<TrainExample> examples;
  double duplication_factor = 1.0;  // median clean frames per condition unit
  double length_ratio = 1.0;        // median clean frames per condition-mel frame
  std::size_t skipped = 0;          // dropped for unit overflow or all-silence input
};

/// Removes leading/trailing pause frames from a degraded (features, mel) pair
/// using the energy of the mel frames.
inline void trim_degraded(units::FeatureMatrix& features, MatF& mel, const dsp::VadConfig& vad) {
  require(features.rows.rows() == mel.rows(), ErrorKind::InvalidInput,
          "trim: degraded features and mel disagree on frame count");
  const auto [first, last] = dsp::speech_bounds(dsp::mel_frame_energy_db(mel), vad);
  const Eigen::Index n = last - first + 1;
  features.rows = features.rows.middleRows(first, n).eval();
  mel = mel.middleRows(first, n).eval();
}

inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::InvalidInput, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Loads one example per entry. Pretraining pairs clean units (or the clean
/// mel) with the clean target; finetuning takes the condition from the
/// VAD-trimmed degraded side.
inline TrainExample load_example(const benchkit::ManifestEntry& e, const units::Codebook& cb, Stage stage,
                                 const dsp::VadConfig& vad) {
  TrainExample ex;
  ex.id = e.id;
  ex.target = dsp::load_mel(e.clean_mel_path).frames;
  units::FeatureMatrix feats;
  if (stage == Stage::pretrain) {
    feats = units::load_features(e.clean_feature_path);
    ex.cond_mel = ex.target;
  } else {
    feats = units::load_features(e.degraded_feature_path);
    ex.cond_mel = dsp::load_mel(e.degraded_mel_path).frames;
    trim_degraded(feats, ex.cond_mel, vad);
  }
  ex.units = units::collapse(units::assign(feats, cb)).ids;
  return ex;
}

inline PreparedData prepare_examples(const benchkit::CorpusManifest& corpus, const std::string& split,
                                     const units::Codebook& cb, Stage stage, const vfnet::ModelConfig& model,
                                     const dsp::VadConfig& vad = {}) {
  PreparedData out;
  std::vector<double> dup, ratio;
  for (const auto* e : corpus.split(split)) {
    TrainExample ex;
    try {
      ex = load_example(*e, cb, stage, vad);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::EmptyAfterTrim) throw;
      ++out.skipped;
      continue;
    }
    if (ex.units.size() > static_cast<std::size_t>(ex.target.rows()) ||
        ex.seq_len(model.cond_mode) > model.max_frames) {
      ++out.skipped;
      continue;
    }
    dup.push_back(static_cast<double>(ex.target.rows()) / static_cast<double>(ex.units.size()));
    ratio.push_back(static_cast<double>(ex.target.rows()) / static_cast<double>(ex.cond_mel.rows()));
    out.examples.push_back(std::move(ex));
  }
  require(!out.examples.empty(), ErrorKind::InvalidInput, "corpus split '" + split + "' has no usable entries");
  out.duplication_factor = median(dup);
  out.length_ratio = median(ratio);
  return out;
}

/// Groups example indices into batches whose padded size (count x longest)
/// stays within `budget` frames; an utterance longer than the budget gets a
/// batch of its own. Indices are shuffled, sorted by length inside buckets of
/// `bucket` examples, packed, and the batch order shuffled again.
inline std::vector<std::vector<int>> plan_batches(const std::vector<int>& lengths, int budget, std::mt19937_64& rng,
                                                  int bucket = 64) {
  require(budget >= 1, ErrorKind::InvalidInput, "batch budget must be positive");
  std::vector<int> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (std::size_t lo = 0; lo < order.size(); lo += bucket) {
    const auto hi = std::min(order.size(), lo + static_cast<std::size_t>(bucket));
    std::stable_sort(order.begin() + static_cast<long>(lo), order.begin() + static_cast<long>(hi),
                     [&](int a, int b) { return lengths[a] < lengths[b]; });
    std::vector<int> cur;
    int longest = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const int idx = order[i];
      const int next_longest = std::max(longest, lengths[idx]);
      if (!cur.empty() && static_cast<long>(cur.size() + 1) * next_longest > budget) {
        batches.push_back(std::move(cur));
        cur.clear();
        longest = 0;
      }
      cur.push_back(idx);
      longest = std::max(longest, lengths[idx]);
    }
    if (!cur.empty()) batches.push_back(std::move(cur));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

}  // namespace unitflow::trainer
