#pragma once

#include "unitflow/benchkit/voice.hpp"
#include "unitflow/dsp/types.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace unitflow::benchkit {

/// Optimal monotone alignment of two frame sequences under squared Euclidean
/// frame cost, with steps (1,0), (0,1), (1,1).
struct DtwResult {
  double total_cost = 0.0;
  std::vector<std::pair<int, int>> path;
};

inline DtwResult dtw_align(const MatF& a, const MatF& b) {
  require(a.rows() >= 1 && b.rows() >= 1, ErrorKind::InvalidInput, "dtw: empty sequence");
  require(a.cols() == b.cols(), ErrorKind::InvalidInput, "dtw: channel count mismatch");
  const Eigen::Index n = a.rows(), m = b.rows();
  const MatD ad = a.cast<double>(), bd = b.cast<double>();
  MatD cost(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) cost(i, j) = (ad.row(i) - bd.row(j)).squaredNorm();

  constexpr double inf = std::numeric_limits<double>::infinity();
  MatD acc = MatD::Constant(n + 1, m + 1, inf);
  acc(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= n; ++i)
    for (Eigen::Index j = 1; j <= m; ++j)
      acc(i, j) = cost(i - 1, j - 1) + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});

  DtwResult r;
  r.total_cost = acc(n, m);
  Eigen::Index i = n, j = m;
  while (i > 0 && j > 0) {
    r.path.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
    const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

/// Mean squared error per entry. With `align`, frames are paired along the DTW
/// path and the mean runs over path pairs x channels.
inline double mel_mse(const dsp::MelSpectrogram& a, const dsp::MelSpectrogram& b, bool align = false) {
  if (!align) {
    require(a.frames.rows() == b.frames.rows() && a.frames.cols() == b.frames.cols(), ErrorKind::InvalidInput,
            "mel_mse: shape mismatch (enable alignment to compare different lengths)");
    require(a.frames.size() > 0, ErrorKind::InvalidInput, "mel_mse: empty mel");
    return (a.frames.cast<double>() - b.frames.cast<double>()).squaredNorm() / static_cast<double>(a.frames.size());
  }
  const auto r = dtw_align(a.frames, b.frames);
  return r.total_cost / (static_cast<double>(r.path.size()) * static_cast<double>(a.frames.cols()));
}

inline std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1] ? 1u : 0u)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline double pseudo_wer(const std::vector<int>& hyp, const std::vector<int>& ref) {
  require(!ref.empty(), ErrorKind::InvalidInput, "pseudo_wer: empty reference");
  return static_cast<double>(levenshtein(hyp, ref)) / static_cast<double>(ref.size());
}

/// Nearest-pattern symbol decoding: per-frame argmin over the voice patterns
/// (pause frames included as a non-symbol class), runs shorter than
/// `min_run` dropped, then consecutive duplicates merged.
inline std::vector<int> decode_symbols(const MatF& mel, const SynthVoice& voice, int min_run = 2) {
  require(mel.cols() == voice.mel_dim(), ErrorKind::InvalidInput, "decode: mel width differs from the voice");
  const int pause = -1;
  std::vector<int> labels(static_cast<std::size_t>(mel.rows()));
  for (Eigen::Index r = 0; r < mel.rows(); ++r) {
    const RowVec<double> x = mel.row(r).cast<double>();
    double best = (x - voice.silence.cast<double>()).squaredNorm();
    int arg = pause;
    for (int s = 0; s < voice.n_symbols(); ++s) {
      const double d = (x - voice.patterns.row(s).cast<double>()).squaredNorm();
      if (d < best) {
        best = d;
        arg = s;
      }
    }
    labels[r] = arg;
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (labels[i] != pause && static_cast<int>(j - i) >= min_run && (out.empty() || out.back() != labels[i]))
      out.push_back(labels[i]);
    i = j;
  }
  return out;
}

}  // namespace unitflow::benchkit
