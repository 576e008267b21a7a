#pragma once

#include "unitflow/benchkit/corpus.hpp"
#include "unitflow/units/kmeans.hpp"

#include <filesystem>
#include <string>

namespace toy {

inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("unitflow_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Stacks the clean feature rows of one split.
inline unitflow::units::FeatureMatrix stacked_features(const unitflow::benchkit::CorpusManifest& corpus,
                                                       const std::string& split) {
  std::vector<unitflow::MatF> parts;
  Eigen::Index n = 0;
  for (const auto* e : corpus.split(split)) {
    parts.push_back(unitflow::units::load_features(e->clean_feature_path).rows);
    n += parts.back().rows();
  }
  unitflow::units::FeatureMatrix all;
  all.rows.resize(n, parts.front().cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    all.rows.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return all;
}

struct Toy {
  unitflow::benchkit::CorpusManifest corpus;
  unitflow::units::Codebook codebook;
};

inline Toy make(const std::filesystem::path& dir, int n_train, int n_test, std::uint64_t seed = 7) {
  Toy t;
  t.corpus = unitflow::benchkit::build_corpus(dir, n_train, n_test, {}, seed);
  t.codebook = unitflow::units::fit_kmeans(stacked_features(t.corpus, "train"), 12, 0);
  return t;
}

}  // namespace toy
