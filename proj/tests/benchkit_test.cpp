#include "oracles.hpp"
#include "toy_corpus.hpp"

#include "unitflow/benchkit/metrics.hpp"
#include "unitflow/benchkit/plot.hpp"
#include "unitflow/units/sequence.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

using namespace unitflow;
using namespace unitflow::benchkit;

namespace {

const SynthVoice& voice() {
  static const SynthVoice v = make_voice();
  return v;
}

// decodes in feature space: the same nearest-pattern rule against projected patterns
SynthVoice feature_voice() {
  SynthVoice f = voice();
  f.patterns = voice().features_of(voice().patterns);
  f.silence = voice().features_of(MatF(voice().silence)).row(0);
  return f;
}

CleanSample sample_for(const std::vector<int>& symbols, std::uint64_t seed) {
  return make_clean_sample(make_script(symbols, voice()), seed, voice());
}

DegradeConfig repetition_only(double severity, std::uint64_t seed) {
  DegradeConfig c;
  c.severity = severity;
  c.jitter_std = 0.0;
  c.mel_noise_std = 0.0;
  c.stretch_max = 1.0;
  c.edge_silence_frames = 0;
  c.seed = seed;
  return c;
}

std::string bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// minimum over every monotone path, by plain recursion
double brute_dtw(const MatF& a, const MatF& b, int i, int j) {
  const double c = (a.row(i).cast<double>() - b.row(j).cast<double>()).squaredNorm();
  if (i == 0 && j == 0) return c;
  double best = std::numeric_limits<double>::infinity();
  if (i > 0) best = std::min(best, brute_dtw(a, b, i - 1, j));
  if (j > 0) best = std::min(best, brute_dtw(a, b, i, j - 1));
  if (i > 0 && j > 0) best = std::min(best, brute_dtw(a, b, i - 1, j - 1));
  return c + best;
}

}  // namespace

TEST(CleanSample, DeterministicWithDurationBookkeeping) {
  const auto a = sample_for({0, 3, 7, 1}, 5), b = sample_for({0, 3, 7, 1}, 5);
  EXPECT_EQ(a.mel.frames, b.mel.frames);
  EXPECT_EQ(a.features.rows, b.features.rows);
  const int expected = voice().durations[0] + voice().durations[3] + voice().durations[7] + voice().durations[1];
  EXPECT_EQ(a.mel.frames.rows(), expected);
  EXPECT_EQ(a.features.rows.rows(), expected);
  EXPECT_EQ(a.mel.frames.cols(), 80);
  EXPECT_EQ(a.features.rows.cols(), 16);
  EXPECT_NE(sample_for({0, 3, 7, 1}, 6).mel.frames, a.mel.frames);
  for (int d : voice().durations) {
    EXPECT_GE(d, 4);
    EXPECT_LE(d, 8);
  }
}

TEST(CleanSample, UnitsDecodeBackToTheScript) {
  std::mt19937_64 rng(1);
  std::vector<std::vector<int>> scripts;
  std::vector<CleanSample> samples;
  for (int i = 0; i < 60; ++i) {
    scripts.push_back(random_symbols(rng, 12, 4, 10));
    samples.push_back(sample_for(scripts.back(), 100 + i));
  }
  units::FeatureMatrix all;
  Eigen::Index n = 0;
  for (const auto& s : samples) n += s.features.rows.rows();
  all.rows.resize(n, 16);
  n = 0;
  for (const auto& s : samples) {
    all.rows.middleRows(n, s.features.rows.rows()) = s.features.rows;
    n += s.features.rows.rows();
  }
  const auto cb = units::fit_kmeans(all, 12, 0);

  // label each unit by the majority symbol of its frames
  std::vector<std::map<int, int>> votes(12);
  for (const auto& s : samples) {
    const auto ids = units::assign(s.features, cb).ids;
    for (std::size_t f = 0; f < ids.size(); ++f) ++votes[ids[f]][s.frame_symbols[f]];
  }
  std::vector<int> label(12, -1);
  for (int u = 0; u < 12; ++u) {
    int best = 0;
    for (const auto& [sym, count] : votes[u])
      if (count > best) {
        best = count;
        label[u] = sym;
      }
  }
  double errors = 0, total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<int> hyp;
    for (int u : units::collapse(units::assign(samples[i].features, cb)).ids) hyp.push_back(label[u]);
    errors += static_cast<double>(oracle::edit_distance(oracle::unique_runs(hyp), scripts[i]));
    total += static_cast<double>(scripts[i].size());
  }
  EXPECT_GE(1.0 - errors / total, 0.99);
}

TEST(Degrade, SeverityZeroIsIdentity) {
  const auto clean = sample_for({2, 5, 9}, 3);
  DegradeConfig cfg;
  cfg.severity = 0.0;
  const auto d = degrade_sample(clean, cfg, voice());
  EXPECT_EQ(d.mel.frames, clean.mel.frames);
  EXPECT_EQ(d.features.rows, clean.features.rows);
  EXPECT_EQ(degrade(clean.features, cfg, voice()).rows, clean.features.rows);
}

TEST(Degrade, RepetitionLengthMatchesBinomialExpectation) {
  units::FeatureMatrix f;
  f.rows = MatF::Random(1000, 16);
  double mean = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const auto out = degrade(f, repetition_only(1.0, 900 + s), voice());
    EXPECT_GE(out.rows.rows(), 1000);
    EXPECT_LE(out.rows.rows(), 2000);
    mean += static_cast<double>(out.rows.rows()) / seeds;
  }
  // sd of the mean: sqrt(1000 * 0.25 / 40) = 2.5
  EXPECT_NEAR(mean, 1500.0, 10.0);
}

TEST(Degrade, RepetitionAndStretchKeepCollapsedUnits) {
  std::mt19937_64 rng(2);
  units::Codebook cb;
  cb.centroids = voice().features_of(voice().patterns);
  for (int trial = 0; trial < 200; ++trial) {
    const auto clean = sample_for(random_symbols(rng, 12, 3, 12), 500 + trial);
    auto cfg = repetition_only(std::uniform_real_distribution<double>(0.1, 1.0)(rng), trial);
    if (trial % 2) cfg.stretch_max = 1.6;
    const auto deg = degrade_sample(clean, cfg, voice());
    EXPECT_EQ(units::collapse(units::assign(deg.features, cb)), units::collapse(units::assign(clean.features, cb)));
    EXPECT_EQ(degrade(clean.features, cfg, voice()).rows, deg.features.rows);
  }
}

TEST(Degrade, FeatureViewMatchesPairedDegradation) {
  const auto clean = sample_for({1, 2, 3, 4, 5}, 8);
  DegradeConfig cfg;
  cfg.seed = 44;
  const auto pair = degrade_sample(clean, cfg, voice());
  EXPECT_EQ(degrade(clean.features, cfg, voice()).rows, pair.features.rows);
  EXPECT_EQ(pair.mel.frames.rows(), pair.features.rows.rows());
  EXPECT_GT(pair.mel.frames.rows(), clean.mel.frames.rows());
}

TEST(Degrade, DecodingErrorGrowsWithSeverity) {
  const SynthVoice fv = feature_voice();
  std::mt19937_64 rng(3);
  std::vector<std::vector<int>> scripts;
  for (int i = 0; i < 30; ++i) scripts.push_back(random_symbols(rng, 12, 4, 10));
  double prev_feat = -1, prev_mel = -1;
  for (double sev : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double feat = 0, mel = 0;
    for (std::size_t i = 0; i < scripts.size(); ++i) {
      const auto clean = sample_for(scripts[i], 40 + i);
      DegradeConfig cfg;
      cfg.severity = sev;
      cfg.seed = 70 + i;
      const auto d = degrade_sample(clean, cfg, voice());
      feat += pseudo_wer(decode_symbols(d.features.rows, fv), scripts[i]) / scripts.size();
      mel += pseudo_wer(decode_symbols(d.mel.frames, voice()), scripts[i]) / scripts.size();
    }
    EXPECT_GE(feat, prev_feat) << "severity " << sev;
    EXPECT_GE(mel, prev_mel) << "severity " << sev;
    prev_feat = feat;
    prev_mel = mel;
  }
  EXPECT_GT(prev_mel, 0.2);
}

TEST(Degrade, RejectsBadConfig) {
  const auto clean = sample_for({1, 2}, 1);
  DegradeConfig cfg;
  cfg.severity = 1.5;
  EXPECT_THROW(degrade_sample(clean, cfg, voice()), Error);
  cfg.severity = 0.5;
  cfg.stretch_min = 0.5;
  EXPECT_THROW(degrade(clean.features, cfg, voice()), Error);
}

TEST(Corpus, ManifestSplitsAndDeterminism) {
  const auto dir = toy::scratch("benchkit_corpus");
  const auto a = build_corpus(dir / "a", 10, 4, {}, 11);
  const auto b = build_corpus(dir / "b", 10, 4, {}, 11);
  EXPECT_EQ(a.split("train").size(), 10u);
  EXPECT_EQ(a.split("test").size(), 4u);
  std::set<std::vector<int>> train_scripts;
  for (const auto* e : a.split("train")) train_scripts.insert(e->script);
  for (const auto* e : a.split("test")) EXPECT_EQ(train_scripts.count(e->script), 0u);
  EXPECT_EQ(bytes_of(dir / "a" / "manifest.jsonl"), bytes_of(dir / "b" / "manifest.jsonl"));
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    for (auto member : {&ManifestEntry::clean_mel_path, &ManifestEntry::clean_feature_path,
                        &ManifestEntry::degraded_feature_path, &ManifestEntry::degraded_mel_path,
                        &ManifestEntry::script_path}) {
      ASSERT_TRUE(std::filesystem::exists(a.entries[i].*member));
      EXPECT_EQ(bytes_of(a.entries[i].*member), bytes_of(b.entries[i].*member));
    }

  const auto loaded = load_manifest(dir / "a");
  ASSERT_EQ(loaded.entries.size(), a.entries.size());
  EXPECT_EQ(loaded.entries[3].script, a.entries[3].script);
  EXPECT_EQ(loaded.entries[3].degraded_mel_path, a.entries[3].degraded_mel_path);

  auto threaded = CorpusConfig{};
  threaded.workers = 3;
  build_corpus(dir / "c", 10, 4, threaded, 11);
  EXPECT_EQ(bytes_of(dir / "a" / "test" / "test-00002.degraded.ufmel"),
            bytes_of(dir / "c" / "test" / "test-00002.degraded.ufmel"));
  EXPECT_NE(bytes_of(dir / "a" / "manifest.jsonl"), bytes_of(build_corpus(dir / "d", 10, 4, {}, 12).root / "manifest.jsonl"));
}

TEST(Corpus, DuplicateIdsAndUnwritableDirs) {
  const auto dir = toy::scratch("benchkit_dup");
  build_corpus(dir, 2, 1, {}, 1);
  const auto line = bytes_of(dir / "manifest.jsonl");
  std::ofstream(dir / "manifest.jsonl", std::ios::app) << line.substr(0, line.find('\n') + 1);
  EXPECT_THROW(load_manifest(dir), Error);
  std::ofstream(dir / "blocker") << "x";
  try {
    build_corpus(dir / "blocker" / "sub", 2, 1, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(Metrics, MelMseExamples) {
  dsp::MelSpectrogram a, b;
  a.frames = MatF::Random(7, 80);
  b.frames = a.frames.array() + 1.0f;
  EXPECT_EQ(mel_mse(a, a), 0.0);
  EXPECT_NEAR(mel_mse(a, b), 1.0, 1e-12);
  b.frames = MatF::Random(7, 80);
  double acc = 0;
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 80; ++c) acc += (double(a.frames(r, c)) - b.frames(r, c)) * (double(a.frames(r, c)) - b.frames(r, c));
  EXPECT_NEAR(mel_mse(a, b), acc / (7 * 80), 1e-12);
  b.frames = MatF::Random(9, 80);
  EXPECT_THROW(mel_mse(a, b), Error);
  EXPECT_GE(mel_mse(a, b, true), 0.0);
  EXPECT_EQ(mel_mse(a, a, true), 0.0);
}

TEST(Metrics, DtwFindsTheCheapestMonotonePath) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 40; ++trial) {
    const MatF a = MatF::Random(len(rng), 3), b = MatF::Random(len(rng), 3);
    const auto r = dtw_align(a, b);
    EXPECT_NEAR(r.total_cost, brute_dtw(a, b, static_cast<int>(a.rows()) - 1, static_cast<int>(b.rows()) - 1), 1e-9);
    EXPECT_EQ(r.path.front(), std::make_pair(0, 0));
    EXPECT_EQ(r.path.back(), std::make_pair(static_cast<int>(a.rows()) - 1, static_cast<int>(b.rows()) - 1));
    double along = 0;
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      along += (a.row(r.path[k].first).cast<double>() - b.row(r.path[k].second).cast<double>()).squaredNorm();
      if (k) {
        const int di = r.path[k].first - r.path[k - 1].first, dj = r.path[k].second - r.path[k - 1].second;
        EXPECT_TRUE((di == 1 || di == 0) && (dj == 1 || dj == 0) && di + dj > 0);
      }
    }
    EXPECT_NEAR(along, r.total_cost, 1e-9);
  }
  // a time-stretched copy aligns at zero cost
  const MatF x = MatF::Random(5, 4);
  MatF y(10, 4);
  for (int i = 0; i < 10; ++i) y.row(i) = x.row(i / 2);
  EXPECT_EQ(dtw_align(x, y).total_cost, 0.0);
}

TEST(Metrics, PseudoWer) {
  EXPECT_EQ(pseudo_wer({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0);
  EXPECT_EQ(pseudo_wer({1, 9, 3, 4}, {1, 2, 3, 4}), 0.25);
  EXPECT_EQ(pseudo_wer({}, {1, 2, 3}), 1.0);
  EXPECT_THROW(pseudo_wer({1}, {}), Error);
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(0, 9), sym(0, 3);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> a(len(rng)), b(len(rng));
    for (auto& x : a) x = sym(rng);
    for (auto& x : b) x = sym(rng);
    EXPECT_EQ(levenshtein(a, b), oracle::edit_distance(a, b));
  }
}

TEST(Metrics, DecodeCleanMelRecoversScript) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 30; ++i) {
    const auto script = random_symbols(rng, 12, 4, 10);
    EXPECT_EQ(decode_symbols(sample_for(script, i).mel.frames, voice()), script);
  }
  MatF silent = MatF(voice().silence).replicate(12, 1);
  EXPECT_TRUE(decode_symbols(silent, voice()).empty());
}

TEST(Plots, FileSetFollowsTheRunLayout) {
  const auto dir = toy::scratch("benchkit_plots");
  for (const char* mode : {"units", "mel_input"}) {
    std::filesystem::create_directories(dir / mode / "finetune");
    std::ofstream csv(dir / mode / "finetune" / "metrics.csv");
    csv << "step,loss,lr,wall_s\n";
    for (int s = 1; s <= 50; ++s) csv << s << ',' << 2.0 / s << ",0.001," << s * 0.1 << '\n';
  }
  std::filesystem::create_directories(dir / "units" / "pretrain");
  std::ofstream(dir / "units" / "pretrain" / "metrics.csv") << "step,loss,lr,wall_s\n1,1.5,0,0\n2,1.2,0,0\n";
  const auto eval = dir / "units" / "finetune" / "eval";
  std::filesystem::create_directories(eval);
  dsp::MelSpectrogram m;
  m.frames = MatF::Random(20, 80);
  for (const char* kind : {"generated", "degraded", "clean"}) dsp::save_mel(eval / (std::string("test-00000.") + kind + ".ufmel"), m);
  dsp::save_mel(eval / "test-00001.generated.ufmel", m);

  const auto files = emit_plots(dir);
  std::set<std::string> names;
  for (const auto& f : files) {
    names.insert(f.filename().string());
    EXPECT_GT(std::filesystem::file_size(f), 100u);
    EXPECT_EQ(bytes_of(f).substr(1, 3), "PNG");
  }
  EXPECT_EQ(names, (std::set<std::string>{"loss_mel_input_finetune.png", "loss_units_finetune.png",
                                          "loss_units_pretrain.png", "compare_finetune.png",
                                          "mel_units_finetune_eval_test-00000.png"}));
  const auto manifest = nlohmann::json::parse(bytes_of(dir / "plots" / "plots.json"));
  EXPECT_EQ(manifest.at("files").size(), 5u);
  EXPECT_EQ(manifest.at("overlays").at("finetune").size(), 2u);
}

TEST(Plots, EmptyRunDirIsAnIoError) {
  const auto dir = toy::scratch("benchkit_empty");
  try {
    emit_plots(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
  EXPECT_THROW(emit_plots(dir / "missing"), Error);
}
