#include "oracles.hpp"
#include "toy_corpus.hpp"

#include "unitflow/cli/app.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

using namespace unitflow;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json show(std::vector<std::string> args) {
  args.insert(args.begin(), {"config", "show"});
  const auto r = call(args);
  EXPECT_EQ(r.code, 0) << r.err;
  return nlohmann::json::parse(r.out);
}

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

// kind=<Kind> msg="<...>" on the last stderr line
std::string error_kind(const std::string& err) {
  static const std::regex re(R"(error kind=(\w+) msg="[^\n]*")");
  std::smatch m;
  std::string last;
  for (auto it = std::sregex_iterator(err.begin(), err.end(), re); it != std::sregex_iterator(); ++it)
    last = (*it)[1];
  return last;
}

std::string config_path(const std::string& name) { return std::string(UNITFLOW_SOURCE_DIR) + "/configs/" + name; }

}  // namespace

TEST(CliConfig, FlagsBeatConfigBeatDefaults) {
  const auto dir = toy::scratch("cli_prec");
  EXPECT_EQ(show({})["k"], 512);
  EXPECT_EQ(show({})["pretrain"]["peak_lr"], 7.5e-5);

  const auto cfg = write(dir / "a.cfg", "[units]\nk = 40\n[pretrain]\npeak_lr = 0.01\n");
  EXPECT_EQ(show({"-c", cfg.string()})["k"], 40);
  EXPECT_EQ(show({"-c", cfg.string()})["pretrain"]["peak_lr"], 0.01);
  EXPECT_EQ(show({"-c", cfg.string(), "--set", "units.k=64"})["k"], 64);
  EXPECT_EQ(show({"-c", cfg.string(), "--set", "units.k=64"})["pretrain"]["peak_lr"], 0.01);

  const auto later = write(dir / "b.cfg", "[units]\nk = 41\n");
  EXPECT_EQ(show({"-c", cfg.string(), "-c", later.string()})["k"], 41);

  // a dedicated flag outranks --set for the same key
  const auto toy = toy::make(dir / "corpus", 4, 1);
  const auto feats = toy.corpus.split("train").front()->clean_feature_path;
  const auto r = call({"kmeans", "fit", "-c", cfg.string(), "--set", "units.k=9", "--k", "3", "--features",
                       feats.string(), "-o", (dir / "k3.ufcbk").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(units::load_codebook(dir / "k3.ufcbk").k(), 3);
}

TEST(CliConfig, EnvironmentSitsBetweenConfigAndFlags) {
  const auto dir = toy::scratch("cli_env");
  const auto cfg = write(dir / "a.cfg", "[run]\nroot = from_file\nworkers = 2\n");
  EXPECT_EQ(show({"-c", cfg.string()})["run_root"], "from_file");
  ::setenv("UNITFLOW_RUN_ROOT", "from_env", 1);
  ::setenv("UNITFLOW_WORKERS", "3", 1);
  EXPECT_EQ(show({"-c", cfg.string()})["run_root"], "from_env");
  EXPECT_EQ(show({"-c", cfg.string()})["workers"], 3);
  EXPECT_EQ(show({"-c", cfg.string(), "--set", "run.root=from_flag"})["run_root"], "from_flag");
  ::unsetenv("UNITFLOW_RUN_ROOT");
  ::unsetenv("UNITFLOW_WORKERS");
}

TEST(CliConfig, ShippedConfigsResolve) {
  const auto tiny = show({"-c", config_path("tiny.cfg")});
  EXPECT_EQ(tiny["k"], 12);
  EXPECT_EQ(tiny["model"]["layers"], 4);
  EXPECT_EQ(tiny["pretrain"]["total_updates"], 2000);
  EXPECT_EQ(tiny["finetune"]["total_updates"], 2000);
  EXPECT_EQ(tiny["corpus"]["severity"], 0.5);

  const auto base = show({"-c", config_path("paper-base.cfg")});
  EXPECT_EQ(base["k"], 512);
  EXPECT_EQ(base["model"]["layers"], 18);
  EXPECT_EQ(base["model"]["heads"], 12);
  EXPECT_EQ(base["model"]["dim"], 768);
  EXPECT_EQ(base["model"]["unit_emb_dim"], 512);
  EXPECT_EQ(base["pretrain"]["peak_lr"], 7.5e-5);
  EXPECT_EQ(base["pretrain"]["warmup_steps"], 20000);
  EXPECT_EQ(base["pretrain"]["total_updates"], 600000);
  EXPECT_EQ(base["finetune"]["peak_lr"], 1e-5);
  EXPECT_EQ(base["finetune"]["warmup_steps"], 10000);
  EXPECT_EQ(base["finetune"]["total_updates"], 400000);

  const auto small = show({"-c", config_path("paper-small.cfg")});
  EXPECT_EQ(small["model"]["layers"], 9);
  EXPECT_EQ(small["model"]["heads"], 6);
  EXPECT_EQ(small["model"]["dim"], 512);
  EXPECT_EQ(small["pretrain"]["total_updates"], 400000);
  EXPECT_EQ(small["finetune"]["total_updates"], 300000);
}

TEST(CliConfig, UnknownKeysAreRejected) {
  const auto dir = toy::scratch("cli_keys");
  auto r = call({"config", "show", "-c", write(dir / "a.cfg", "[units]\nkk = 3\n").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_kind(r.err), "InvalidInput");
  EXPECT_NE(r.err.find("units.kk"), std::string::npos);

  r = call({"config", "show", "--set", "nosection=1"});
  EXPECT_EQ(r.code, 1);
  r = call({"config", "show", "--set", "units.k"});
  EXPECT_EQ(r.code, 1);
  r = call({"config", "show", "--set", "units.k=twelve"});
  EXPECT_EQ(r.code, 1);
  r = call({"config", "show", "-c", write(dir / "b.cfg", "k = 3\n").string()});
  EXPECT_EQ(r.code, 1);
  r = call({"config", "show", "--set", "model.heads=3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_kind(r.err), "InvalidInput");
}

TEST(CliConfig, RunHashIgnoresOnlyTheConditionMode) {
  const auto a = show({})["hash"];
  EXPECT_EQ(show({"--set", "model.cond_mode=mel_input"})["hash"], a);
  EXPECT_NE(show({"--set", "finetune.peak_lr=0.5"})["hash"], a);
  EXPECT_EQ(call({"config", "keys"}).out.find("units.k\t") != std::string::npos, true);
}

TEST(CliUsage, ExitCodes) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"bogus"}).code, 2);
  EXPECT_EQ(call({"kmeans"}).code, 2);
  auto r = call({"kmeans", "fit", "--no-such-flag"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_kind(r.err), "Usage");
  EXPECT_EQ(call({"units", "collapse"}).code, 2);
  EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(CliUsage, HelpListsEveryFlag) {
  const std::vector<std::string> common = {"--config", "--set", "--run-dir", "--force", "--help"};
  const std::map<std::string, std::vector<std::string>> flags = {
      {"config show", {}},
      {"config keys", {}},
      {"corpus build", {"--n-train", "--n-test", "--severity", "--out"}},
      {"mel extract", {"--wav", "--out"}},
      {"vad trim", {"--in", "--out"}},
      {"kmeans fit", {"--k", "--corpus", "--features", "--out"}},
      {"units assign", {"--features", "--codebook", "--out", "--collapse"}},
      {"units collapse", {"--in", "--out"}},
      {"train pretrain", {"--mode", "--steps", "--corpus", "--codebook", "--resume"}},
      {"train finetune", {"--mode", "--steps", "--corpus", "--codebook", "--resume", "--init", "--from-scratch"}},
      {"generate",
       {"--checkpoint", "--features", "--mel", "--codebook", "--ref-mel", "--ref-features", "--frames", "--out",
        "--wav", "--mode", "--steps", "--sway"}},
      {"eval", {"--checkpoint", "--corpus", "--codebook", "--out", "--mode", "--max-items"}},
      {"plot", {"--out"}},
  };
  const auto top = call({"--help"}).out;
  for (const auto& [cmd, own] : flags) {
    std::vector<std::string> args;
    std::istringstream words(cmd);
    for (std::string w; words >> w;) args.push_back(w);
    EXPECT_NE(top.find(args.front()), std::string::npos) << args.front();
    args.push_back("--help");
    const auto r = call(args);
    ASSERT_EQ(r.code, 0) << cmd;
    for (const auto& f : common) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
    for (const auto& f : own) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST(CliKmeans, FitsTheRequestedCodebookSize) {
  const auto dir = toy::scratch("cli_k512");
  const auto corpus = toy::make(dir / "corpus", 40, 1).corpus;
  std::vector<std::string> args = {"kmeans", "fit", "--k", "512", "--set", "units.n_init=1", "--set", "units.max_iters=5",
                                   "-o", (dir / "cb.ufcbk").string(), "--features"};
  for (const auto* e : corpus.split("train")) args.push_back(e->clean_feature_path.string());
  const auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["k"], 512);
  EXPECT_EQ(units::load_codebook(dir / "cb.ufcbk").k(), 512);
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    root = toy::scratch("cli_pipe");
    base = {"-c", config_path("tiny.cfg"), "--set", "run.root=" + root.string(), "--set", "corpus.n_train=8",
            "--set", "corpus.n_test=2", "--set", "pretrain.total_updates=6", "--set", "pretrain.warmup_steps=2",
            "--set", "finetune.total_updates=6", "--set", "finetune.warmup_steps=2", "--set", "sampler.steps=4"};
  }
  Result go(std::vector<std::string> args, std::vector<std::string> extra = {}) {
    args.insert(args.end(), base.begin(), base.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return call(args);
  }
  fs::path run_dir() const { return fs::directory_iterator(root)->path(); }

  fs::path root;
  std::vector<std::string> base;
};

TEST_F(CliPipeline, FinetuneWithoutPretrainFails) {
  ASSERT_EQ(go({"corpus", "build"}).code, 0);
  ASSERT_EQ(go({"kmeans", "fit"}).code, 0);
  const auto r = go({"train", "finetune"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_kind(r.err), "IncompatibleCheckpoint");
  EXPECT_EQ(go({"train", "finetune", "--from-scratch"}).code, 0);
}

TEST_F(CliPipeline, EndToEndIsReproducible) {
  ASSERT_EQ(go({"corpus", "build"}).code, 0);
  const auto dir = run_dir();
  EXPECT_EQ(dir.filename().string().substr(0, 12), show(base)["hash"]);
  const auto manifest = slurp(dir / "corpus" / "manifest.jsonl");
  const auto first_mel = slurp(dir / "corpus" / "test" / "test-00000.degraded.ufmel");
  ASSERT_EQ(go({"corpus", "build"}).code, 0);
  EXPECT_EQ(slurp(dir / "corpus" / "manifest.jsonl"), manifest);
  EXPECT_EQ(slurp(dir / "corpus" / "test" / "test-00000.degraded.ufmel"), first_mel);

  ASSERT_EQ(go({"kmeans", "fit"}).code, 0);
  const auto cb = slurp(dir / "codebook.ufcbk");
  ASSERT_EQ(go({"kmeans", "fit"}).code, 0);
  EXPECT_EQ(slurp(dir / "codebook.ufcbk"), cb);

  ASSERT_EQ(go({"train", "pretrain"}).code, 0);
  auto again = go({"train", "pretrain"});
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  const auto ck = slurp(dir / "units" / "pretrain" / "last.ufckp");
  ASSERT_EQ(go({"train", "pretrain"}, {"--force"}).code, 0);
  EXPECT_EQ(slurp(dir / "units" / "pretrain" / "last.ufckp"), ck);

  ASSERT_EQ(go({"train", "finetune"}).code, 0);
  const auto ev = go({"eval"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(nlohmann::json::parse(ev.out)["n"], 2);
  const auto report = slurp(dir / "units" / "finetune" / "eval" / "report.json");
  ASSERT_EQ(go({"eval"}).code, 0);
  EXPECT_EQ(slurp(dir / "units" / "finetune" / "eval" / "report.json"), report);

  const auto degraded = dir / "corpus" / "test" / "test-00001";
  const std::vector<std::string> gen = {"--features", degraded.string() + ".degraded.uffea", "--mel",
                                        degraded.string() + ".degraded.ufmel"};
  auto g = gen;
  g.insert(g.end(), {"-o", (root / "a.ufmel").string()});
  ASSERT_EQ(go({"generate"}, g).code, 0);
  g = gen;
  g.insert(g.end(), {"-o", (root / "b.ufmel").string()});
  ASSERT_EQ(go({"generate"}, g).code, 0);
  EXPECT_EQ(slurp(root / "a.ufmel"), slurp(root / "b.ufmel"));

  ASSERT_EQ(go({"train", "pretrain"}, {"--mode", "mel_input"}).code, 0);
  ASSERT_EQ(go({"train", "finetune"}, {"--mode", "mel_input"}).code, 0);
  ASSERT_EQ(go({"eval"}, {"--mode", "mel_input"}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "mel_input" / "finetune" / "eval" / "report.json"));

  const auto p = go({"plot"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(fs::exists(dir / "plots" / "compare_finetune.png"));
  EXPECT_TRUE(fs::exists(dir / "plots" / "mel_units_finetune_eval_test-00000.png"));
}

TEST_F(CliPipeline, MissingInputsAreRuntimeFailures) {
  auto r = go({"kmeans", "fit"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_kind(r.err), "IoError");
  r = go({"units", "assign", "--features", "/nonexistent.uffea", "-o", (root / "u").string()});
  EXPECT_EQ(r.code, 2);
  r = go({"plot"});
  EXPECT_EQ(r.code, 1);
}

TEST(CliFiles, UnitsAndVadCommands) {
  const auto dir = toy::scratch("cli_files");
  const auto t = toy::make(dir / "corpus", 6, 1);
  units::save_codebook(dir / "cb.ufcbk", t.codebook);
  const auto* e = t.corpus.split("test").front();

  auto r = call({"units", "assign", "--features", e->degraded_feature_path.string(), "--codebook",
                 (dir / "cb.ufcbk").string(), "-o", (dir / "raw.units").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = call({"units", "collapse", "-i", (dir / "raw.units").string(), "-o", (dir / "c.units").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = call({"units", "assign", "--collapse", "--features", e->degraded_feature_path.string(), "--codebook",
            (dir / "cb.ufcbk").string(), "-o", (dir / "c2.units").string()});
  ASSERT_EQ(r.code, 0);
  const auto raw = units::load_units(dir / "raw.units").units;
  EXPECT_FALSE(raw.collapsed);
  EXPECT_EQ(units::load_units(dir / "c.units").units.ids, oracle::unique_runs(raw.ids));
  EXPECT_EQ(slurp(dir / "c.units"), slurp(dir / "c2.units"));

  r = call({"vad", "trim", "-i", e->degraded_mel_path.string(), "-o", (dir / "t.ufmel").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(dsp::load_mel(dir / "t.ufmel").num_frames(), j["last_frame"].get<int>() - j["first_frame"].get<int>() + 1);
  EXPECT_LE(dsp::load_mel(dir / "t.ufmel").num_frames(), dsp::load_mel(e->degraded_mel_path).num_frames());

  dsp::Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(8000, 0.0);
  for (int i = 2000; i < 6000; ++i) w.samples[i] = 0.3 * std::sin(0.3 * i);
  dsp::save_wav(dir / "in.wav", w);
  r = call({"vad", "trim", "-i", (dir / "in.wav").string(), "-o", (dir / "t.wav").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(dsp::load_wav(dir / "t.wav").duration_s(), 0.5, 0.05);
  r = call({"mel", "extract", "--wav", (dir / "in.wav").string(), "-o", (dir / "in.ufmel").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(dsp::load_mel(dir / "in.ufmel").num_frames(), 101);

  dsp::Waveform silent;
  silent.samples.assign(1600, 0.0);
  dsp::save_wav(dir / "silent.wav", silent);
  r = call({"vad", "trim", "-i", (dir / "silent.wav").string(), "-o", (dir / "x.wav").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_kind(r.err), "EmptyAfterTrim");
}
