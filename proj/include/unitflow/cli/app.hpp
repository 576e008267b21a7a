#pragma once

#include "unitflow/benchkit/eval.hpp"
#include "unitflow/benchkit/plot.hpp"
#include "unitflow/cli/config.hpp"
#include "unitflow/dsp/griffin_lim.hpp"
#include "unitflow/dsp/io.hpp"
#include "unitflow/dsp/mel.hpp"
#include "unitflow/dsp/resample.hpp"
#include "unitflow/trainer/train.hpp"
#include "unitflow/units/io.hpp"
#include "unitflow/units/sequence.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <ostream>

namespace unitflow::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// One line on stderr that scripts can parse.
inline std::string error_line(std::string_view kind, std::string msg) {
  const std::string prefix = std::string(kind) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  std::string quoted;
  for (char c : msg) {
    if (c == '"' || c == '\\') quoted += '\\';
    quoted += c == '\n' ? ' ' : c;
  }
  return "error kind=" + std::string(kind) + " msg=\"" + quoted + "\"";
}

namespace detail {

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::string run_dir;
  bool force = false;
};

struct Invocation {
  const Common& common;
  Settings flags;
  std::ostream& out;
  std::ostream& log;

  RunConfig config() const {
    std::vector<Settings> layers;
    for (const auto& path : common.configs) layers.push_back(read_settings(path));
    layers.push_back(env_settings());
    Settings sets;
    for (const auto& kv : common.sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos && eq > 0, ErrorKind::InvalidInput, "--set expects KEY=VALUE, got '" + kv + "'");
      sets[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    layers.push_back(std::move(sets));
    layers.push_back(flags);
    return resolve(layers);
  }
};

inline std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// `<root>/<hash>-<timestamp>`; the newest directory with a matching hash is reused.
inline fs::path run_dir(const RunConfig& c, const Common& common, std::ostream& log) {
  fs::path dir;
  if (!common.run_dir.empty()) {
    dir = common.run_dir;
  } else {
    const std::string prefix = c.hash() + "-";
    std::error_code ec;
    if (fs::is_directory(c.run_root))
      for (const auto& e : fs::directory_iterator(c.run_root, ec)) {
        const std::string name = e.path().filename().string();
        if (e.is_directory() && name.rfind(prefix, 0) == 0 && (dir.empty() || name > dir.filename().string()))
          dir = e.path();
      }
    if (dir.empty()) dir = fs::path(c.run_root) / (prefix + timestamp());
  }
  if (!fs::exists(dir / "config.json")) {
    nlohmann::json j = c.to_json();
    j["hash"] = c.hash();
    io::write_file_atomic(dir / "config.json", j.dump(2) + "\n");
    log << "run directory " << dir.string() << "\n";
  }
  return dir;
}

inline units::FeatureMatrix stack_features(const std::vector<fs::path>& files) {
  require(!files.empty(), ErrorKind::InvalidInput, "no feature files to fit");
  std::vector<MatF> parts;
  Eigen::Index n = 0;
  for (const auto& f : files) {
    parts.push_back(units::load_features(f).rows);
    n += parts.back().rows();
    require(parts.back().cols() == parts.front().cols(), ErrorKind::InvalidInput,
            f.string() + ": feature dimension differs from the first file");
  }
  units::FeatureMatrix all;
  all.rows.resize(n, parts.front().cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    all.rows.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return all;
}

inline std::string mode_name(const RunConfig& c) { return vfnet::to_string(c.model.cond_mode); }

inline fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

inline trainer::Checkpoint load_matching(const fs::path& ck_path, const units::Codebook* cb) {
  require(fs::exists(ck_path), ErrorKind::IncompatibleCheckpoint, "no checkpoint at " + ck_path.string());
  trainer::Checkpoint ck = trainer::load_checkpoint(ck_path);
  if (cb)
    require(ck.model.codebook_size() == cb->k(), ErrorKind::IncompatibleCheckpoint,
            "checkpoint expects K=" + std::to_string(ck.model.codebook_size()) + " but the codebook has K=" +
                std::to_string(cb->k()));
  return ck;
}

/// Trims pause frames from a degraded mel, returning the kept [first, last].
inline std::pair<long, long> mel_bounds(const MatF& mel, const dsp::VadConfig& vad) {
  return dsp::speech_bounds(dsp::mel_frame_energy_db(mel), vad);
}

}  // namespace detail

/// Runs one command line (without the program name). Results go to `out`,
/// progress and the error line to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using detail::Invocation;
  detail::Common common;
  Settings flags;
  std::function<void(Invocation&)> action;

  CLI::App app{"Dysarthric-to-clean speech conversion with discrete units and flow matching"};
  app.name("unitflow");
  app.require_subcommand(1);

  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& about,
                  std::function<void(Invocation&)> fn) {
    CLI::App* sub = parent->add_subcommand(name, about);
    sub->add_option("-c,--config", common.configs, "INI config file; later files override earlier ones")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override one config key, e.g. --set units.k=64");
    sub->add_option("--run-dir", common.run_dir, "use this run directory instead of <run.root>/<hash>-<time>");
    sub->add_flag("--force", common.force, "overwrite outputs that would otherwise be kept");
    sub->callback([&action, fn] { action = fn; });
    return sub;
  };
  // A flag that maps onto a config key and outranks --set.
  auto keyed = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; },
                                          help + " (" + key + ")");
  };

  // config
  CLI::App* config = app.add_subcommand("config", "inspect the resolved configuration");
  config->require_subcommand(1);
  leaf(config, "show", "print the resolved config and run hash", [](Invocation& inv) {
    const RunConfig c = inv.config();
    nlohmann::json j = c.to_json();
    j["hash"] = c.hash();
    j["run_root"] = c.run_root;
    j["workers"] = c.workers;
    inv.out << j.dump(2) << "\n";
  });
  leaf(config, "keys", "list every config key", [](Invocation& inv) {
    for (const auto& [k, help] : config_keys()) inv.out << k << "\t" << help << "\n";
  });

  // corpus build
  std::string corpus_out;
  CLI::App* corpus = app.add_subcommand("corpus", "synthetic paired corpus");
  corpus->require_subcommand(1);
  CLI::App* corpus_build = leaf(corpus, "build", "write a paired clean/degraded corpus", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    const fs::path dir = detail::or_default(corpus_out, detail::run_dir(c, common, inv.log) / "corpus");
    inv.log << "building " << c.n_train << " + " << c.n_test << " entries in " << dir.string() << "\n";
    const auto m = benchkit::build_corpus(dir, c.n_train, c.n_test, c.corpus, c.seed);
    inv.out << nlohmann::json{{"corpus", dir.string()}, {"entries", m.entries.size()}}.dump() << "\n";
  });
  keyed(corpus_build, "--n-train", "corpus.n_train", "training scripts");
  keyed(corpus_build, "--n-test", "corpus.n_test", "held-out scripts");
  keyed(corpus_build, "--severity", "corpus.severity", "degradation severity");
  corpus_build->add_option("-o,--out", corpus_out, "corpus directory");

  // mel extract
  std::string wav_in, mel_out;
  CLI::App* mel = app.add_subcommand("mel", "log-mel front-end");
  mel->require_subcommand(1);
  CLI::App* mel_extract = leaf(mel, "extract", "log-mel spectrogram of a WAV file", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    dsp::MelConfig mc;
    mc.n_mels = c.corpus.voice.mel_dim;
    dsp::Waveform w = dsp::load_wav(wav_in);
    if (w.sample_rate != mc.sample_rate) w = dsp::resample(w, mc.sample_rate);
    const auto m = dsp::log_mel(w, mc);
    dsp::save_mel(mel_out, m);
    inv.out << nlohmann::json{{"mel", mel_out}, {"frames", m.num_frames()}, {"mels", m.num_mels()}}.dump() << "\n";
  });
  mel_extract->add_option("--wav", wav_in, "input WAV")->required()->check(CLI::ExistingFile);
  mel_extract->add_option("-o,--out", mel_out, "output .ufmel")->required();

  // vad trim
  std::string vad_in, vad_out;
  CLI::App* vad = app.add_subcommand("vad", "energy voice activity detection");
  vad->require_subcommand(1);
  CLI::App* vad_trim = leaf(vad, "trim", "drop leading and trailing silence from a WAV or .ufmel", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    if (fs::path(vad_in).extension() == ".ufmel") {
      auto m = dsp::load_mel(vad_in);
      const auto [first, last] = detail::mel_bounds(m.frames, c.vad);
      m.frames = m.frames.middleRows(first, last - first + 1).eval();
      dsp::save_mel(vad_out, m);
      inv.out << nlohmann::json{{"out", vad_out}, {"first_frame", first}, {"last_frame", last}}.dump() << "\n";
    } else {
      const auto w = dsp::load_wav(vad_in);
      const auto t = dsp::trim_silence(w, c.vad);
      dsp::save_wav(vad_out, t);
      inv.out << nlohmann::json{{"out", vad_out}, {"seconds_in", w.duration_s()}, {"seconds_out", t.duration_s()}}.dump()
              << "\n";
    }
  });
  vad_trim->add_option("-i,--in", vad_in, "input .wav or .ufmel")->required()->check(CLI::ExistingFile);
  vad_trim->add_option("-o,--out", vad_out, "output file of the same kind")->required();

  // kmeans fit
  std::string km_corpus, km_out;
  std::vector<std::string> km_features;
  CLI::App* kmeans = app.add_subcommand("kmeans", "unit codebook");
  kmeans->require_subcommand(1);
  CLI::App* kmeans_fit = leaf(kmeans, "fit", "fit a k-means codebook on clean training features", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    std::vector<fs::path> files(km_features.begin(), km_features.end());
    fs::path out_path = km_out;
    if (files.empty() || out_path.empty()) {
      const fs::path dir = detail::run_dir(c, common, inv.log);
      if (out_path.empty()) out_path = dir / "codebook.ufcbk";
      if (files.empty()) {
        const auto m = benchkit::load_manifest(detail::or_default(km_corpus, dir / "corpus"));
        for (const auto* e : m.split("train")) files.push_back(e->clean_feature_path);
      }
    }
    const auto feats = detail::stack_features(files);
    inv.log << "fitting K=" << c.k << " on " << feats.num_frames() << " frames\n";
    const auto cb = units::fit_kmeans(feats, c.k, c.seed, c.kmeans);
    units::save_codebook(out_path, cb);
    inv.out << nlohmann::json{{"codebook", out_path.string()}, {"k", cb.k()}, {"inertia", cb.inertia}}.dump() << "\n";
  });
  keyed(kmeans_fit, "--k", "units.k", "number of clusters");
  kmeans_fit->add_option("--corpus", km_corpus, "corpus directory (default <run>/corpus)");
  kmeans_fit->add_option("--features", km_features, "fit on these .uffea files instead of a corpus")
      ->check(CLI::ExistingFile);
  kmeans_fit->add_option("-o,--out", km_out, "output codebook (default <run>/codebook.ufcbk)");

  // units assign|collapse
  std::string u_features, u_codebook, u_in, u_out;
  bool u_collapse = false;
  CLI::App* units_cmd = app.add_subcommand("units", "discrete unit sequences");
  units_cmd->require_subcommand(1);
  CLI::App* units_assign = leaf(units_cmd, "assign", "quantize features to nearest centroids", [&](Invocation& inv) {
    fs::path cb_path = u_codebook;
    if (cb_path.empty()) cb_path = detail::run_dir(inv.config(), common, inv.log) / "codebook.ufcbk";
    const auto cb = units::load_codebook(cb_path);
    auto u = units::assign(units::load_features(u_features), cb);
    if (u_collapse) u = units::collapse(u);
    units::save_units(u_out, u, cb.k());
    inv.out << nlohmann::json{{"units", u_out}, {"count", u.size()}, {"collapsed", u.collapsed}}.dump() << "\n";
  });
  units_assign->add_option("--features", u_features, "input .uffea")->required()->check(CLI::ExistingFile);
  units_assign->add_option("--codebook", u_codebook, "codebook (default <run>/codebook.ufcbk)");
  units_assign->add_option("-o,--out", u_out, "output unit file")->required();
  units_assign->add_flag("--collapse", u_collapse, "merge consecutive repeats");
  CLI::App* units_collapse = leaf(units_cmd, "collapse", "merge consecutive repeated units", [&](Invocation& inv) {
    const auto f = units::load_units(u_in);
    const auto u = units::collapse(f.units);
    units::save_units(u_out, u, f.k);
    inv.out << nlohmann::json{{"units", u_out}, {"count", u.size()}}.dump() << "\n";
  });
  units_collapse->add_option("-i,--in", u_in, "input unit file")->required()->check(CLI::ExistingFile);
  units_collapse->add_option("-o,--out", u_out, "output unit file")->required();

  // train pretrain|finetune
  std::string t_corpus, t_codebook, t_init, t_resume;
  bool t_scratch = false;
  CLI::App* train = app.add_subcommand("train", "flow-matching training");
  train->require_subcommand(1);
  auto train_stage = [&](trainer::Stage stage) {
    return [&, stage](Invocation& inv) {
      const RunConfig c = inv.config();
      const fs::path dir = detail::run_dir(c, common, inv.log);
      const fs::path stage_dir = dir / detail::mode_name(c) / trainer::to_string(stage);
      if (t_resume.empty() && fs::exists(stage_dir / "last.ufckp")) {
        require(common.force, ErrorKind::InvalidInput,
                stage_dir.string() + " already holds a trained stage; pass --force to retrain or --resume");
        fs::remove_all(stage_dir);
      }
      const auto corpus_m = benchkit::load_manifest(detail::or_default(t_corpus, dir / "corpus"));
      const auto cb = units::load_codebook(detail::or_default(t_codebook, dir / "codebook.ufcbk"));
      trainer::StageOptions opt;
      opt.run_dir = stage_dir;
      opt.allow_scratch_finetune = t_scratch;
      if (!t_resume.empty()) opt.resume_checkpoint = fs::path(t_resume);
      if (stage == trainer::Stage::finetune && !t_scratch) {
        const fs::path init = detail::or_default(t_init, dir / detail::mode_name(c) / "pretrain" / "last.ufckp");
        if (fs::exists(init)) opt.init_checkpoint = init;
        else if (!t_init.empty())
          throw Error(ErrorKind::IncompatibleCheckpoint, "init checkpoint " + init.string() + " does not exist");
      }
      const auto& tc = stage == trainer::Stage::pretrain ? c.pretrain : c.finetune;
      const long every = std::max(1L, tc.total_updates / 20);
      opt.on_step = [&inv, every](long step, const trainer::StepResult& r) {
        if (step % every == 0) inv.log << "step " << step << " loss " << r.loss << " lr " << r.lr << "\n";
      };
      inv.log << "training " << trainer::to_string(stage) << " (" << detail::mode_name(c) << ") for "
              << tc.total_updates << " updates\n";
      const auto res = trainer::run_stage(corpus_m, cb, c.model, tc, opt);
      inv.out << nlohmann::json{{"checkpoint", res.checkpoint.string()},
                                {"metrics", res.metrics_csv.string()},
                                {"step", res.final.state.step},
                                {"skipped", res.skipped}}
                     .dump()
              << "\n";
    };
  };
  for (auto stage : {trainer::Stage::pretrain, trainer::Stage::finetune}) {
    const std::string s = trainer::to_string(stage);
    CLI::App* sub = leaf(train, s, s + " the vector field network", train_stage(stage));
    keyed(sub, "--mode", "model.cond_mode", "condition mode: units or mel_input");
    keyed(sub, "--steps", s + ".total_updates", "optimizer updates");
    sub->add_option("--corpus", t_corpus, "corpus directory (default <run>/corpus)");
    sub->add_option("--codebook", t_codebook, "codebook (default <run>/codebook.ufcbk)");
    sub->add_option("--resume", t_resume, "continue this stage from a checkpoint")->check(CLI::ExistingFile);
    if (stage == trainer::Stage::finetune) {
      sub->add_option("--init", t_init, "pretrained weights (default <run>/<mode>/pretrain/last.ufckp)");
      sub->add_flag("--from-scratch", t_scratch, "finetune from random weights");
    }
  }

  // generate
  std::string g_ck, g_features, g_mel, g_codebook, g_ref_mel, g_ref_features, g_out, g_wav;
  int g_frames = 0;
  CLI::App* generate = leaf(&app, "generate", "convert one degraded utterance", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    const bool need_run = g_ck.empty() || (g_codebook.empty() && !g_features.empty());
    const fs::path dir = need_run ? detail::run_dir(c, common, inv.log) : fs::path();
    const fs::path ck_path = detail::or_default(g_ck, dir / detail::mode_name(c) / "finetune" / "last.ufckp");
    std::optional<units::Codebook> cb;
    if (!g_features.empty()) cb = units::load_codebook(detail::or_default(g_codebook, dir / "codebook.ufcbk"));
    const trainer::Checkpoint ck = detail::load_matching(ck_path, cb ? &*cb : nullptr);
    const bool units_mode = ck.model.cond_mode == vfnet::CondMode::units;

    sampler::GenerationRequest req;
    req.seed = c.seed;
    std::optional<MatF> deg;
    if (!g_mel.empty()) deg = dsp::load_mel(g_mel).frames;
    if (units_mode) {
      require(cb.has_value(), ErrorKind::InvalidInput, "units checkpoints need --features");
      units::FeatureMatrix feats = units::load_features(g_features);
      if (deg) trainer::trim_degraded(feats, *deg, c.vad);
      req.units = units::collapse(units::assign(feats, *cb));
      req.target_frames = g_frames > 0 ? g_frames : sampler::target_length(req.units.size(), ck.duplication_factor);
    } else {
      require(deg.has_value(), ErrorKind::InvalidInput, "mel_input checkpoints need --mel");
      const auto [first, last] = detail::mel_bounds(*deg, c.vad);
      req.cond_mel = deg->middleRows(first, last - first + 1);
      req.target_frames = g_frames > 0 ? g_frames
                                       : std::max(1, static_cast<int>(std::lround(req.cond_mel.rows() * ck.length_ratio)));
    }
    if (!g_ref_mel.empty()) {
      req.ref_mel = dsp::load_mel(g_ref_mel).frames;
      if (units_mode) {
        require(!g_ref_features.empty(), ErrorKind::InvalidInput, "--ref-mel in units mode needs --ref-features");
        req.ref_units = units::collapse(units::assign(units::load_features(g_ref_features), *cb)).ids;
      }
    }
    const vfnet::VectorFieldNet<float> net(ck.model);
    const auto gen = sampler::generate(req, ck.state.params, net, c.sway, ck.train.path_config);
    dsp::save_mel(g_out, gen);
    nlohmann::json j = {{"mel", g_out}, {"frames", gen.num_frames()}};
    if (!g_wav.empty()) {
      dsp::save_wav(g_wav, dsp::mel_to_audio(gen, 32, c.seed));
      j["wav"] = g_wav;
    }
    inv.out << j.dump() << "\n";
  });
  generate->add_option("--checkpoint", g_ck, "model (default <run>/<mode>/finetune/last.ufckp)");
  generate->add_option("--features", g_features, "degraded .uffea (units mode)");
  generate->add_option("--mel", g_mel, "degraded .ufmel (mel_input mode; trims units-mode features when given)");
  generate->add_option("--codebook", g_codebook, "codebook (default <run>/codebook.ufcbk)");
  generate->add_option("--ref-mel", g_ref_mel, "clean reference mel used as prompt");
  generate->add_option("--ref-features", g_ref_features, "features of the reference (units mode)");
  generate->add_option("--frames", g_frames, "target length in frames (default from the checkpoint's length ratio)");
  generate->add_option("-o,--out", g_out, "output .ufmel")->required();
  generate->add_option("--wav", g_wav, "also write a Griffin-Lim waveform");
  keyed(generate, "--mode", "model.cond_mode", "condition mode used to locate the default checkpoint");
  keyed(generate, "--steps", "sampler.steps", "ODE steps");
  keyed(generate, "--sway", "sampler.sway", "sway coefficient");

  // eval
  std::string e_ck, e_corpus, e_codebook, e_out;
  CLI::App* eval = leaf(&app, "eval", "convert and score the held-out split", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    const fs::path dir = detail::run_dir(c, common, inv.log);
    const fs::path ck_path = detail::or_default(e_ck, dir / detail::mode_name(c) / "finetune" / "last.ufckp");
    const auto corpus_m = benchkit::load_manifest(detail::or_default(e_corpus, dir / "corpus"));
    const auto cb = units::load_codebook(detail::or_default(e_codebook, dir / "codebook.ufcbk"));
    const auto ck = detail::load_matching(ck_path, &cb);
    benchkit::EvalOptions opt;
    opt.sway = c.sway;
    opt.seed = c.seed;
    opt.max_items = c.eval_max_items;
    opt.vad = c.vad;
    opt.save_examples = c.eval_save_examples;
    opt.output_dir = detail::or_default(e_out, ck_path.parent_path() / "eval");
    const auto report = benchkit::evaluate(corpus_m, cb, ck, opt);
    nlohmann::json j = report.to_json();
    j.erase("items");
    j["report"] = (*opt.output_dir / "report.json").string();
    inv.out << j.dump() << "\n";
  });
  eval->add_option("--checkpoint", e_ck, "model (default <run>/<mode>/finetune/last.ufckp)");
  eval->add_option("--corpus", e_corpus, "corpus directory (default <run>/corpus)");
  eval->add_option("--codebook", e_codebook, "codebook (default <run>/codebook.ufcbk)");
  eval->add_option("-o,--out", e_out, "report directory (default next to the checkpoint)");
  keyed(eval, "--mode", "model.cond_mode", "condition mode used to locate the default checkpoint");
  keyed(eval, "--max-items", "eval.max_items", "held-out items to score");

  // plot
  std::string p_out;
  CLI::App* plot = leaf(&app, "plot", "loss curves, ablation overlay and mel heatmaps of a run", [&](Invocation& inv) {
    const RunConfig c = inv.config();
    const fs::path dir = detail::run_dir(c, common, inv.log);
    const auto files = benchkit::emit_plots(dir, p_out.empty() ? fs::path() : fs::path(p_out));
    for (const auto& f : files) inv.out << f.string() << "\n";
  });
  plot->add_option("-o,--out", p_out, "plot directory (default <run>/plots)");

  std::vector<std::string> argv_store{"unitflow"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << error_line("Usage", e.what()) << "\n";
    return kExitUsage;
  }

  Invocation inv{common, flags, out, err};
  try {
    action(inv);
  } catch (const Error& e) {
    err << error_line(to_string(e.kind()), e.what()) << "\n";
    return kExitFailure;
  } catch (const fs::filesystem_error& e) {
    err << error_line("IoError", e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << error_line("Internal", e.what()) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace unitflow::cli
