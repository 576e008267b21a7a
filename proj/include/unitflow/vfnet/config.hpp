#pragma once

#include "unitflow/core/error.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace unitflow::vfnet {

/// What the per-frame condition channel carries.
enum class CondMode {
  units,      // embedded, collapsed discrete units padded with FILLER
  mel_input,  // linear projection of the degraded mel, learned pad row past its end
};

inline std::string to_string(CondMode m) { return m == CondMode::units ? "units" : "mel_input"; }

inline CondMode cond_mode_from_string(const std::string& s) {
  if (s == "units") return CondMode::units;
  if (s == "mel_input") return CondMode::mel_input;
  throw Error(ErrorKind::InvalidInput, "unknown condition mode '" + s + "'");
}

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int dim = 128;
  int head_width = 0;  // 0: dim / heads
  int ff_mult = 4;
  int unit_vocab = 14;  // K + FILLER + BATCH_PAD
  int unit_emb_dim = 512;
  int mel_dim = 80;
  int max_frames = 256;
  int time_freq_dim = 256;
  bool abs_positions = true;
  CondMode cond_mode = CondMode::units;

  int head_dim() const { return head_width > 0 ? head_width : dim / heads; }
  int attn_dim() const { return heads * head_dim(); }
  int ff_dim() const { return dim * ff_mult; }
  int codebook_size() const { return unit_vocab - 2; }
  int filler_id() const { return unit_vocab - 2; }
  int batch_pad_id() const { return unit_vocab - 1; }
  int input_dim() const { return 2 * mel_dim + unit_emb_dim; }

  void validate() const {
    require(layers >= 1 && heads >= 1 && dim >= 1, ErrorKind::InvalidInput,
            "model layers/heads/dim must be positive");
    require(head_width > 0 || dim % heads == 0, ErrorKind::InvalidInput,
            "model dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads) +
                "; set head_width");
    require(head_width >= 0, ErrorKind::InvalidInput, "head_width must be non-negative");
    require(head_dim() % 2 == 0, ErrorKind::InvalidInput, "rotary positions need an even head dim");
    require(unit_vocab >= 3, ErrorKind::InvalidInput, "unit_vocab must be >= 3");
    require(ff_mult >= 1 && unit_emb_dim >= 1 && mel_dim >= 1 && max_frames >= 1,
            ErrorKind::InvalidInput, "model sizes must be positive");
    require(time_freq_dim >= 2 && time_freq_dim % 2 == 0, ErrorKind::InvalidInput,
            "time_freq_dim must be even");
  }

  /// Desk-scale default.
  static ModelConfig tiny(int k) {
    ModelConfig c;
    c.unit_vocab = k + 2;
    c.time_freq_dim = 64;
    return c;
  }
  /// 18 layers, 12 heads, width 768.
  static ModelConfig paper_base(int k) {
    ModelConfig c;
    c.layers = 18;
    c.heads = 12;
    c.dim = 768;
    c.unit_vocab = k + 2;
    c.max_frames = 4096;
    return c;
  }
  /// 9 layers, 6 heads of width 64, model width 512.
  static ModelConfig paper_small(int k) {
    ModelConfig c;
    c.layers = 9;
    c.heads = 6;
    c.dim = 512;
    c.head_width = 64;
    c.unit_vocab = k + 2;
    c.max_frames = 4096;
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"layers", c.layers},           {"heads", c.heads},
       {"dim", c.dim},                 {"head_width", c.head_width},
       {"ff_mult", c.ff_mult},
       {"unit_vocab", c.unit_vocab},   {"unit_emb_dim", c.unit_emb_dim},
       {"mel_dim", c.mel_dim},         {"max_frames", c.max_frames},
       {"time_freq_dim", c.time_freq_dim}, {"abs_positions", c.abs_positions},
       {"cond_mode", to_string(c.cond_mode)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.dim = j.at("dim");
  c.head_width = j.value("head_width", 0);
  c.ff_mult = j.at("ff_mult");
  c.unit_vocab = j.at("unit_vocab");
  c.unit_emb_dim = j.at("unit_emb_dim");
  c.mel_dim = j.at("mel_dim");
  c.max_frames = j.at("max_frames");
  c.time_freq_dim = j.at("time_freq_dim");
  c.abs_positions = j.at("abs_positions");
  c.cond_mode = cond_mode_from_string(j.at("cond_mode"));
}

}  // namespace unitflow::vfnet
