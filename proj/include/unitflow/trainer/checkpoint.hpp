#pragma once

#include "unitflow/core/binary_io.hpp"
#include "unitflow/trainer/adamw.hpp"
#include "unitflow/trainer/config.hpp"
#include "unitflow/vfnet/params.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace unitflow::trainer {

struct TrainState {
  vfnet::ModelParams<float> params;
  AdamWState<float> optim;
  long step = 0;
  long epoch = 0;   // batch-plan epoch
  long cursor = 0;  // next batch within the epoch
  std::vector<std::pair<long, double>> loss_history;
  std::mt19937_64 rng;
};

inline TrainState fresh_state(vfnet::ModelParams<float> params, std::uint64_t seed) {
  TrainState s;
  s.params = std::move(params);
  s.optim = make_adamw_state(s.params);
  s.rng.seed(seed);
  return s;
}

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  require(!is.fail(), ErrorKind::IoError, "checkpoint has a malformed rng state");
  return rng;
}

/// Everything needed to continue training or to run inference.
struct Checkpoint {
  vfnet::ModelConfig model;
  TrainConfig train;
  TrainState state;
  bool has_optimizer = true;
  double duplication_factor = 1.0;
  double length_ratio = 1.0;
};

inline constexpr std::string_view kCheckpointMagic = "UFCKP1";

namespace detail {

inline void put_params(io::ByteWriter& w, const vfnet::ModelParams<float>& p) {
  std::uint32_t count = 0;
  p.visit([&](const std::string&, const MatF&) { ++count; });
  w.put<std::uint32_t>(count);
  p.visit([&](const std::string& name, const MatF& m) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    w.put_array(m.data(), static_cast<std::size_t>(m.size()));
  });
}

inline void get_params(io::ByteReader& r, vfnet::ModelParams<float>& p, const std::string& origin) {
  std::uint32_t expected = 0;
  p.visit([&](const std::string&, const MatF&) { ++expected; });
  const auto count = r.get<std::uint32_t>();
  if (count != expected)
    throw Error(ErrorKind::IncompatibleCheckpoint, origin + ": tensor count " + std::to_string(count) +
                                                       " differs from the configured model (" +
                                                       std::to_string(expected) + ")");
  p.visit([&](const std::string& name, MatF& m) {
    const auto stored = r.get_string();
    const auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
    if (stored != name || rows != m.rows() || cols != m.cols())
      throw Error(ErrorKind::IncompatibleCheckpoint,
                  origin + ": tensor '" + stored + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " does not match '" + name + "' " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    r.get_array(m.data(), static_cast<std::size_t>(m.size()));
  });
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  nlohmann::json meta = {{"model", c.model},
                         {"train", c.train},
                         {"epoch", c.state.epoch},
                         {"cursor", c.state.cursor},
                         {"optimizer_updates", c.state.optim.updates},
                         {"rng", rng_to_string(c.state.rng)},
                         {"duplication_factor", c.duplication_factor},
                         {"length_ratio", c.length_ratio},
                         {"has_optimizer", c.has_optimizer}};
  auto& hist = meta["loss_history"] = nlohmann::json::array();
  for (const auto& [s, l] : c.state.loss_history) hist.push_back({s, l});

  io::ByteWriter w;
  w.magic(kCheckpointMagic);
  w.put_string(meta.dump());
  detail::put_params(w, c.state.params);
  if (c.has_optimizer) {
    detail::put_params(w, c.state.optim.m);
    detail::put_params(w, c.state.optim.v);
  }
  w.put<std::uint64_t>(static_cast<std::uint64_t>(c.state.step));
  return w.bytes();
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::write_file_atomic(path, encode_checkpoint(c));
}

inline Checkpoint decode_checkpoint(std::string bytes, const std::string& origin = "<checkpoint>") {
  io::ByteReader r(std::move(bytes), origin);
  r.expect_magic(kCheckpointMagic);
  Checkpoint c;
  try {
    const auto meta = nlohmann::json::parse(r.get_string());
    c.model = meta.at("model").get<vfnet::ModelConfig>();
    c.train = meta.at("train").get<TrainConfig>();
    c.state.epoch = meta.at("epoch");
    c.state.cursor = meta.at("cursor");
    c.state.optim.updates = meta.at("optimizer_updates");
    c.state.rng = rng_from_string(meta.at("rng"));
    c.duplication_factor = meta.at("duplication_factor");
    c.length_ratio = meta.at("length_ratio");
    c.has_optimizer = meta.at("has_optimizer");
    for (const auto& h : meta.at("loss_history")) c.state.loss_history.emplace_back(h.at(0), h.at(1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::IoError, origin + ": malformed checkpoint header: " + e.what());
  }
  c.model.validate();
  c.state.params = vfnet::init_params<float>(c.model, 0);
  detail::get_params(r, c.state.params, origin);
  if (c.has_optimizer) {
    c.state.optim.m = c.state.params.zeros_like();
    c.state.optim.v = c.state.params.zeros_like();
    detail::get_params(r, c.state.optim.m, origin);
    detail::get_params(r, c.state.optim.v, origin);
  }
  c.state.step = static_cast<long>(r.get<std::uint64_t>());
  require(r.at_end(), ErrorKind::IoError, origin + ": trailing bytes after checkpoint");
  return c;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

/// Throws IncompatibleCheckpoint unless the stored architecture equals `expected`.
inline void require_compatible(const Checkpoint& c, const vfnet::ModelConfig& expected, const std::string& origin) {
  if (!(c.model == expected)) {
    throw Error(ErrorKind::IncompatibleCheckpoint,
                origin + ": checkpoint architecture " + nlohmann::json(c.model).dump() +
                    " differs from the configured " + nlohmann::json(expected).dump());
  }
}

}  // namespace unitflow::trainer
