#pragma once

#include "unitflow/core/binary_io.hpp"
#include "unitflow/dsp/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>

namespace unitflow::dsp {

inline constexpr std::string_view kMelMagic = "UFMEL1";

inline std::string encode_mel(const MelSpectrogram& m) {
  io::ByteWriter w;
  w.magic(kMelMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.frames.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.frames.cols()));
  w.put_array(m.frames.data(), static_cast<std::size_t>(m.frames.size()));
  return w.bytes();
}

inline nlohmann::json mel_metadata(const MelSpectrogram& m) {
  const auto& c = m.config;
  return {{"format", "UFMEL1"},      {"frames", m.frames.rows()},  {"n_mels", m.frames.cols()},
          {"sample_rate", c.sample_rate}, {"hop_s", c.hop_s()},    {"win_s", c.win_s()},
          {"fft_size", c.fft_size},  {"f_min", c.f_min},           {"f_max", c.f_max},
          {"log_floor_power", c.log_floor_power}, {"log_base", "e"}};
}

/// Writes `path` and its `path.json` metadata sidecar.
inline void save_mel(const std::filesystem::path& path, const MelSpectrogram& m) {
  io::write_file_atomic(path, encode_mel(m));
  auto sidecar = path;
  sidecar += ".json";
  io::write_file_atomic(sidecar, mel_metadata(m).dump(2) + "\n");
}

inline MelSpectrogram load_mel(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(kMelMagic);
  const auto t = r.get<std::uint32_t>();
  const auto n = r.get<std::uint32_t>();
  MelSpectrogram m;
  m.frames.resize(t, n);
  r.get_array(m.frames.data(), static_cast<std::size_t>(t) * n);
  m.config.n_mels = static_cast<int>(n);
  auto sidecar = path;
  sidecar += ".json";
  if (std::filesystem::exists(sidecar)) {
    const auto meta = nlohmann::json::parse(io::read_file(sidecar));
    m.config.sample_rate = meta.value("sample_rate", m.config.sample_rate);
    m.config.fft_size = meta.value("fft_size", m.config.fft_size);
    m.config.hop_length = static_cast<int>(std::lround(meta.value("hop_s", m.config.hop_s()) * m.config.sample_rate));
    m.config.win_length = static_cast<int>(std::lround(meta.value("win_s", m.config.win_s()) * m.config.sample_rate));
    m.config.f_min = meta.value("f_min", m.config.f_min);
    m.config.f_max = meta.value("f_max", m.config.f_max);
    m.config.log_floor_power = meta.value("log_floor_power", m.config.log_floor_power);
  }
  return m;
}

// 16-bit PCM mono RIFF/WAVE.
inline void save_wav(const std::filesystem::path& path, const Waveform& w) {
  io::ByteWriter b;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  b.magic("RIFF");
  b.put<std::uint32_t>(36 + data_bytes);
  b.magic("WAVE");
  b.magic("fmt ");
  b.put<std::uint32_t>(16);
  b.put<std::uint16_t>(1);
  b.put<std::uint16_t>(1);
  b.put<std::uint32_t>(static_cast<std::uint32_t>(w.sample_rate));
  b.put<std::uint32_t>(static_cast<std::uint32_t>(w.sample_rate * 2));
  b.put<std::uint16_t>(2);
  b.put<std::uint16_t>(16);
  b.magic("data");
  b.put<std::uint32_t>(data_bytes);
  for (double s : w.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    b.put<std::int16_t>(static_cast<std::int16_t>(std::lround(clipped * 32767.0)));
  }
  io::write_file_atomic(path, b.bytes());
}

inline Waveform load_wav(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic("RIFF");
  r.get<std::uint32_t>();
  r.expect_magic("WAVE");
  Waveform w;
  int channels = 0, bits = 0;
  bool have_fmt = false;
  while (!r.at_end()) {
    char id[4];
    r.get_array(id, 4);
    const auto size = r.get<std::uint32_t>();
    const std::string chunk(id, 4);
    if (chunk == "fmt ") {
      const auto format = r.get<std::uint16_t>();
      channels = r.get<std::uint16_t>();
      w.sample_rate = static_cast<int>(r.get<std::uint32_t>());
      r.get<std::uint32_t>();
      r.get<std::uint16_t>();
      bits = r.get<std::uint16_t>();
      for (std::uint32_t i = 16; i < size; ++i) r.get<char>();
      require(format == 1 && bits == 16, ErrorKind::IoError, path.string() + ": only 16-bit PCM is supported");
      require(channels == 1, ErrorKind::IoError, path.string() + ": only mono audio is supported");
      have_fmt = true;
    } else if (chunk == "data") {
      require(have_fmt, ErrorKind::IoError, path.string() + ": data chunk before fmt chunk");
      w.samples.resize(size / 2);
      for (auto& s : w.samples) s = r.get<std::int16_t>() / 32768.0;
      if (size % 2) r.get<char>();
    } else {
      for (std::uint32_t i = 0; i < size + (size % 2); ++i) r.get<char>();
    }
  }
  require(have_fmt, ErrorKind::IoError, path.string() + ": missing fmt chunk");
  return w;
}

}  // namespace unitflow::dsp
