#pragma once

#include "unitflow/core/binary_io.hpp"
#include "unitflow/units/types.hpp"

#include <filesystem>
#include <sstream>
#include <string>

namespace unitflow::units {

inline constexpr std::string_view kFeatureMagic = "UFFEA1";
inline constexpr std::string_view kCodebookMagic = "UFCBK1";

inline void save_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  io::ByteWriter w;
  w.magic(kFeatureMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.rows.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.rows.cols()));
  w.put_array(f.rows.data(), static_cast<std::size_t>(f.rows.size()));
  io::write_file_atomic(path, w.bytes());
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(kFeatureMagic);
  const auto t = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  FeatureMatrix f;
  f.rows.resize(t, d);
  r.get_array(f.rows.data(), static_cast<std::size_t>(t) * d);
  return f;
}

inline void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
  io::ByteWriter w;
  w.magic(kCodebookMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.k()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.feature_dim()));
  w.put_array(cb.centroids.data(), static_cast<std::size_t>(cb.centroids.size()));
  w.put<std::uint64_t>(cb.seed);
  io::write_file_atomic(path, w.bytes());
}

inline Codebook load_codebook(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(kCodebookMagic);
  const auto k = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  Codebook cb;
  cb.centroids.resize(k, d);
  r.get_array(cb.centroids.data(), static_cast<std::size_t>(k) * d);
  cb.seed = r.get<std::uint64_t>();
  return cb;
}

inline std::string format_units(const UnitSequence& u, int k) {
  std::ostringstream out;
  out << "#collapsed=" << (u.collapsed ? "true" : "false") << " k=" << k << "\n";
  for (int id : u.ids) out << id << "\n";
  return out.str();
}

inline void save_units(const std::filesystem::path& path, const UnitSequence& u, int k) {
  io::write_file_atomic(path, format_units(u, k));
}

struct UnitFile {
  UnitSequence units;
  int k = 0;
};

inline UnitFile parse_units(const std::string& text, const std::string& origin = "<units>") {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  UnitFile f;
  if (header.rfind("#collapsed=true", 0) == 0) {
    f.units.collapsed = true;
  } else if (header.rfind("#collapsed=false", 0) != 0) {
    throw Error(ErrorKind::IoError, origin + ": missing '#collapsed=' header");
  }
  const auto kpos = header.find("k=");
  require(kpos != std::string::npos, ErrorKind::IoError, origin + ": missing k= in header");
  f.k = std::stoi(header.substr(kpos + 2));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const int id = std::stoi(line);
    require(id >= 0 && id < f.k, ErrorKind::IoError, origin + ": unit id out of range");
    f.units.ids.push_back(id);
  }
  return f;
}

inline UnitFile load_units(const std::filesystem::path& path) {
  return parse_units(io::read_file(path), path.string());
}

}  // namespace unitflow::units
