#pragma once

#include "unitflow/core/binary_io.hpp"
#include "unitflow/dsp/io.hpp"

#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace unitflow::benchkit {

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
 public:
  Canvas(int width, int height, Rgb bg = {255, 255, 255})
      : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height * 3) {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) set(x, y, bg);
  }

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::max(0, y0); y < std::min(h_, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) set(x, y, c);
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double a = static_cast<double>(i) / steps;
      const int x = static_cast<int>(std::lround(x0 + a * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + a * (y1 - y0)));
      for (int dy = 0; dy < thickness; ++dy)
        for (int dx = 0; dx < thickness; ++dx) set(x + dx, y + dy, c);
    }
  }

  void save_png(const std::filesystem::path& path) const {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    FILE* fp = std::fopen(tmp.c_str(), "wb");
    if (!fp) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw Error(ErrorKind::IoError, "libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y)
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y) * w_ * 3]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoError, "rename failed for " + path.string());
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

inline const std::vector<Rgb>& palette() {
  static const std::vector<Rgb> p = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}};
  return p;
}

/// Perceptually ordered dark-blue -> yellow ramp for heatmaps.
inline Rgb heat(double v) {
  v = std::clamp(v, 0.0, 1.0);
  static const std::array<Rgb, 5> stops = {Rgb{68, 1, 84}, Rgb{59, 82, 139}, Rgb{33, 145, 140}, Rgb{94, 201, 98},
                                           Rgb{253, 231, 37}};
  const double pos = v * (stops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double a = pos - static_cast<double>(i);
  Rgb out;
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround((1 - a) * stops[i][c] + a * stops[i + 1][c]));
  return out;
}

struct Series {
  std::vector<double> x, y;
};

/// Reads the `step,loss,...` columns of a metrics CSV.
inline Series read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("step,loss", 0) != 0) throw Error(ErrorKind::IoError, path.string() + ": not a metrics CSV");
  Series s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string step, loss;
    std::getline(ls, step, ',');
    std::getline(ls, loss, ',');
    s.x.push_back(std::stod(step));
    s.y.push_back(std::stod(loss));
  }
  return s;
}

inline Series ema(const Series& s, double alpha = 0.02) {
  Series out = s;
  for (std::size_t i = 1; i < out.y.size(); ++i) out.y[i] = (1 - alpha) * out.y[i - 1] + alpha * s.y[i];
  return out;
}

/// Line plot on a log-scaled y axis; raw series are drawn light, smoothed dark.
inline Canvas plot_curves(const std::vector<Series>& series, int width = 800, int height = 480) {
  Canvas c(width, height);
  const int l = 50, r = width - 20, t = 20, b = height - 40;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  if (xmin >= xmax) xmax = xmin + 1;
  if (ymin >= ymax) ymax = ymin + 1;
  const Rgb grid{225, 225, 225}, axis{60, 60, 60};
  for (double d = std::floor(ymin); d <= std::ceil(ymax); d += 1.0) {
    const double y = b - (d - ymin) / (ymax - ymin) * (b - t);
    if (y >= t && y <= b) c.line(l, y, r, y, grid);
  }
  c.line(l, b, r, b, axis);
  c.line(l, t, l, b, axis);
  auto px = [&](double x) { return l + (x - xmin) / (xmax - xmin) * (r - l); };
  auto py = [&](double y) { return b - (std::log10(y) - ymin) / (ymax - ymin) * (b - t); };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Rgb col = palette()[k % palette().size()];
    const Rgb light{static_cast<std::uint8_t>((col[0] + 2 * 255) / 3), static_cast<std::uint8_t>((col[1] + 2 * 255) / 3),
                    static_cast<std::uint8_t>((col[2] + 2 * 255) / 3)};
    for (int pass = 0; pass < 2; ++pass) {
      const Series s = pass == 0 ? series[k] : ema(series[k]);
      for (std::size_t i = 1; i < s.x.size(); ++i)
        if (s.y[i - 1] > 0 && s.y[i] > 0)
          c.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), pass == 0 ? light : col, pass + 1);
    }
  }
  return c;
}

/// Mels stacked top to bottom, low frequencies at the bottom of each panel,
/// on one shared colour range.
inline Canvas plot_heatmaps(const std::vector<MatF>& mels, int scale = 3) {
  int width = 0, height = 0;
  float lo = 1e30f, hi = -1e30f;
  for (const auto& m : mels) {
    width = std::max(width, static_cast<int>(m.rows()) * scale);
    height += static_cast<int>(m.cols()) * scale + 4;
    lo = std::min(lo, m.minCoeff());
    hi = std::max(hi, m.maxCoeff());
  }
  lo = std::max(lo, hi - 12.0f);
  Canvas c(std::max(width, 1), std::max(height, 1));
  int y0 = 0;
  for (const auto& m : mels) {
    const int rows = static_cast<int>(m.cols());
    for (Eigen::Index f = 0; f < m.rows(); ++f)
      for (int ch = 0; ch < rows; ++ch) {
        const Rgb col = heat((m(f, ch) - lo) / (hi - lo + 1e-9f));
        c.fill_rect(static_cast<int>(f) * scale, y0 + (rows - 1 - ch) * scale, static_cast<int>(f + 1) * scale,
                    y0 + (rows - ch) * scale, col);
      }
    y0 += rows * scale + 4;
  }
  return c;
}

/// Renders every plot derivable from a run directory:
///   loss_<path>.png     one per metrics.csv (path = its directory relative to run_dir, '/' -> '_')
///   compare_<name>.png  overlay of all logs whose directory shares the name <name>, when there are two or more
///   mel_<id>.png        degraded / generated / clean heatmaps for each saved example under an eval directory
///   plots.json          the list of files written, with the series behind each overlay
inline std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir,
                                                     std::filesystem::path out_dir = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir)) throw Error(ErrorKind::IoError, run_dir.string() + " is not a directory");
  if (out_dir.empty()) out_dir = run_dir / "plots";
  std::vector<fs::path> csvs, examples;
  for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().filename() == "metrics.csv") csvs.push_back(e.path());
    const std::string name = e.path().filename().string();
    const std::string suffix = ".generated.ufmel";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      examples.push_back(e.path());
  }
  if (csvs.empty()) throw Error(ErrorKind::IoError, "no metrics.csv under " + run_dir.string());
  std::sort(csvs.begin(), csvs.end());
  std::sort(examples.begin(), examples.end());

  std::vector<fs::path> written;
  nlohmann::json manifest = {{"files", nlohmann::json::array()}, {"overlays", nlohmann::json::object()}};
  std::map<std::string, std::vector<std::pair<std::string, Series>>> groups;
  for (const auto& csv : csvs) {
    std::string rel = fs::relative(csv.parent_path(), run_dir).generic_string();
    if (rel == ".") rel = "run";
    std::string tag = rel;
    std::replace(tag.begin(), tag.end(), '/', '_');
    const Series s = read_loss_csv(csv);
    const auto out = out_dir / ("loss_" + tag + ".png");
    plot_curves({s}).save_png(out);
    written.push_back(out);
    groups[csv.parent_path().filename().string()].emplace_back(rel, s);
  }
  for (const auto& [name, members] : groups) {
    if (members.size() < 2) continue;
    std::vector<Series> ss;
    auto& legend = manifest["overlays"][name] = nlohmann::json::array();
    for (std::size_t i = 0; i < members.size(); ++i) {
      ss.push_back(members[i].second);
      const Rgb col = palette()[i % palette().size()];
      legend.push_back({{"log", members[i].first}, {"rgb", {col[0], col[1], col[2]}}});
    }
    const auto out = out_dir / ("compare_" + name + ".png");
    plot_curves(ss).save_png(out);
    written.push_back(out);
  }
  for (const auto& gen : examples) {
    const std::string name = gen.filename().string();
    const std::string id = name.substr(0, name.size() - std::string(".generated.ufmel").size());
    const auto deg = gen.parent_path() / (id + ".degraded.ufmel");
    const auto clean = gen.parent_path() / (id + ".clean.ufmel");
    if (!fs::exists(deg) || !fs::exists(clean)) continue;
    std::string rel = fs::relative(gen.parent_path(), run_dir).generic_string();
    std::replace(rel.begin(), rel.end(), '/', '_');
    const auto out = out_dir / ("mel_" + rel + "_" + id + ".png");
    plot_heatmaps({dsp::load_mel(deg).frames, dsp::load_mel(gen).frames, dsp::load_mel(clean).frames})
        .save_png(out);
    written.push_back(out);
  }
  for (const auto& p : written) manifest["files"].push_back(fs::relative(p, out_dir).generic_string());
  io::write_file_atomic(out_dir / "plots.json", manifest.dump(2) + "\n");
  return written;
}

}  // namespace unitflow::benchkit
