#include "stvo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stvo/error.hpp"

namespace stvo {

namespace fs = std::filesystem;

namespace {

struct IndexEntry {
  double timestamp;
  fs::path path;
};

std::vector<IndexEntry> read_index(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw Error(ErrorCode::kMalformedIndex, "cannot read " + file.string());
  std::vector<IndexEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    IndexEntry e;
    std::string name;
    if (!(ss >> e.timestamp >> name) || !std::isfinite(e.timestamp)) {
      throw Error(ErrorCode::kMalformedIndex,
                  file.string() + ":" + std::to_string(line_no) + ": expected 'timestamp path'");
    }
    e.path = file.parent_path() / name;
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const IndexEntry& a, const IndexEntry& b) { return a.timestamp < b.timestamp; });
  return out;
}

std::optional<double> numeric_stem(const fs::path& p) {
  const std::string s = p.stem().string();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

void attach_depths(std::vector<SequenceFrame>& frames, const std::vector<IndexEntry>& depths,
                   double max_dt) {
  for (SequenceFrame& f : frames) {
    auto it = std::lower_bound(depths.begin(), depths.end(), f.timestamp,
                               [](const IndexEntry& e, double t) { return e.timestamp < t; });
    const IndexEntry* best = nullptr;
    double best_dt = max_dt;
    for (auto c : {it, it == depths.begin() ? depths.end() : it - 1}) {
      if (c == depths.end()) continue;
      const double dt = std::abs(c->timestamp - f.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &*c;
      }
    }
    if (best) f.depth = best->path;
  }
}

Sequence load_tum(const fs::path& dir, double max_dt) {
  Sequence seq;
  seq.root = dir;
  for (const IndexEntry& e : read_index(dir / "rgb.txt")) {
    if (!fs::exists(e.path)) throw Error(ErrorCode::kMissingImage, e.path.string());
    seq.frames.push_back({e.timestamp, e.path, std::nullopt});
  }
  if (fs::exists(dir / "depth.txt")) attach_depths(seq.frames, read_index(dir / "depth.txt"), max_dt);
  if (fs::exists(dir / "calibration.txt")) seq.calibration = read_calibration(dir / "calibration.txt");
  if (fs::exists(dir / "groundtruth.txt")) seq.groundtruth = dir / "groundtruth.txt";
  return seq;
}

Sequence load_image_dir(const fs::path& dir) {
  const fs::path images = fs::is_directory(dir / "images") ? dir / "images" : dir;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::kMissingImage, "no PNG images in " + images.string());
  std::sort(files.begin(), files.end());
  const bool numeric = std::all_of(files.begin(), files.end(),
                                   [](const fs::path& p) { return numeric_stem(p).has_value(); });
  Sequence seq;
  seq.root = dir;
  for (std::size_t k = 0; k < files.size(); ++k) {
    SequenceFrame f;
    f.timestamp = numeric ? *numeric_stem(files[k]) : 0.1 * static_cast<double>(k);
    f.image = files[k];
    const fs::path d = dir / "depth" / (files[k].stem().string() + ".dpr");
    if (fs::exists(d)) f.depth = d;
    seq.frames.push_back(std::move(f));
  }
  std::stable_sort(seq.frames.begin(), seq.frames.end(),
                   [](const SequenceFrame& a, const SequenceFrame& b) { return a.timestamp < b.timestamp; });
  if (fs::exists(dir / "calibration.txt")) seq.calibration = read_calibration(dir / "calibration.txt");
  if (fs::exists(dir / "groundtruth.txt")) seq.groundtruth = dir / "groundtruth.txt";
  return seq;
}

}  // namespace

Intrinsics read_calibration(const fs::path& path) {
  std::ifstream is(path);
  Intrinsics k;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy) || !(k.fx > 0.0) || !(k.fy > 0.0)) {
      throw Error(ErrorCode::kMalformedIndex, path.string() + ": expected 'fx fy cx cy'");
    }
    return k;
  }
  throw Error(ErrorCode::kMalformedIndex, path.string() + ": no intrinsics line");
}

Sequence load_sequence(const fs::path& dir, const std::string& format, double max_dt) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kMalformedIndex, "not a directory: " + dir.string());
  }
  const bool tum = format == "tum-rgbd" || (format == "auto" && fs::exists(dir / "rgb.txt"));
  if (format != "auto" && format != "tum-rgbd" && format != "image-dir") {
    throw Error(ErrorCode::kInvalidArgument, "unknown sequence format '" + format + "'");
  }
  return tum ? load_tum(dir, max_dt) : load_image_dir(dir);
}

}  // namespace stvo
