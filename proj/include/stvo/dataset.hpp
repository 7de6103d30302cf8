#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stvo/config.hpp"

namespace stvo {

struct SequenceFrame {
  double timestamp = 0.0;
  std::filesystem::path image;
  std::optional<std::filesystem::path> depth;  // DPR1
};

struct Sequence {
  std::filesystem::path root;
  std::vector<SequenceFrame> frames;  // ascending timestamp
  std::optional<Intrinsics> calibration;
  std::optional<std::filesystem::path> groundtruth;
};

// tum-rgbd: rgb.txt ("timestamp path" lines, '#' comments) plus optional
// depth.txt, calibration.txt ("fx fy cx cy") and groundtruth.txt.
// image-dir: every *.png directly under the directory (or under images/),
// timestamp from the numeric file stem or else 0.1 s per frame, depth from
// depth/<stem>.dpr when present. "auto" picks tum-rgbd when rgb.txt exists.
// Throws MalformedIndex, MissingImage.
Sequence load_sequence(const std::filesystem::path& dir, const std::string& format = "auto",
                       double max_dt = 0.02);

// Reads "fx fy cx cy" from a calibration file.
Intrinsics read_calibration(const std::filesystem::path& path);

}  // namespace stvo
