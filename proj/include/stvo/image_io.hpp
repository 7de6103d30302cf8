#pragma once

#include <filesystem>

#include "stvo/tensor.hpp"

namespace stvo {

// 8- or 16-bit grayscale / RGB(A) / palette PNG -> [1,H,W] or [3,H,W] with
// values in [0,1]. Alpha is dropped. Throws MissingImage / MalformedFile.
DenseArray read_png(const std::filesystem::path& path);

// [1,H,W] or [3,H,W] in [0,1] -> 8-bit PNG (values clamped, rounded).
void write_png(const std::filesystem::path& path, const DenseArray& image);

}  // namespace stvo
