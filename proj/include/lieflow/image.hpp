#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lieflow {

/// Row-major H x W x 3 float image, values nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // height * width * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  double& at(int row, int col, int ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  double at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
};

/// 8-bit RGB PNG, written with deterministic zlib settings. Values are
/// clamped to [0,1] and rounded.
void write_png(const std::string& path, const Image& img);

/// Reads 8-bit RGB or RGBA PNGs (alpha dropped). Throws IoFailure on
/// missing files or unsupported layouts.
Image read_png(const std::string& path);

}  // namespace lieflow
