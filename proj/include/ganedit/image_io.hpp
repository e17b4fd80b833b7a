// PNG input/output and the raw (HWC, [0, 255]) image record used before
// preprocessing.
#pragma once

#include "ganedit/core.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ganedit {

/// Decoded 8-bit image as doubles in [0, 255], row-major height x width x 3.
struct RawImage {
  int height = 0;
  int width = 0;
  Vec data;

  double at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
};

RawImage read_png(const std::filesystem::path& path);

/// Canonical image -> 8-bit RGB PNG. Values map [-1, 1] onto [0, 255] with
/// round-half-to-even and clamping.
void write_png(const std::filesystem::path& path, const ImageTensor& image);

/// Reads an n x n PNG and converts to the canonical range.
ImageTensor read_canonical_png(const std::filesystem::path& path);

/// Raw RGB8 buffer writer used by the plot renderer.
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb);

}  // namespace ganedit
