#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// 8-bit image, interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

// Any PNG flavour is decoded to 8-bit RGB.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// *.png files in `dir`, lexicographically ordered.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

// Loads the first `frames` PNGs of `dir` as an (F, 3, H, W) unit-range video,
// bilinearly resampled to height x width.
Tensor load_video(const std::filesystem::path& dir, std::size_t frames,
                  std::size_t height, std::size_t width);

// Writes an (F, 3, H, W) video as 00000.png, 00001.png, ... (values clamped).
void write_video(const std::filesystem::path& dir, const Tensor& video);

void write_mask_png(const std::filesystem::path& path, const BinaryGrid& grid,
                    std::size_t frame);

}  // namespace maskmatch
