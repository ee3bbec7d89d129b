#include "maskmatch/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace maskmatch {

namespace fs = std::filesystem;

Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw Error(ErrorCode::kIo, "cannot read png " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out;
  out.width = img.width;
  out.height = img.height;
  out.channels = 3;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::kIo, "cannot decode png " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const fs::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "write_png supports 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw Error(ErrorCode::kShapeMismatch, "write_png: pixel buffer size mismatch");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0,
                               nullptr)) {
    throw Error(ErrorCode::kIo, "cannot write png " + path.string() + ": " + img.message);
  }
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kNotFound, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Tensor load_video(const fs::path& dir, std::size_t frames, std::size_t height,
                  std::size_t width) {
  const auto files = list_pngs(dir);
  if (files.size() < frames) {
    throw Error(ErrorCode::kInvalidArgument,
                dir.string() + " holds " + std::to_string(files.size()) +
                    " frames, need " + std::to_string(frames));
  }
  Tensor video({frames, 3, height, width});
  const std::size_t plane = height * width;
  for (std::size_t f = 0; f < frames; ++f) {
    const Image img = read_png(files[f]);
    for (std::size_t c = 0; c < 3; ++c) {
      Tensor channel({img.height, img.width});
      for (std::size_t i = 0; i < img.width * img.height; ++i) {
        channel[i] = static_cast<float>(img.pixels[i * 3 + c]) / 255.0f;
      }
      const Tensor resized = (img.height == height && img.width == width)
                                 ? channel
                                 : resize_bilinear(channel, height, width);
      std::copy(resized.data().begin(), resized.data().end(),
                video.data().begin() + (f * 3 + c) * plane);
    }
  }
  return video;
}

void write_video(const fs::path& dir, const Tensor& video) {
  if (video.rank() != 4 || video.dims()[1] != 3) {
    throw Error(ErrorCode::kInvalidArgument, "write_video expects (F, 3, H, W)");
  }
  const std::size_t frames = video.dims()[0];
  const std::size_t h = video.dims()[2];
  const std::size_t w = video.dims()[3];
  fs::create_directories(dir);
  for (std::size_t f = 0; f < frames; ++f) {
    Image img{w, h, 3, std::vector<std::uint8_t>(w * h * 3)};
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < w * h; ++i) {
        const float v = std::clamp(video[(f * 3 + c) * w * h + i], 0.0f, 1.0f);
        img.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.png", f);
    write_png(dir / name, img);
  }
}

void write_mask_png(const fs::path& path, const BinaryGrid& grid, std::size_t frame) {
  Image img{grid.width(), grid.height(), 1,
            std::vector<std::uint8_t>(grid.width() * grid.height())};
  for (std::size_t y = 0; y < grid.height(); ++y) {
    for (std::size_t x = 0; x < grid.width(); ++x) {
      img.pixels[y * grid.width() + x] = grid.at(frame, y, x) ? 255 : 0;
    }
  }
  write_png(path, img);
}

}  // namespace maskmatch
