#include "maskmatch/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace maskmatch {

namespace {

struct Palette {
  const char* name;
  std::array<float, 3> rgb;
};

constexpr std::array<Palette, 4> kPalettes{{
    {"red", {0.9f, 0.15f, 0.1f}},
    {"blue", {0.1f, 0.2f, 0.9f}},
    {"green", {0.15f, 0.8f, 0.2f}},
    {"yellow", {0.95f, 0.85f, 0.1f}},
}};

}  // namespace

SyntheticScene moving_square(std::size_t frames, std::size_t height, std::size_t width,
                             std::uint32_t variant) {
  if (frames == 0 || height < 8 || width < 8) {
    throw Error(ErrorCode::kDegenerateShape, "moving_square: need F >= 1 and H, W >= 8");
  }
  const Palette& colour = kPalettes[variant % kPalettes.size()];
  const double side_frac = 0.3 + 0.05 * static_cast<double>(variant % 3);
  const std::size_t side = std::max<std::size_t>(
      2, static_cast<std::size_t>(side_frac * static_cast<double>(std::min(height, width))));
  const double phase = 0.1 * static_cast<double>(variant % 5);

  SyntheticScene scene;
  scene.video = Tensor({frames, 3, height, width});
  scene.mask = BinaryGrid(frames, height, width);
  scene.prompt = std::string("a ") + colour.name + " square on a gradient";
  scene.object = "square";

  const double travel_y = static_cast<double>(height - side);
  const double travel_x = static_cast<double>(width - side);
  for (std::size_t f = 0; f < frames; ++f) {
    // Path position in [0, 1); wrapping with the phase never repeats a frame.
    const double s = static_cast<double>(f) / static_cast<double>(frames);
    const double u = 0.15 + 0.7 * std::fmod(s + phase, 1.0);
    const auto y0 = static_cast<std::size_t>(std::lround(u * travel_y));
    const auto x0 = static_cast<std::size_t>(std::lround(u * travel_x));
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double gy = static_cast<double>(y) / static_cast<double>(height - 1);
        const double gx = static_cast<double>(x) / static_cast<double>(width - 1);
        std::array<float, 3> px{static_cast<float>(0.25 + 0.35 * gx),
                                static_cast<float>(0.3 + 0.3 * gy),
                                static_cast<float>(0.55 - 0.2 * gx * gy)};
        const bool inside = y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
        if (inside) px = colour.rgb;
        scene.mask.set(f, y, x, inside);
        for (std::size_t c = 0; c < 3; ++c) {
          scene.video[((f * 3 + c) * height + y) * width + x] = px[c];
        }
      }
    }
  }
  return scene;
}

}  // namespace maskmatch
