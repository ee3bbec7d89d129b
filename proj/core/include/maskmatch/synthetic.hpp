#pragma once

#include <cstdint>
#include <string>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

struct SyntheticScene {
  Tensor video;         // (F, 3, H, W), unit range
  BinaryGrid mask;      // object footprint per frame
  std::string prompt;   // e.g. "a red square on a gradient"
  std::string object;   // object word inside `prompt`
};

// Deterministic "moving-square" clip: smooth gradient background with a
// coloured square sliding diagonally. `variant` shifts colour, size and path.
SyntheticScene moving_square(std::size_t frames, std::size_t height, std::size_t width,
                             std::uint32_t variant = 0);

}  // namespace maskmatch
