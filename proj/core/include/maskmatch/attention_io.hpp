#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Attention dump layout (all integers little-endian):
//   "ATTN" | u32 version (=1) | u8 dtype (0 = f32) | u8 ndim | ndim x u64 dims
//   | row-major f32 payload
inline constexpr std::array<char, 4> kDumpMagic{'A', 'T', 'T', 'N'};
inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr std::uint8_t kDumpDtypeF32 = 0;

std::size_t dump_header_size(std::size_t ndim);

std::vector<std::uint8_t> encode_dump(const Tensor& tensor);
Tensor decode_dump(std::span<const std::uint8_t> bytes);

// One cross-attention dump: tensor (frames, spatial_h * spatial_w, token_count).
struct DumpManifest {
  std::string model_id;
  std::size_t layer_index = 0;
  std::size_t timestep_index = 0;
  std::size_t spatial_h = 0;
  std::size_t spatial_w = 0;
  std::size_t frames = 0;
  std::size_t token_count = 0;
  std::vector<std::string> token_strings;
  std::string file;

  bool operator==(const DumpManifest&) const = default;
};

// Throws kShapeMismatch when the tensor disagrees with the manifest entry.
void check_dump_consistent(const Tensor& tensor, const DumpManifest& entry);

void write_dump(const std::filesystem::path& path, const Tensor& tensor);
void write_dump(const std::filesystem::path& path, const Tensor& tensor,
                const DumpManifest& entry);
Tensor read_dump(const std::filesystem::path& path);

// Sidecar manifest.json describing every dump of one video.
struct VideoManifest {
  std::string model_id;
  std::size_t steps = 0;
  std::size_t layers = 0;
  std::vector<DumpManifest> entries;

  bool operator==(const VideoManifest&) const = default;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

void save_manifest(const std::filesystem::path& dir, const VideoManifest& manifest);
VideoManifest load_manifest(const std::filesystem::path& dir);

// Schema, geometry, completeness and payload checks over a dump directory.
// Empty result means the directory is valid. `row_sum_tolerance` bounds
// |row sum - 1| for every attention row.
std::vector<std::string> validate_manifest(const std::filesystem::path& dir,
                                           double row_sum_tolerance = 1e-2);

// Single-instance annotations: F PNG frames, any nonzero pixel is foreground.
BinaryGrid load_reference_masks(const std::filesystem::path& dir, std::size_t frames);

using Tokenization = std::vector<std::pair<std::string, std::size_t>>;

struct TokenAlignment {
  std::string word;
  std::vector<std::size_t> token_indices;
};

// Lower-cased, whitespace-trimmed copy.
std::string fold_word(std::string_view word);

// Indices of every token covering the first occurrence of `word` in `prompt`.
// Tokens are matched against the prompt text in order; tokens that do not
// match (start/pad markers) cover nothing.
TokenAlignment align_token(std::string_view prompt, std::string_view word,
                           const Tokenization& tokens);

}  // namespace maskmatch
