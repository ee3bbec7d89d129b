#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "maskmatch/attention_io.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Head-averaged cross-attention of one layer at one timestep:
// tensor (F, h' * w', S').
struct CrossAttentionMap {
  Tensor tensor;
  std::size_t layer = 0;
  std::size_t timestep = 0;
  std::size_t spatial_h = 0;
  std::size_t spatial_w = 0;

  std::size_t frames() const { return tensor.dims()[0]; }
  std::size_t tokens() const { return tensor.dims()[2]; }
};

// Throws unless the tensor is (F, h'w', S') and every row sums to 1 within
// `tolerance`.
void validate_cross_attention(const CrossAttentionMap& map, double tolerance = 1e-4);

struct MaskCandidate {
  BinaryGrid grid;
  std::size_t layer = 0;
  std::size_t timestep = 0;
};

// Complete T x L family of candidates.
class MaskSet {
 public:
  MaskSet(std::size_t steps, std::size_t layers, std::vector<MaskCandidate> candidates);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t layers() const noexcept { return layers_; }
  const MaskCandidate& at(std::size_t t, std::size_t l) const;
  std::span<const MaskCandidate> candidates() const noexcept { return candidates_; }

 private:
  std::size_t steps_;
  std::size_t layers_;
  std::vector<MaskCandidate> candidates_;  // t-major
};

struct ExtractionOptions {
  float tau = 0.3f;
  std::size_t height = 64;
  std::size_t width = 64;
  bool normalize_before_threshold = true;
};

// Mean of the aligned token columns, reshaped to (F, h', w').
Tensor extract_token_map(const CrossAttentionMap& map, const TokenAlignment& align);

// extract -> per-frame min-max -> bilinear resize -> threshold.
MaskCandidate candidate_from_map(const CrossAttentionMap& map, const TokenAlignment& align,
                                 const ExtractionOptions& options);

MaskSet build_mask_set(std::span<const CrossAttentionMap> maps, std::size_t steps,
                       std::size_t layers, const TokenAlignment& align,
                       const ExtractionOptions& options);

// Reads every dump listed in `dir`/manifest.json.
MaskSet build_mask_set(const std::filesystem::path& dir, const TokenAlignment& align,
                       const ExtractionOptions& options);

// Debug output: out_dir/t{t}_l{l}_f{f}.png, white = 1.
void write_mask_set_pngs(const MaskSet& set, const std::filesystem::path& out_dir);

}  // namespace maskmatch
