#include "maskmatch/mask_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "maskmatch/image_io.hpp"

namespace maskmatch {

namespace fs = std::filesystem;

void validate_cross_attention(const CrossAttentionMap& map, double tolerance) {
  const auto& t = map.tensor;
  if (t.rank() != 3 || t.dims()[1] != map.spatial_h * map.spatial_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "cross-attention tensor must be (F, h'*w', S') matching its geometry");
  }
  const std::size_t cols = t.dims()[2];
  const std::size_t rows = t.size() / std::max<std::size_t>(cols, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += t[r * cols + c];
    if (std::abs(s - 1.0) > tolerance) {
      throw Error(ErrorCode::kInvariant, "cross-attention row " + std::to_string(r) +
                                             " is not stochastic");
    }
  }
}

MaskSet::MaskSet(std::size_t steps, std::size_t layers, std::vector<MaskCandidate> candidates)
    : steps_(steps), layers_(layers), candidates_(std::move(candidates)) {
  if (candidates_.size() != steps_ * layers_) {
    throw Error(ErrorCode::kInvariant, "mask set must hold one candidate per (t, l)");
  }
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t l = 0; l < layers_; ++l) {
      const auto& c = candidates_[t * layers_ + l];
      if (c.timestep != t || c.layer != l) {
        throw Error(ErrorCode::kInvariant, "mask set candidates out of (t, l) order");
      }
    }
  }
}

const MaskCandidate& MaskSet::at(std::size_t t, std::size_t l) const {
  if (t >= steps_ || l >= layers_) {
    throw Error(ErrorCode::kInvalidArgument, "mask set index out of range");
  }
  return candidates_[t * layers_ + l];
}

Tensor extract_token_map(const CrossAttentionMap& map, const TokenAlignment& align) {
  const auto& t = map.tensor;
  if (t.rank() != 3 || t.dims()[1] != map.spatial_h * map.spatial_w) {
    throw Error(ErrorCode::kShapeMismatch, "cross-attention tensor geometry mismatch");
  }
  const std::size_t frames = t.dims()[0];
  const std::size_t cells = t.dims()[1];
  const std::size_t tokens = t.dims()[2];
  if (align.token_indices.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "token alignment has no indices");
  }
  for (std::size_t idx : align.token_indices) {
    if (idx >= tokens) {
      throw Error(ErrorCode::kInvalidArgument,
                  "token index " + std::to_string(idx) + " out of range for S' = " +
                      std::to_string(tokens));
    }
  }
  Tensor out({frames, map.spatial_h, map.spatial_w});
  const double inv = 1.0 / static_cast<double>(align.token_indices.size());
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t s = 0; s < cells; ++s) {
      double acc = 0.0;
      for (std::size_t idx : align.token_indices) acc += t[(f * cells + s) * tokens + idx];
      out[f * cells + s] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

MaskCandidate candidate_from_map(const CrossAttentionMap& map, const TokenAlignment& align,
                                 const ExtractionOptions& options) {
  const Tensor token_map = extract_token_map(map, align);
  const std::size_t frames = token_map.dims()[0];
  const std::size_t h = token_map.dims()[1];
  const std::size_t w = token_map.dims()[2];
  const std::size_t plane = options.height * options.width;

  Tensor soft({frames, options.height, options.width});
  for (std::size_t f = 0; f < frames; ++f) {
    Tensor frame = take_leading(token_map, f);
    if (options.normalize_before_threshold) frame = minmax_normalize(frame);
    const Tensor resized = resize_bilinear(frame.reshaped({h, w}), options.height,
                                           options.width);
    std::copy(resized.data().begin(), resized.data().end(),
              soft.data().begin() + f * plane);
  }
  return {threshold_binarize(soft, options.tau), map.layer, map.timestep};
}

MaskSet build_mask_set(std::span<const CrossAttentionMap> maps, std::size_t steps,
                       std::size_t layers, const TokenAlignment& align,
                       const ExtractionOptions& options) {
  std::map<std::pair<std::size_t, std::size_t>, const CrossAttentionMap*> index;
  for (const auto& m : maps) index[{m.timestep, m.layer}] = &m;

  std::vector<std::string> missing;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < layers; ++l) {
      if (!index.count({t, l})) {
        missing.push_back("(" + std::to_string(t) + "," + std::to_string(l) + ")");
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "manifest incomplete, missing (t,l) pairs:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorCode::kNotFound, msg);
  }

  std::vector<MaskCandidate> candidates;
  candidates.reserve(steps * layers);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < layers; ++l) {
      candidates.push_back(candidate_from_map(*index.at({t, l}), align, options));
    }
  }
  return MaskSet(steps, layers, std::move(candidates));
}

MaskSet build_mask_set(const fs::path& dir, const TokenAlignment& align,
                       const ExtractionOptions& options) {
  const VideoManifest manifest = load_manifest(dir);
  std::vector<CrossAttentionMap> maps;
  maps.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    Tensor t = read_dump(dir / e.file);
    check_dump_consistent(t, e);
    maps.push_back({std::move(t), e.layer_index, e.timestep_index, e.spatial_h, e.spatial_w});
  }
  return build_mask_set(maps, manifest.steps, manifest.layers, align, options);
}

void write_mask_set_pngs(const MaskSet& set, const fs::path& out_dir) {
  for (const auto& c : set.candidates()) {
    for (std::size_t f = 0; f < c.grid.frames(); ++f) {
      const std::string name = "t" + std::to_string(c.timestep) + "_l" +
                               std::to_string(c.layer) + "_f" + std::to_string(f) + ".png";
      write_mask_png(out_dir / name, c.grid, f);
    }
  }
}

}  // namespace maskmatch
