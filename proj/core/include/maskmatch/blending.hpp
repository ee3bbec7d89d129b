#pragma once

#include <cstddef>

#include "maskmatch/mask_extraction.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Frame-resolution mask flattened to the temporal-attention batch layout:
// m is (h' * w', F) with values in {0, 1}.
struct UnwrappedMask {
  Tensor m;
  std::size_t spatial_h = 0;
  std::size_t spatial_w = 0;

  std::size_t cells() const { return m.dims()[0]; }
  std::size_t frames() const { return m.dims()[1]; }
};

// F((1 - delta) * M): delta = 1 yields zeros; otherwise each frame is
// bilinearly resampled to (h', w') and re-binarized at 0.5.
UnwrappedMask unwrap(const BinaryGrid& mask, std::size_t spatial_h, std::size_t spatial_w,
                     int delta);

// Temporal-attention keys and queries, (h' * w', F, dim) each.
struct TempAttentionState {
  Tensor keys;
  Tensor queries;
};

TempAttentionState blend_temp(const TempAttentionState& src, const TempAttentionState& edit,
                              const UnwrappedMask& m);

// Masked pre-blend of cross-attention maps; m is broadcast over all tokens.
CrossAttentionMap blend_cross(const CrossAttentionMap& src, const CrossAttentionMap& edit,
                              const UnwrappedMask& m);

enum class EditTask { kStylization, kAttribute, kShape };
enum class SelfAttentionAxis { kQuery, kBoth };

const char* to_string(EditTask task);
EditTask parse_edit_task(std::string_view name);

// Self-attention maps (F, h'w', h'w'). Attribute/shape edits take edited rows
// where m = 1; stylization swaps the roles so masked rows keep the source.
// Callers pass the un-zeroed unwrap for stylization.
Tensor blend_self(const Tensor& src, const Tensor& edit, const UnwrappedMask& m,
                  EditTask task, SelfAttentionAxis axis = SelfAttentionAxis::kQuery);

// Latents (F, d, h, w); mask (F, h, w). Masked fusion for steps below `cutoff`,
// pure edit afterwards.
Tensor blend_latent(const Tensor& src, const Tensor& edit, const BinaryGrid& mask,
                    std::size_t step, std::size_t cutoff);

enum class BlendKind { kSelf, kCross, kTemp };

struct BlendSchedule {
  double alpha_s = 0.99;
  double alpha_c = 0.99;
  double alpha_t = 0.99;
  std::size_t steps = 50;

  double alpha(BlendKind kind) const;
};

// Number of leading denoising steps with blending active: ceil(alpha * T).
std::size_t blend_step_count(const BlendSchedule& schedule, BlendKind kind);

bool blend_active(const BlendSchedule& schedule, BlendKind kind, std::size_t step);

}  // namespace maskmatch
