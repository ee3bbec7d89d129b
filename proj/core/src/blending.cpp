#include "maskmatch/blending.hpp"

#include <cmath>
#include <string>

namespace maskmatch {

UnwrappedMask unwrap(const BinaryGrid& mask, std::size_t spatial_h, std::size_t spatial_w,
                     int delta) {
  if (spatial_h == 0 || spatial_w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "unwrap target must be nonzero");
  }
  if (delta != 0 && delta != 1) {
    throw Error(ErrorCode::kInvalidArgument, "delta must be 0 or 1");
  }
  const std::size_t frames = mask.frames();
  const std::size_t cells = spatial_h * spatial_w;
  UnwrappedMask out{Tensor({cells, frames}), spatial_h, spatial_w};
  if (delta == 1) return out;

  const Tensor full = mask.to_tensor();
  const std::size_t plane = mask.height() * mask.width();
  for (std::size_t f = 0; f < frames; ++f) {
    Tensor frame({mask.height(), mask.width()});
    std::copy(full.data().begin() + f * plane, full.data().begin() + (f + 1) * plane,
              frame.data().begin());
    const Tensor small = resize_bilinear(frame, spatial_h, spatial_w);
    for (std::size_t s = 0; s < cells; ++s) out.m[s * frames + f] = small[s] >= 0.5f ? 1.0f : 0.0f;
  }
  return out;
}

TempAttentionState blend_temp(const TempAttentionState& src, const TempAttentionState& edit,
                              const UnwrappedMask& m) {
  const auto& kd = src.keys.dims();
  if (kd.size() != 3 || src.queries.dims() != kd || edit.keys.dims() != kd ||
      edit.queries.dims() != kd) {
    throw Error(ErrorCode::kShapeMismatch, "blend_temp: K/Q must all be (h'w', F, dim)");
  }
  if (kd[0] != m.cells() || kd[1] != m.frames()) {
    throw Error(ErrorCode::kShapeMismatch, "blend_temp: mask does not match (h'w', F)");
  }
  const Tensor mask = m.m.reshaped({kd[0], kd[1], 1});
  return {masked_select(src.keys, edit.keys, mask),
          masked_select(src.queries, edit.queries, mask)};
}

namespace {

// (h'w', F) -> (F, h'w', 1)
Tensor frame_major(const UnwrappedMask& m) {
  const std::size_t cells = m.cells();
  const std::size_t frames = m.frames();
  Tensor out({frames, cells, 1});
  for (std::size_t s = 0; s < cells; ++s) {
    for (std::size_t f = 0; f < frames; ++f) out[f * cells + s] = m.m[s * frames + f];
  }
  return out;
}

}  // namespace

CrossAttentionMap blend_cross(const CrossAttentionMap& src, const CrossAttentionMap& edit,
                              const UnwrappedMask& m) {
  if (src.tensor.dims() != edit.tensor.dims() || src.tensor.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "blend_cross: attention geometry differs");
  }
  if (src.tensor.dims()[0] != m.frames() || src.tensor.dims()[1] != m.cells()) {
    throw Error(ErrorCode::kShapeMismatch, "blend_cross: mask does not match (F, h'w')");
  }
  CrossAttentionMap out = src;
  out.tensor = masked_select(src.tensor, edit.tensor, frame_major(m));
  return out;
}

const char* to_string(EditTask task) {
  switch (task) {
    case EditTask::kStylization: return "stylization";
    case EditTask::kAttribute: return "attribute";
    case EditTask::kShape: return "shape";
  }
  return "attribute";
}

EditTask parse_edit_task(std::string_view name) {
  if (name == "stylization") return EditTask::kStylization;
  if (name == "attribute") return EditTask::kAttribute;
  if (name == "shape") return EditTask::kShape;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + std::string(name) + "'");
}

Tensor blend_self(const Tensor& src, const Tensor& edit, const UnwrappedMask& m,
                  EditTask task, SelfAttentionAxis axis) {
  if (src.dims() != edit.dims() || src.rank() != 3 || src.dims()[1] != src.dims()[2]) {
    throw Error(ErrorCode::kShapeMismatch, "blend_self: maps must be matching (F, S, S)");
  }
  if (src.dims()[0] != m.frames() || src.dims()[1] != m.cells()) {
    throw Error(ErrorCode::kShapeMismatch, "blend_self: mask does not match (F, h'w')");
  }
  Tensor mask = frame_major(m);
  if (axis == SelfAttentionAxis::kBoth) {
    const std::size_t frames = m.frames();
    const std::size_t cells = m.cells();
    Tensor pair({frames, cells, cells});
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t q = 0; q < cells; ++q) {
        for (std::size_t k = 0; k < cells; ++k) {
          pair[(f * cells + q) * cells + k] = mask[f * cells + q] * mask[f * cells + k];
        }
      }
    }
    mask = std::move(pair);
  }
  if (task == EditTask::kStylization) return masked_select(edit, src, mask);
  return masked_select(src, edit, mask);
}

Tensor blend_latent(const Tensor& src, const Tensor& edit, const BinaryGrid& mask,
                    std::size_t step, std::size_t cutoff) {
  if (src.dims() != edit.dims() || src.rank() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "blend_latent: latents must be matching (F, d, h, w)");
  }
  if (mask.frames() != src.dims()[0] || mask.height() != src.dims()[2] ||
      mask.width() != src.dims()[3]) {
    throw Error(ErrorCode::kShapeMismatch, "blend_latent: mask does not match (F, h, w)");
  }
  if (step >= cutoff) return edit;
  const Tensor m = mask.to_tensor().reshaped({mask.frames(), 1, mask.height(), mask.width()});
  return masked_select(src, edit, m);
}

double BlendSchedule::alpha(BlendKind kind) const {
  switch (kind) {
    case BlendKind::kSelf: return alpha_s;
    case BlendKind::kCross: return alpha_c;
    case BlendKind::kTemp: return alpha_t;
  }
  return 0.0;
}

std::size_t blend_step_count(const BlendSchedule& schedule, BlendKind kind) {
  const double a = schedule.alpha(kind);
  if (!(a >= 0.0 && a <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "blend fraction alpha must lie in [0, 1]");
  }
  // Products like 0.3 * 10 land a hair above the integer in binary.
  const double span = a * static_cast<double>(schedule.steps);
  return static_cast<std::size_t>(std::ceil(span - 1e-9));
}

bool blend_active(const BlendSchedule& schedule, BlendKind kind, std::size_t step) {
  return step < blend_step_count(schedule, kind);
}

}  // namespace maskmatch
