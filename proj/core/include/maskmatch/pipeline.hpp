#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "maskmatch/blending.hpp"
#include "maskmatch/diffusion.hpp"
#include "maskmatch/mask_extraction.hpp"
#include "maskmatch/mmc.hpp"
#include "maskmatch/toy_model.hpp"

namespace maskmatch {

struct LayerFeatures {
  CrossAttentionMap cross;
  Tensor self_attention;
  TempAttentionState temp;
};

// Features recorded at inversion step k (z_k -> z_{k+1}).
struct StepFeatures {
  std::vector<LayerFeatures> layers;
  Tensor eps;
  Tensor latent;  // z_k
};

struct FeatureCache {
  std::vector<StepFeatures> steps;

  bool complete(std::size_t steps_expected, std::size_t layers_expected) const;
  std::vector<CrossAttentionMap> cross_attention_maps() const;
};

struct InversionResult {
  Tensor z0;
  Tensor z_final;  // z_T
  FeatureCache cache;
};

// DDIM inversion under `prompt` with guidance scale 1, caching every
// attention feature and noise prediction.
InversionResult invert(const ToyDenoiser& net, const Tensor& video, std::string_view prompt,
                       const Schedule& schedule);

// Writes dumps/t{t}_l{l}.attn plus manifest.json for every cached cross map.
VideoManifest write_cross_attention_dumps(const InversionResult& inversion,
                                          const ToyDenoiser& net, std::string_view prompt,
                                          const std::filesystem::path& dir);

// Denoises z_T with the cached noise predictions instead of the network.
Tensor replay(const Tensor& z_final, const FeatureCache& cache, const Schedule& schedule);

// Plain DDIM sampling from z_T. With `baseline` the guidance reference is the
// cached source prediction, otherwise the empty-prompt prediction. Scale 1
// skips the reference pass.
Tensor sample(const ToyDenoiser& net, const Tensor& z_final, std::string_view prompt,
              const Schedule& schedule, double guidance, const FeatureCache* baseline = nullptr);

struct EditConfig {
  std::size_t steps = 50;
  float tau = 0.3f;
  double guidance = 7.5;
  double alpha_s = 0.99;
  double alpha_c = 0.99;
  double alpha_t = 0.99;
  EditTask task = EditTask::kAttribute;
  std::size_t latent_cutoff = 0;
  SelfAttentionAxis sa_axis = SelfAttentionAxis::kQuery;
  bool normalize_before_threshold = true;

  BlendSchedule blend_schedule() const { return {alpha_s, alpha_c, alpha_t, steps}; }
};

struct EditRequest {
  Tensor video;  // (F, 3, H, W), unit range
  std::string source_prompt;
  std::string edit_prompt;
  std::string source_word;  // object word in the source prompt
  std::string edit_word;    // object word in the edit prompt
};

struct EditResult {
  Tensor video;
  Tensor latent;
  SelectedMasks masks;
  int delta = 0;
  InversionResult inversion;
};

// Inversion, candidate extraction, semantic-adaptive selection, then masked
// dual-branch denoising against the cached source features. Throws
// kMissingPrerequisite when `profile` is null.
EditResult edit(const ToyDenoiser& net, const EditRequest& request, const EditConfig& config,
                const MmcProfile* profile);

// IoU matrix of every (t, l) candidate of one video against its annotation.
IouMatrix profile_video(const ToyDenoiser& net, const Tensor& video, std::string_view prompt,
                        std::string_view object_word, const BinaryGrid& reference,
                        const Schedule& schedule, const ExtractionOptions& options);

}  // namespace maskmatch
