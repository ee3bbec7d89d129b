#include "maskmatch/pipeline.hpp"

#include <map>
#include <string>

namespace maskmatch {

namespace fs = std::filesystem;

bool FeatureCache::complete(std::size_t steps_expected, std::size_t layers_expected) const {
  if (steps.size() != steps_expected) return false;
  for (const auto& s : steps) {
    if (s.layers.size() != layers_expected || s.eps.empty() || s.latent.empty()) return false;
    for (const auto& l : s.layers) {
      if (l.cross.tensor.empty() || l.self_attention.empty() || l.temp.keys.empty() ||
          l.temp.queries.empty()) {
        return false;
      }
    }
  }
  return true;
}

std::vector<CrossAttentionMap> FeatureCache::cross_attention_maps() const {
  std::vector<CrossAttentionMap> maps;
  for (const auto& s : steps) {
    for (const auto& l : s.layers) maps.push_back(l.cross);
  }
  return maps;
}

namespace {

class CaptureController : public FeatureController {
 public:
  CaptureController(const ToyDenoiser& net, std::size_t timestep, StepFeatures& out)
      : net_(net), timestep_(timestep), out_(out) {
    out_.layers.resize(net.layer_count());
  }

  void cross(std::size_t layer, Tensor& attention) override {
    const std::size_t s = net_.layer_size(layer);
    out_.layers[layer].cross = {attention, layer, timestep_, s, s};
  }
  void self(std::size_t layer, Tensor& attention) override {
    out_.layers[layer].self_attention = attention;
  }
  void temp(std::size_t layer, Tensor& keys, Tensor& queries) override {
    out_.layers[layer].temp = {keys, queries};
  }

 private:
  const ToyDenoiser& net_;
  std::size_t timestep_;
  StepFeatures& out_;
};

// Masked fusion of the edit branch against one cached source step.
class BlendController : public FeatureController {
 public:
  BlendController(const StepFeatures& source, const BinaryGrid& mask, int delta,
                  const EditConfig& config, std::size_t step,
                  const std::vector<bool>& preserved_tokens)
      : source_(source),
        mask_(mask),
        delta_(delta),
        config_(config),
        preserved_(preserved_tokens) {
    const BlendSchedule schedule = config.blend_schedule();
    self_on_ = blend_active(schedule, BlendKind::kSelf, step);
    cross_on_ = blend_active(schedule, BlendKind::kCross, step);
    temp_on_ = blend_active(schedule, BlendKind::kTemp, step);
  }

  void cross(std::size_t layer, Tensor& attention) override {
    if (!cross_on_) return;
    const CrossAttentionMap& src = source_.layers[layer].cross;
    CrossAttentionMap edit = src;
    edit.tensor = attention;
    const auto& m = mask_for(src.spatial_h, delta_);
    Tensor fused = blend_cross(src, edit, m).tensor;
    // Downstream replacement: tokens shared by both prompts keep the source map.
    const std::size_t tokens = fused.dims()[2];
    for (std::size_t i = 0; i < fused.size(); ++i) {
      const std::size_t t = i % tokens;
      if (t < preserved_.size() && preserved_[t]) fused[i] = src.tensor[i];
    }
    attention = std::move(fused);
  }

  void self(std::size_t layer, Tensor& attention) override {
    if (!self_on_) return;
    const auto& src = source_.layers[layer];
    const int d = config_.task == EditTask::kStylization ? 0 : delta_;
    const auto& m = mask_for(src.cross.spatial_h, d);
    attention = blend_self(src.self_attention, attention, m, config_.task, config_.sa_axis);
  }

  void temp(std::size_t layer, Tensor& keys, Tensor& queries) override {
    if (!temp_on_) return;
    const auto& src = source_.layers[layer];
    const auto& m = mask_for(src.cross.spatial_h, delta_);
    auto fused = blend_temp(src.temp, {keys, queries}, m);
    keys = std::move(fused.keys);
    queries = std::move(fused.queries);
  }

 private:
  const UnwrappedMask& mask_for(std::size_t size, int delta) {
    auto key = std::make_pair(size, delta);
    auto it = masks_.find(key);
    if (it == masks_.end()) it = masks_.emplace(key, unwrap(mask_, size, size, delta)).first;
    return it->second;
  }

  const StepFeatures& source_;
  const BinaryGrid& mask_;
  int delta_;
  const EditConfig& config_;
  const std::vector<bool>& preserved_;
  bool self_on_ = false;
  bool cross_on_ = false;
  bool temp_on_ = false;
  std::map<std::pair<std::size_t, int>, UnwrappedMask> masks_;
};

}  // namespace

InversionResult invert(const ToyDenoiser& net, const Tensor& video, std::string_view prompt,
                       const Schedule& schedule) {
  InversionResult out;
  out.z0 = net.codec().encode(video);
  const TextEmbedding text = net.text_encoder().encode(prompt);
  Tensor z = out.z0;
  out.cache.steps.resize(schedule.steps);
  for (std::size_t k = 0; k < schedule.steps; ++k) {
    StepFeatures& step = out.cache.steps[k];
    CaptureController capture(net, k, step);
    step.latent = z;
    step.eps = net.predict(z, schedule.timesteps[k + 1], text, &capture);
    z = ddim_invert_step(z, step.eps, k, schedule);
  }
  out.z_final = std::move(z);
  return out;
}

VideoManifest write_cross_attention_dumps(const InversionResult& inversion,
                                          const ToyDenoiser& net, std::string_view prompt,
                                          const fs::path& dir) {
  const Tokenization tokens = toy_tokenize(prompt);
  std::vector<std::string> strings;
  for (const auto& [tok, idx] : tokens) strings.push_back(tok);

  VideoManifest manifest;
  manifest.model_id = net.model_id();
  manifest.steps = inversion.cache.steps.size();
  manifest.layers = net.layer_count();
  for (const auto& step : inversion.cache.steps) {
    for (const auto& layer : step.layers) {
      const auto& map = layer.cross;
      DumpManifest entry;
      entry.model_id = manifest.model_id;
      entry.layer_index = map.layer;
      entry.timestep_index = map.timestep;
      entry.spatial_h = map.spatial_h;
      entry.spatial_w = map.spatial_w;
      entry.frames = map.frames();
      entry.token_count = map.tokens();
      entry.token_strings = strings;
      entry.file = "t" + std::to_string(map.timestep) + "_l" + std::to_string(map.layer) + ".attn";
      write_dump(dir / entry.file, map.tensor, entry);
      manifest.entries.push_back(std::move(entry));
    }
  }
  save_manifest(dir, manifest);
  return manifest;
}

Tensor replay(const Tensor& z_final, const FeatureCache& cache, const Schedule& schedule) {
  if (cache.steps.size() != schedule.steps) {
    throw Error(ErrorCode::kInvalidArgument, "replay: cache length differs from schedule");
  }
  Tensor z = z_final;
  for (std::size_t k = schedule.steps; k >= 1; --k) z = ddim_step(z, cache.steps[k - 1].eps, k, schedule);
  return z;
}

Tensor sample(const ToyDenoiser& net, const Tensor& z_final, std::string_view prompt,
              const Schedule& schedule, double guidance, const FeatureCache* baseline) {
  const TextEmbedding text = net.text_encoder().encode(prompt);
  const TextEmbedding empty = net.text_encoder().encode("");
  Tensor z = z_final;
  for (std::size_t k = schedule.steps; k >= 1; --k) {
    Tensor eps = net.predict(z, schedule.timesteps[k], text);
    if (guidance != 1.0) {
      const Tensor reference = baseline ? baseline->steps.at(k - 1).eps
                                        : net.predict(z, schedule.timesteps[k], empty);
      eps = cfg(eps, reference, guidance);
    }
    z = ddim_step(z, eps, k, schedule);
  }
  return z;
}

EditResult edit(const ToyDenoiser& net, const EditRequest& request, const EditConfig& config,
                const MmcProfile* profile) {
  if (profile == nullptr) {
    throw Error(ErrorCode::kMissingPrerequisite, "no MMC profile: run mmc-profile first");
  }
  if (profile->steps() != config.steps || profile->layers() != net.layer_count()) {
    throw Error(ErrorCode::kInvalidArgument,
                "profile extents (T=" + std::to_string(profile->steps()) +
                    ", L=" + std::to_string(profile->layers()) + ") do not match the run (T=" +
                    std::to_string(config.steps) + ", L=" + std::to_string(net.layer_count()) + ")");
  }
  if (!profile->model_id.empty() && profile->model_id != net.model_id()) {
    throw Error(ErrorCode::kInvalidArgument,
                "profile was computed for " + profile->model_id + ", not " + net.model_id());
  }
  const Schedule schedule = make_linear_schedule(config.steps);
  const std::size_t frames = request.video.dims().at(0);
  const std::size_t height = request.video.dims().at(2);
  const std::size_t width = request.video.dims().at(3);

  EditResult result;
  result.inversion = invert(net, request.video, request.source_prompt, schedule);
  const FeatureCache& cache = result.inversion.cache;

  const Tokenization src_tokens = toy_tokenize(request.source_prompt);
  const TokenAlignment align = align_token(request.source_prompt, request.source_word, src_tokens);
  ExtractionOptions options{config.tau, height, width, config.normalize_before_threshold};
  const auto maps = cache.cross_attention_maps();
  const MaskSet set = build_mask_set(maps, config.steps, net.layer_count(), align, options);

  result.delta = semantic_delta(request.source_word, request.edit_word);
  result.masks = select_masks(set, *profile, result.delta);

  const Tokenization edit_tokens = toy_tokenize(request.edit_prompt);
  std::vector<bool> preserved(src_tokens.size());
  for (std::size_t i = 0; i < preserved.size(); ++i) {
    preserved[i] = src_tokens[i].first == edit_tokens[i].first;
  }

  const TextEmbedding text = net.text_encoder().encode(request.edit_prompt);
  const std::size_t latent_h = result.inversion.z0.dims()[2];
  const std::size_t latent_w = result.inversion.z0.dims()[3];
  Tensor z = result.inversion.z_final;
  for (std::size_t i = 0; i < config.steps; ++i) {
    const std::size_t k = config.steps - i;
    const StepFeatures& source = cache.steps[k - 1];
    const BinaryGrid& mask = result.masks.masks[k - 1];
    BlendController controller(source, mask, result.delta, config, i, preserved);
    const Tensor eps_edit = net.predict(z, schedule.timesteps[k], text, &controller);
    const Tensor eps = cfg(eps_edit, source.eps, config.guidance);
    z = ddim_step(z, eps, k, schedule);
    if (i < config.latent_cutoff) {
      const UnwrappedMask small = unwrap(mask, latent_h, latent_w, 0);
      BinaryGrid latent_mask(frames, latent_h, latent_w);
      for (std::size_t s = 0; s < latent_h * latent_w; ++s) {
        for (std::size_t f = 0; f < frames; ++f) {
          latent_mask.set(f, s / latent_w, s % latent_w, small.m[s * frames + f] > 0.5f);
        }
      }
      const Tensor& src_latent = k >= 2 ? cache.steps[k - 2].latent : result.inversion.z0;
      z = blend_latent(src_latent, z, latent_mask, i, config.latent_cutoff);
    }
  }
  result.latent = z;
  result.video = net.codec().decode(z);
  return result;
}

IouMatrix profile_video(const ToyDenoiser& net, const Tensor& video, std::string_view prompt,
                        std::string_view object_word, const BinaryGrid& reference,
                        const Schedule& schedule, const ExtractionOptions& options) {
  const InversionResult inversion = invert(net, video, prompt, schedule);
  const TokenAlignment align = align_token(prompt, object_word, toy_tokenize(prompt));
  const auto maps = inversion.cache.cross_attention_maps();
  const MaskSet set = build_mask_set(maps, schedule.steps, net.layer_count(), align, options);
  return match_mask_set(set, reference);
}

}  // namespace maskmatch
