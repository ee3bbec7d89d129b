#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "maskmatch/attention_io.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

inline constexpr std::size_t kPatchSize = 4;
inline constexpr std::size_t kLatentChannels = 4;
inline constexpr std::size_t kHiddenChannels = 8;
inline constexpr std::size_t kAttentionDim = 8;
inline constexpr std::size_t kTextDim = 16;
inline constexpr std::size_t kContextLength = 16;
inline constexpr std::size_t kToyLayers = 5;
inline constexpr std::uint64_t kDefaultModelSeed = 20240611;

inline constexpr std::string_view kStartToken = "<|startoftext|>";
inline constexpr std::string_view kPadToken = "<pad>";

// mt19937_64 with hand-written distributions so weight streams do not depend
// on the standard library's distribution implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);
  double uniform();  // [0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t hash_words(std::uint64_t seed, std::string_view text);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Patch codec: each 4x4x3 patch projects onto four fixed basis vectors
// (per-channel means plus a horizontal luminance ramp) rotated by a seeded
// orthogonal 4x4 matrix. decode is the exact pseudo-inverse of encode.
class PatchCodec {
 public:
  explicit PatchCodec(std::uint64_t seed = kDefaultModelSeed);

  Tensor encode(const Tensor& video) const;   // (F, 3, H, W) -> (F, 4, H/4, W/4)
  Tensor decode(const Tensor& latent) const;  // inverse direction

 private:
  static constexpr std::size_t kPatchDims = 3 * kPatchSize * kPatchSize;
  std::array<std::array<float, kPatchDims>, kLatentChannels> basis_{};  // rows orthonormal
};

struct TextEmbedding {
  Tokenization tokens;  // (token, index), padded to kContextLength
  Tensor embedding;     // (S', kTextDim)
};

// Word-level tokenizer: start token, one token per whitespace-separated
// word (case-folded), then pad tokens up to kContextLength.
Tokenization toy_tokenize(std::string_view prompt);

class ToyTextEncoder {
 public:
  explicit ToyTextEncoder(std::uint64_t seed = kDefaultModelSeed) : seed_(seed) {}
  TextEmbedding encode(std::string_view prompt) const;

 private:
  std::uint64_t seed_;
};

// Hooks invoked while the denoiser computes attention; implementations may
// record the features or overwrite them in place.
class FeatureController {
 public:
  virtual ~FeatureController() = default;
  // (F, h'w', S') row-stochastic map
  virtual void cross(std::size_t layer, Tensor& attention) {}
  // (F, h'w', h'w') row-stochastic map
  virtual void self(std::size_t layer, Tensor& attention) {}
  // (h'w', F, dim) keys and queries
  virtual void temp(std::size_t layer, Tensor& keys, Tensor& queries) {}
};

// Seeded five-block attention stack standing in for a video U-Net. Every
// value stream is latent-independent (positional, frame or text values), so
// the prediction depends on the latent only through the attention maps and
// temporal keys/queries exposed to the controller.
class ToyDenoiser {
 public:
  explicit ToyDenoiser(std::uint64_t seed = kDefaultModelSeed, std::size_t latent_size = 16);

  std::uint64_t seed() const noexcept { return seed_; }
  std::string model_id() const;
  std::size_t latent_size() const noexcept { return latent_size_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t layer_size(std::size_t layer) const { return layers_.at(layer).size; }

  const ToyTextEncoder& text_encoder() const noexcept { return text_; }
  const PatchCodec& codec() const noexcept { return codec_; }

  // z: (F, 4, s, s); virtual_t: training-schedule timestep.
  Tensor predict(const Tensor& z, std::size_t virtual_t, const TextEmbedding& text,
                 FeatureController* controller = nullptr) const;

 private:
  struct Layer {
    std::size_t size = 0;
    std::vector<float> w_in;     // C x 4
    std::vector<float> w_skip;   // C x C
    std::vector<float> t_phase;  // C
    std::vector<float> w_qs, w_ks, w_qc, w_qt, w_kt;  // D x C
    std::vector<float> w_kc;     // D x E
    std::vector<float> w_vc;     // C x E
    std::vector<float> pos_values;  // (size^2) x C
  };

  std::vector<float> frame_values(std::size_t layer, std::size_t frames) const;

  std::uint64_t seed_;
  std::size_t latent_size_;
  std::vector<Layer> layers_;
  std::vector<float> w_head_;  // 4 x C
  ToyTextEncoder text_;
  PatchCodec codec_;
};

}  // namespace maskmatch
