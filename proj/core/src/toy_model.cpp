#include "maskmatch/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "maskmatch/diffusion.hpp"

namespace maskmatch {

namespace {

constexpr std::size_t C = kHiddenChannels;
constexpr std::size_t D = kAttentionDim;
constexpr std::size_t E = kTextDim;

// Scales fixed together with the seed; they set how sharply attention reacts
// to the latent and the magnitude of the noise prediction.
constexpr double kInputGain = 0.6;
// Latent input is preconditioned by alpha_bar(t)^kInputExponent, so the
// prediction leans on the text and positional streams when noise dominates.
constexpr double kInputExponent = 1.0;
constexpr double kLogitGain = 0.8;
constexpr double kHeadGain = 0.5;
constexpr double kTextValueGain = 0.005;
// Content-word tokens gain logit in proportion to how far a patch's latent
// departs from its frame mean, so cross-attention follows distinct objects.
constexpr double kSaliencyGain = 6.0;

bool is_content_token(std::string_view token) {
  static constexpr std::array<std::string_view, 14> kStopwords{
      "a", "an", "the", "on", "in", "of", "with", "and", "at", "to", "is", "over", "by", "from"};
  if (token.empty() || token.front() == '<') return false;
  return std::find(kStopwords.begin(), kStopwords.end(), token) == kStopwords.end();
}
constexpr float kLatentScale = 0.25f;
constexpr double kTimeScale = 1000.0;

std::vector<float> normal_weights(SeededRng& rng, std::size_t n, double stddev) {
  std::vector<float> w(n);
  for (auto& v : w) v = static_cast<float>(rng.normal() * stddev);
  return w;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : engine_(seed) {}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_words(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(seed, h);
}

PatchCodec::PatchCodec(std::uint64_t seed) {
  std::array<std::array<double, kPatchDims>, kLatentChannels> base{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < kPatchSize * kPatchSize; ++i) {
      base[c][c * kPatchSize * kPatchSize + i] = 1.0 / kPatchSize;
    }
  }
  const double ramp_norm = std::sqrt(60.0);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < kPatchSize; ++y) {
      for (std::size_t x = 0; x < kPatchSize; ++x) {
        base[3][(c * kPatchSize + y) * kPatchSize + x] =
            (static_cast<double>(x) - 1.5) / ramp_norm;
      }
    }
  }

  // Seeded orthogonal mixing via Gram-Schmidt.
  SeededRng rng(mix_seed(seed, 0xC0DEC));
  std::array<std::array<double, kLatentChannels>, kLatentChannels> rot{};
  for (std::size_t i = 0; i < kLatentChannels; ++i) {
    for (auto& v : rot[i]) v = rng.normal();
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < kLatentChannels; ++k) dot += rot[i][k] * rot[j][k];
      for (std::size_t k = 0; k < kLatentChannels; ++k) rot[i][k] -= dot * rot[j][k];
    }
    double norm = 0.0;
    for (double v : rot[i]) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : rot[i]) v /= norm;
  }
  for (std::size_t i = 0; i < kLatentChannels; ++i) {
    for (std::size_t p = 0; p < kPatchDims; ++p) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kLatentChannels; ++k) acc += rot[i][k] * base[k][p];
      basis_[i][p] = static_cast<float>(acc);
    }
  }
}

Tensor PatchCodec::encode(const Tensor& video) const {
  if (video.rank() != 4 || video.dims()[1] != 3) {
    throw Error(ErrorCode::kInvalidArgument, "encode expects a (F, 3, H, W) video");
  }
  const std::size_t frames = video.dims()[0];
  const std::size_t h = video.dims()[2];
  const std::size_t w = video.dims()[3];
  if (h % kPatchSize || w % kPatchSize || h == 0 || w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "video height and width must be divisible by 4");
  }
  const std::size_t lh = h / kPatchSize;
  const std::size_t lw = w / kPatchSize;
  Tensor latent({frames, kLatentChannels, lh, lw});
  std::array<float, kPatchDims> patch{};
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t py = 0; py < lh; ++py) {
      for (std::size_t px = 0; px < lw; ++px) {
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t y = 0; y < kPatchSize; ++y) {
            for (std::size_t x = 0; x < kPatchSize; ++x) {
              patch[(c * kPatchSize + y) * kPatchSize + x] =
                  video[((f * 3 + c) * h + py * kPatchSize + y) * w + px * kPatchSize + x];
            }
          }
        }
        for (std::size_t j = 0; j < kLatentChannels; ++j) {
          double acc = 0.0;
          for (std::size_t p = 0; p < kPatchDims; ++p) acc += basis_[j][p] * patch[p];
          latent[((f * kLatentChannels + j) * lh + py) * lw + px] =
              static_cast<float>(acc * kLatentScale);
        }
      }
    }
  }
  return latent;
}

Tensor PatchCodec::decode(const Tensor& latent) const {
  if (latent.rank() != 4 || latent.dims()[1] != kLatentChannels) {
    throw Error(ErrorCode::kInvalidArgument, "decode expects a (F, 4, h, w) latent");
  }
  const std::size_t frames = latent.dims()[0];
  const std::size_t lh = latent.dims()[2];
  const std::size_t lw = latent.dims()[3];
  const std::size_t h = lh * kPatchSize;
  const std::size_t w = lw * kPatchSize;
  Tensor video({frames, 3, h, w});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t py = 0; py < lh; ++py) {
      for (std::size_t px = 0; px < lw; ++px) {
        std::array<double, kLatentChannels> coeff{};
        for (std::size_t j = 0; j < kLatentChannels; ++j) {
          coeff[j] = latent[((f * kLatentChannels + j) * lh + py) * lw + px] / kLatentScale;
        }
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t y = 0; y < kPatchSize; ++y) {
            for (std::size_t x = 0; x < kPatchSize; ++x) {
              const std::size_t p = (c * kPatchSize + y) * kPatchSize + x;
              double acc = 0.0;
              for (std::size_t j = 0; j < kLatentChannels; ++j) acc += coeff[j] * basis_[j][p];
              video[((f * 3 + c) * h + py * kPatchSize + y) * w + px * kPatchSize + x] =
                  static_cast<float>(acc);
            }
          }
        }
      }
    }
  }
  return video;
}

Tokenization toy_tokenize(std::string_view prompt) {
  Tokenization tokens;
  tokens.emplace_back(std::string(kStartToken), 0);
  std::istringstream words{std::string(prompt)};
  std::string word;
  while (words >> word) {
    if (tokens.size() == kContextLength) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prompt exceeds the toy context length of " +
                      std::to_string(kContextLength - 1) + " words");
    }
    tokens.emplace_back(fold_word(word), tokens.size());
  }
  while (tokens.size() < kContextLength) tokens.emplace_back(std::string(kPadToken), tokens.size());
  return tokens;
}

TextEmbedding ToyTextEncoder::encode(std::string_view prompt) const {
  TextEmbedding out;
  out.tokens = toy_tokenize(prompt);
  out.embedding = Tensor({out.tokens.size(), E});
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    SeededRng rng(hash_words(seed_, out.tokens[i].first));
    for (std::size_t e = 0; e < E; ++e) out.embedding[i * E + e] = static_cast<float>(rng.normal());
  }
  return out;
}

ToyDenoiser::ToyDenoiser(std::uint64_t seed, std::size_t latent_size)
    : seed_(seed), latent_size_(latent_size), text_(seed), codec_(seed) {
  if (latent_size == 0 || latent_size % 4) {
    throw Error(ErrorCode::kInvalidArgument, "toy latent size must be a positive multiple of 4");
  }
  const std::array<std::size_t, kToyLayers> sizes{latent_size, latent_size / 2, latent_size / 4,
                                                  latent_size / 2, latent_size};
  SeededRng rng(mix_seed(seed, 0xDE401));
  const double in_std = kInputGain / std::sqrt(static_cast<double>(kLatentChannels));
  const double hid_std = 1.0 / std::sqrt(static_cast<double>(C));
  const double txt_std = 1.0 / std::sqrt(static_cast<double>(E));
  for (std::size_t l = 0; l < kToyLayers; ++l) {
    Layer layer;
    layer.size = sizes[l];
    layer.w_in = normal_weights(rng, C * kLatentChannels, in_std);
    layer.w_skip = normal_weights(rng, C * C, 0.5 * hid_std);
    layer.t_phase = normal_weights(rng, C, std::numbers::pi);
    layer.w_qs = normal_weights(rng, D * C, hid_std);
    layer.w_ks = normal_weights(rng, D * C, hid_std);
    layer.w_qc = normal_weights(rng, D * C, hid_std);
    layer.w_qt = normal_weights(rng, D * C, hid_std);
    layer.w_kt = normal_weights(rng, D * C, hid_std);
    layer.w_kc = normal_weights(rng, D * E, txt_std);
    layer.w_vc = normal_weights(rng, C * E, kTextValueGain * txt_std);
    layer.pos_values = normal_weights(rng, sizes[l] * sizes[l] * C, 1.0);
    layers_.push_back(std::move(layer));
  }
  w_head_ = normal_weights(rng, kLatentChannels * C, hid_std);
}

std::string ToyDenoiser::model_id() const {
  return "toy-unet-s" + std::to_string(latent_size_) + "-seed" + std::to_string(seed_);
}

std::vector<float> ToyDenoiser::frame_values(std::size_t layer, std::size_t frames) const {
  std::vector<float> v(frames * C);
  for (std::size_t f = 0; f < frames; ++f) {
    SeededRng rng(mix_seed(mix_seed(seed_, 0xF4A3E + layer), f));
    for (std::size_t c = 0; c < C; ++c) v[f * C + c] = static_cast<float>(rng.normal());
  }
  return v;
}

namespace {

// (F, s_src^2, C) -> (F, s_dst^2, C), bilinear per channel.
std::vector<float> resize_features(const std::vector<float>& in, std::size_t frames,
                                   std::size_t src, std::size_t dst) {
  if (src == dst) return in;
  std::vector<float> out(frames * dst * dst * C);
  Tensor plane({src, src});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t p = 0; p < src * src; ++p) plane[p] = in[(f * src * src + p) * C + c];
      const Tensor r = resize_bilinear(plane, dst, dst);
      for (std::size_t p = 0; p < dst * dst; ++p) out[(f * dst * dst + p) * C + c] = r[p];
    }
  }
  return out;
}

// rows x out_dim = rows x in_dim times (out_dim x in_dim)^T
void project(const float* x, std::size_t rows, std::size_t in_dim, const std::vector<float>& w,
             std::size_t out_dim, float* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      float acc = 0.0f;
      for (std::size_t i = 0; i < in_dim; ++i) acc += w[o * in_dim + i] * x[r * in_dim + i];
      y[r * out_dim + o] = acc;
    }
  }
}

}  // namespace

Tensor ToyDenoiser::predict(const Tensor& z, std::size_t virtual_t, const TextEmbedding& text,
                            FeatureController* controller) const {
  if (z.rank() != 4 || z.dims()[1] != kLatentChannels || z.dims()[2] != latent_size_ ||
      z.dims()[3] != latent_size_) {
    throw Error(ErrorCode::kShapeMismatch, "latent must be (F, 4, " +
                                               std::to_string(latent_size_) + ", " +
                                               std::to_string(latent_size_) + ")");
  }
  const std::size_t frames = z.dims()[0];
  const std::size_t full = latent_size_;
  const std::size_t tokens = text.embedding.dims()[0];
  const float inv_sqrt_d = static_cast<float>(kLogitGain / std::sqrt(static_cast<double>(D)));

  std::vector<float> acc(frames * full * full * C, 0.0f);
  std::vector<float> prev;
  std::size_t prev_size = 0;

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const std::size_t s = L.size;
    const std::size_t P = s * s;
    const std::size_t r = full / s;

    // Block input: pooled latent + resized previous output + timestep code.
    std::vector<float> g(frames * P * C, 0.0f);
    std::vector<float> pooled(frames * P * kLatentChannels, 0.0f);
    {
      const float inv_area = static_cast<float>(
          std::pow(train_alpha_bar(virtual_t), kInputExponent) / static_cast<double>(r * r));
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t j = 0; j < kLatentChannels; ++j) {
          for (std::size_t y = 0; y < full; ++y) {
            for (std::size_t x = 0; x < full; ++x) {
              pooled[(f * P + (y / r) * s + x / r) * kLatentChannels + j] +=
                  z[((f * kLatentChannels + j) * full + y) * full + x] * inv_area;
            }
          }
        }
      }
      project(pooled.data(), frames * P, kLatentChannels, L.w_in, C, g.data());
      if (!prev.empty()) {
        const auto up = resize_features(prev, frames, prev_size, s);
        std::vector<float> skip(frames * P * C);
        project(up.data(), frames * P, C, L.w_skip, C, skip.data());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += skip[i];
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double freq = 0.5 * std::numbers::pi * static_cast<double>(c + 1) / kTimeScale;
        const float code = static_cast<float>(0.5 * std::sin(freq * static_cast<double>(virtual_t) +
                                                             L.t_phase[c]));
        for (std::size_t i = 0; i < frames * P; ++i) g[i * C + c] += code;
      }
    }

    std::vector<float> out(frames * P * C, 0.0f);

    // Spatial self-attention with positional values.
    {
      std::vector<float> q(frames * P * D);
      std::vector<float> k(frames * P * D);
      project(g.data(), frames * P, C, L.w_qs, D, q.data());
      project(g.data(), frames * P, C, L.w_ks, D, k.data());
      Tensor logits({frames, P, P});
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < P; ++i) {
          const float* qi = &q[(f * P + i) * D];
          for (std::size_t j = 0; j < P; ++j) {
            const float* kj = &k[(f * P + j) * D];
            float dot = 0.0f;
            for (std::size_t d = 0; d < D; ++d) dot += qi[d] * kj[d];
            logits[(f * P + i) * P + j] = dot * inv_sqrt_d;
          }
        }
      }
      Tensor attn = softmax_rows(logits, 2);
      if (controller) controller->self(l, attn);
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < P; ++i) {
          float* o = &out[(f * P + i) * C];
          const float* row = &attn.data()[(f * P + i) * P];
          for (std::size_t j = 0; j < P; ++j) {
            const float a = row[j];
            const float* v = &L.pos_values[j * C];
            for (std::size_t c = 0; c < C; ++c) o[c] += a * v[c];
          }
        }
      }
    }

    // Cross-attention against the prompt tokens.
    {
      std::vector<float> q(frames * P * D);
      project(g.data(), frames * P, C, L.w_qc, D, q.data());
      std::vector<float> k(tokens * D);
      std::vector<float> v(tokens * C);
      project(text.embedding.data().data(), tokens, E, L.w_kc, D, k.data());
      project(text.embedding.data().data(), tokens, E, L.w_vc, C, v.data());
      std::vector<float> salience(frames * P, 0.0f);
      for (std::size_t f = 0; f < frames; ++f) {
        std::array<double, kLatentChannels> mean{};
        for (std::size_t p = 0; p < P; ++p) {
          for (std::size_t j = 0; j < kLatentChannels; ++j) mean[j] += pooled[(f * P + p) * kLatentChannels + j];
        }
        for (auto& m : mean) m /= static_cast<double>(P);
        for (std::size_t p = 0; p < P; ++p) {
          double dev = 0.0;
          for (std::size_t j = 0; j < kLatentChannels; ++j) {
            const double e = pooled[(f * P + p) * kLatentChannels + j] - mean[j];
            dev += e * e;
          }
          salience[f * P + p] = static_cast<float>(kSaliencyGain * std::sqrt(dev));
        }
      }
      std::vector<float> content(tokens);
      for (std::size_t t = 0; t < tokens; ++t) {
        content[t] = is_content_token(text.tokens[t].first) ? 1.0f : 0.0f;
      }
      Tensor logits({frames, P, tokens});
      for (std::size_t i = 0; i < frames * P; ++i) {
        for (std::size_t t = 0; t < tokens; ++t) {
          float dot = 0.0f;
          for (std::size_t d = 0; d < D; ++d) dot += q[i * D + d] * k[t * D + d];
          logits[i * tokens + t] = dot * inv_sqrt_d + content[t] * salience[i];
        }
      }
      Tensor attn = softmax_rows(logits, 2);
      if (controller) controller->cross(l, attn);
      for (std::size_t i = 0; i < frames * P; ++i) {
        for (std::size_t t = 0; t < tokens; ++t) {
          const float a = attn[i * tokens + t];
          for (std::size_t c = 0; c < C; ++c) out[i * C + c] += a * v[t * C + c];
        }
      }
    }

    // Temporal attention across frames at each spatial position.
    {
      Tensor keys({P, frames, D});
      Tensor queries({P, frames, D});
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t p = 0; p < P; ++p) {
          const float* x = &g[(f * P + p) * C];
          project(x, 1, C, L.w_qt, D, &queries.data()[(p * frames + f) * D]);
          project(x, 1, C, L.w_kt, D, &keys.data()[(p * frames + f) * D]);
        }
      }
      if (controller) controller->temp(l, keys, queries);
      const auto values = frame_values(l, frames);
      Tensor logits({P, frames, frames});
      for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t a = 0; a < frames; ++a) {
          for (std::size_t b = 0; b < frames; ++b) {
            float dot = 0.0f;
            for (std::size_t d = 0; d < D; ++d) {
              dot += queries[(p * frames + a) * D + d] * keys[(p * frames + b) * D + d];
            }
            logits[(p * frames + a) * frames + b] = dot * inv_sqrt_d;
          }
        }
      }
      const Tensor attn = softmax_rows(logits, 2);
      for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t a = 0; a < frames; ++a) {
          float* o = &out[(a * P + p) * C];
          for (std::size_t b = 0; b < frames; ++b) {
            const float w = attn[(p * frames + a) * frames + b];
            for (std::size_t c = 0; c < C; ++c) o[c] += w * values[b * C + c];
          }
        }
      }
    }

    const auto up = resize_features(out, frames, s, full);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += up[i];
    prev = std::move(out);
    prev_size = s;
  }

  Tensor eps({frames, kLatentChannels, full, full});
  const float head = static_cast<float>(kHeadGain);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t p = 0; p < full * full; ++p) {
      const float* a = &acc[(f * full * full + p) * C];
      for (std::size_t j = 0; j < kLatentChannels; ++j) {
        float v = 0.0f;
        for (std::size_t c = 0; c < C; ++c) v += w_head_[j * C + c] * a[c];
        eps[(f * kLatentChannels + j) * full * full + p] = head * v;
      }
    }
  }
  return eps;
}

}  // namespace maskmatch
