#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "maskmatch/pipeline.hpp"
#include "maskmatch/synthetic.hpp"
#include "temp_dir.hpp"

using namespace maskmatch;
using maskmatch::testing::Gen;
using maskmatch::testing::TempDir;

namespace {

// Records every hook call; layer geometry comes from the map shapes.
struct Recorder : FeatureController {
  std::vector<Tensor> cross_maps, self_maps;
  std::vector<std::size_t> temp_cells;
  void cross(std::size_t, Tensor& a) override { cross_maps.push_back(a); }
  void self(std::size_t, Tensor& a) override { self_maps.push_back(a); }
  void temp(std::size_t, Tensor& k, Tensor&) override { temp_cells.push_back(k.dims()[0]); }
};

double max_row_error(const Tensor& t) {
  const std::size_t cols = t.dims().back();
  double worst = 0.0;
  for (std::size_t r = 0; r < t.size() / cols; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += t[r * cols + c];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

Tensor smooth_video(Gen& gen, std::size_t frames, std::size_t h, std::size_t w) {
  Tensor v({frames, 3, h, w});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double a = gen.real(0.2, 0.8), fy = gen.real(0.5, 2.0), fx = gen.real(0.5, 2.0);
      const double py = gen.real(0, 6.28), px = gen.real(0, 6.28);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          v[((f * 3 + c) * h + y) * w + x] = static_cast<float>(
              a + 0.15 * std::sin(fy * 6.28 * y / h + py) * std::cos(fx * 6.28 * x / w + px));
        }
      }
    }
  }
  return v;
}

class ToyPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    net_ = new ToyDenoiser();
    scene_ = new SyntheticScene(moving_square(4, 64, 64));
    schedule_ = new Schedule(make_linear_schedule(50));
    inversion_ = new InversionResult(invert(*net_, scene_->video, scene_->prompt, *schedule_));
  }
  static void TearDownTestSuite() {
    delete inversion_;
    delete schedule_;
    delete scene_;
    delete net_;
  }

  static MmcProfile profile() {
    Gen gen(71);
    return profile_from_matrix(gen.planted<IouMatrix>(50, 5, 2, 40), net_->model_id());
  }

  static ToyDenoiser* net_;
  static SyntheticScene* scene_;
  static Schedule* schedule_;
  static InversionResult* inversion_;
};

ToyDenoiser* ToyPipeline::net_ = nullptr;
SyntheticScene* ToyPipeline::scene_ = nullptr;
Schedule* ToyPipeline::schedule_ = nullptr;
InversionResult* ToyPipeline::inversion_ = nullptr;

}  // namespace

TEST(Codec, ShapesAndLinearity) {
  const PatchCodec codec;
  const Tensor z = codec.encode(Tensor({4, 3, 64, 64}));
  EXPECT_EQ(z.dims(), (Shape{4, 4, 16, 16}));
  for (float v : z.values()) EXPECT_EQ(v, 0.0f);
  for (float v : codec.decode(z).values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(codec.encode(Tensor({1, 3, 10, 8})), Error);
  EXPECT_THROW(codec.encode(Tensor({1, 2, 8, 8})), Error);
}

TEST(Codec, SmoothRoundTrip) {
  Gen gen(72);
  const PatchCodec codec;
  for (int i = 0; i < 5; ++i) {
    const Tensor v = smooth_video(gen, 2, 32, 48);
    EXPECT_LT(relative_l2(codec.decode(codec.encode(v)), v), 0.15);
  }
  const Tensor square = moving_square(2, 64, 64).video;
  EXPECT_LT(relative_l2(codec.decode(codec.encode(square)), square), 0.15);
}

TEST(TextEncoder, PadsToContext) {
  const TextEmbedding e = ToyTextEncoder().encode("A Jeep driving");
  ASSERT_EQ(e.tokens.size(), kContextLength);
  EXPECT_EQ(e.tokens[0].first, kStartToken);
  EXPECT_EQ(e.tokens[2].first, "jeep");
  EXPECT_EQ(e.tokens[4].first, kPadToken);
  EXPECT_EQ(e.embedding.dims(), (Shape{kContextLength, kTextDim}));
  EXPECT_EQ(ToyTextEncoder().encode("a jeep driving").embedding, e.embedding);
  EXPECT_THROW(toy_tokenize("one two three four five six seven eight nine ten eleven twelve "
                            "thirteen fourteen fifteen sixteen"),
               Error);
}

TEST(ToyDenoiser, DeterministicAndWellFormed) {
  Gen gen(73);
  const ToyDenoiser a, b;
  EXPECT_EQ(a.model_id(), b.model_id());
  EXPECT_NE(a.model_id(), ToyDenoiser(7).model_id());
  ASSERT_EQ(a.layer_count(), 5u);
  const std::vector<std::size_t> sizes{16, 8, 4, 8, 16};
  for (std::size_t l = 0; l < 5; ++l) EXPECT_EQ(a.layer_size(l), sizes[l]);

  const Tensor z = gen.tensor({3, 4, 16, 16}, -2.0f, 2.0f);
  const TextEmbedding text = a.text_encoder().encode("a red square");
  Recorder rec;
  const Tensor eps = a.predict(z, 500, text, &rec);
  EXPECT_EQ(eps.dims(), z.dims());
  EXPECT_EQ(eps, b.predict(z, 500, text));
  ASSERT_EQ(rec.cross_maps.size(), 5u);
  ASSERT_EQ(rec.self_maps.size(), 5u);
  for (std::size_t l = 0; l < 5; ++l) {
    const std::size_t cells = sizes[l] * sizes[l];
    EXPECT_EQ(rec.cross_maps[l].dims(), (Shape{3, cells, kContextLength}));
    EXPECT_EQ(rec.self_maps[l].dims(), (Shape{3, cells, cells}));
    EXPECT_EQ(rec.temp_cells[l], cells);
    EXPECT_LT(max_row_error(rec.cross_maps[l]), 1e-5);
    EXPECT_LT(max_row_error(rec.self_maps[l]), 1e-5);
  }
}

TEST(Invert, SingleStepCardinality) {
  const ToyDenoiser net;
  const SyntheticScene scene = moving_square(2, 64, 64);
  const InversionResult r = invert(net, scene.video, scene.prompt, make_linear_schedule(1));
  EXPECT_TRUE(r.cache.complete(1, 5));
  EXPECT_EQ(r.cache.cross_attention_maps().size(), 5u);
}

TEST_F(ToyPipeline, CacheCompleteAndDeterministic) {
  EXPECT_TRUE(inversion_->cache.complete(50, 5));
  EXPECT_FALSE(inversion_->cache.complete(49, 5));
  EXPECT_EQ(inversion_->z0.dims(), (Shape{4, 4, 16, 16}));
  const InversionResult again = invert(*net_, scene_->video, scene_->prompt, *schedule_);
  EXPECT_EQ(again.z_final, inversion_->z_final);
  EXPECT_EQ(again.cache.steps[17].layers[3].cross.tensor, inversion_->cache.steps[17].layers[3].cross.tensor);
}

TEST_F(ToyPipeline, DumpsWritten) {
  TempDir dir("pipeline-dumps");
  const VideoManifest m = write_cross_attention_dumps(*inversion_, *net_, scene_->prompt, dir.path());
  EXPECT_EQ(m.entries.size(), 250u);
  EXPECT_TRUE(validate_manifest(dir.path()).empty());
  EXPECT_EQ(m.entries[0].token_strings.size(), kContextLength);
}

TEST_F(ToyPipeline, ReplayReconstructs) {
  const Tensor z = replay(inversion_->z_final, inversion_->cache, *schedule_);
  EXPECT_LT(relative_l2(z, inversion_->z0), 1e-5);
}

TEST_F(ToyPipeline, FreshPredictionsReconstruct) {
  const Tensor z = sample(*net_, inversion_->z_final, scene_->prompt, *schedule_, 1.0);
  EXPECT_LT(relative_l2(z, inversion_->z0), 0.05);
}

TEST_F(ToyPipeline, FullFusionCollapsesToReplay) {
  EditConfig config;
  config.alpha_s = config.alpha_c = config.alpha_t = 1.0;
  const MmcProfile p = profile();
  const EditRequest req{scene_->video, scene_->prompt, scene_->prompt, scene_->object, scene_->object};
  const EditResult r = edit(*net_, req, config, &p);
  EXPECT_EQ(r.delta, 1);
  EXPECT_EQ(r.masks.mode, MaskMode::kTimeAgnostic);
  const Tensor plain = replay(inversion_->z_final, inversion_->cache, *schedule_);
  EXPECT_LT(relative_l2(r.latent, plain), 1e-4);
  EXPECT_LT(relative_l2(r.video, net_->codec().decode(plain)), 1e-4);
}

TEST_F(ToyPipeline, NoBlendingEqualsGuidedSampling) {
  EditConfig config;
  config.alpha_s = config.alpha_c = config.alpha_t = 0.0;
  const MmcProfile p = profile();
  const std::string p1 = "a blue square on a gradient";
  const EditRequest req{scene_->video, scene_->prompt, p1, scene_->object, scene_->object};
  const EditResult r = edit(*net_, req, config, &p);
  const Tensor plain = sample(*net_, inversion_->z_final, p1, *schedule_, config.guidance, &inversion_->cache);
  EXPECT_EQ(r.latent, plain);
}

TEST_F(ToyPipeline, EditDeterministicAndSelective) {
  EditConfig config;
  config.latent_cutoff = 10;
  const MmcProfile p = profile();
  const EditRequest req{scene_->video, scene_->prompt, "a red circle on a gradient", "square", "circle"};
  const EditResult a = edit(*net_, req, config, &p);
  const EditResult b = edit(*net_, req, config, &p);
  EXPECT_EQ(a.video, b.video);
  EXPECT_EQ(a.delta, 0);
  EXPECT_EQ(a.masks.mode, MaskMode::kTimeAware);
  EXPECT_EQ(a.masks.layer, 2u);
  EXPECT_EQ(a.masks.masks.size(), 50u);
  EXPECT_EQ(a.video.dims(), scene_->video.dims());
}

TEST_F(ToyPipeline, EditPrerequisites) {
  const EditRequest req{scene_->video, scene_->prompt, scene_->prompt, scene_->object, scene_->object};
  try {
    edit(*net_, req, EditConfig{}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingPrerequisite);
    EXPECT_NE(std::string(e.what()).find("run mmc-profile first"), std::string::npos);
  }
  Gen gen(74);
  const MmcProfile small = profile_from_matrix(gen.planted<IouMatrix>(10, 5, 0, 0), net_->model_id());
  EXPECT_THROW(edit(*net_, req, EditConfig{}, &small), Error);
  const MmcProfile other = profile_from_matrix(gen.planted<IouMatrix>(50, 5, 0, 0), "another-model");
  EXPECT_THROW(edit(*net_, req, EditConfig{}, &other), Error);
}

TEST_F(ToyPipeline, ProfileVideoShape) {
  const Schedule s = make_linear_schedule(10);
  const IouMatrix d = profile_video(*net_, scene_->video, scene_->prompt, scene_->object, scene_->mask,
                                    s, {0.3f, 64, 64, true});
  EXPECT_EQ(d.steps(), 10u);
  EXPECT_EQ(d.layers(), 5u);
  for (double v : d.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Synthetic, MovingSquare) {
  const SyntheticScene a = moving_square(4, 32, 48, 1);
  EXPECT_EQ(a.video.dims(), (Shape{4, 3, 32, 48}));
  EXPECT_EQ(a.mask.dims(), (Shape{4, 32, 48}));
  EXPECT_GT(a.mask.count(), 0u);
  EXPECT_NE(a.prompt.find(a.object), std::string::npos);
  EXPECT_EQ(moving_square(4, 32, 48, 1).video, a.video);
  EXPECT_NE(moving_square(4, 32, 48, 2).video, a.video);
  EXPECT_NE(a.mask.frame(0), a.mask.frame(3));
  for (float v : a.video.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_THROW(moving_square(1, 4, 4), Error);
}
