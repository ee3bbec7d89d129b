#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "generators.hpp"
#include "maskmatch/mask_extraction.hpp"
#include "maskmatch/pipeline.hpp"
#include "maskmatch/synthetic.hpp"
#include "temp_dir.hpp"

using namespace maskmatch;
using maskmatch::testing::Gen;
using maskmatch::testing::TempDir;

namespace {

CrossAttentionMap map_of(Tensor t, std::size_t h, std::size_t w, std::size_t layer = 0,
                         std::size_t step = 0) {
  return {std::move(t), layer, step, h, w};
}

TokenAlignment tokens(std::vector<std::size_t> idx) { return {"obj", std::move(idx)}; }

// (1, h*w, 3) map whose token-1 column is `column`; token 0 takes the rest.
CrossAttentionMap with_column(const std::vector<float>& column, std::size_t h, std::size_t w) {
  Tensor t({1, h * w, 3});
  for (std::size_t s = 0; s < h * w; ++s) {
    t[s * 3 + 0] = 1.0f - column[s];
    t[s * 3 + 1] = column[s];
  }
  return map_of(std::move(t), h, w);
}

}  // namespace

TEST(ExtractTokenMap, SingleIndexSlices) {
  Gen gen(21);
  const Tensor t = gen.stochastic({2, 6, 3});
  const Tensor m = extract_token_map(map_of(t, 2, 3), tokens({1}));
  ASSERT_EQ(m.dims(), (Shape{2, 2, 3}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(m[i], t[i * 3 + 1]);
}

TEST(ExtractTokenMap, DuplicateColumnsMatchSingle) {
  Gen gen(22);
  Tensor t = gen.stochastic({1, 4, 3});
  for (std::size_t s = 0; s < 4; ++s) t[s * 3 + 2] = t[s * 3 + 0];
  EXPECT_EQ(extract_token_map(map_of(t, 2, 2), tokens({0, 2})),
            extract_token_map(map_of(t, 2, 2), tokens({0})));
}

TEST(ExtractTokenMap, MeanOfTwoColumns) {
  Gen gen(23);
  const Tensor t = gen.stochastic({3, 9, 4});
  const Tensor m = extract_token_map(map_of(t, 3, 3), tokens({0, 2}));
  for (std::size_t i = 0; i < 27; ++i) {
    const double oracle = (static_cast<double>(t[i * 4]) + t[i * 4 + 2]) / 2.0;
    EXPECT_EQ(m[i], static_cast<float>(oracle));
  }
}

TEST(ExtractTokenMap, IndexOutOfRange) {
  EXPECT_THROW(extract_token_map(map_of(Tensor({1, 4, 3}), 2, 2), tokens({3})), Error);
  EXPECT_THROW(extract_token_map(map_of(Tensor({1, 4, 3}), 2, 3), tokens({0})), Error);
}

TEST(CandidateFromMap, UniformColumnIsEmpty) {
  const auto c = candidate_from_map(with_column(std::vector<float>(16, 0.25f), 4, 4), tokens({1}),
                                    {0.3f, 16, 16, true});
  EXPECT_EQ(c.grid.count(), 0u);
}

TEST(CandidateFromMap, SpikeMatchesBilinearWeightOracle) {
  const std::size_t h = 4, w = 4, H = 16, W = 16;
  const float tau = 0.3f;
  for (std::size_t cell = 0; cell < h * w; ++cell) {
    std::vector<float> column(h * w, 0.0f);
    column[cell] = 1.0f;
    const auto c = candidate_from_map(with_column(column, h, w), tokens({1}), {tau, H, W, true});
    const double cy = static_cast<double>(cell / w), cx = static_cast<double>(cell % w);
    std::size_t own_block = 0;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double sy = std::clamp((y + 0.5) * h / H - 0.5, 0.0, h - 1.0);
        const double sx = std::clamp((x + 0.5) * w / W - 0.5, 0.0, w - 1.0);
        const double weight = std::max(0.0, 1.0 - std::abs(sy - cy)) * std::max(0.0, 1.0 - std::abs(sx - cx));
        ASSERT_EQ(c.grid.at(0, y, x), weight >= tau) << "cell " << cell << " pixel " << y << "," << x;
        if (y * h / H == cell / w && x * w / W == cell % w) own_block += c.grid.at(0, y, x);
      }
    }
    EXPECT_EQ(own_block, (H / h) * (W / w));
  }
}

TEST(CandidateFromMap, DiskAreaMatchesCountOracle) {
  const std::size_t n = 12;
  std::vector<float> column(n * n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double r = std::hypot(y - 5.5, x - 4.0);
      column[y * n + x] = static_cast<float>(0.05 + 0.5 * std::exp(-r * r / 8.0));
    }
  }
  const auto c = candidate_from_map(with_column(column, n, n), tokens({1}), {0.3f, n, n, true});
  const float lo = *std::min_element(column.begin(), column.end());
  const float hi = *std::max_element(column.begin(), column.end());
  std::size_t oracle = 0;
  for (float v : column) oracle += (v - lo) / (hi - lo) >= 0.3f;
  EXPECT_EQ(c.grid.count(), oracle);
  EXPECT_GT(oracle, 0u);
}

TEST(CandidateFromMapProperty, PositiveScaleInvariant) {
  Gen gen(24);
  for (int i = 0; i < 100; ++i) {
    const std::size_t h = gen.size(2, 8), w = gen.size(2, 8);
    const Tensor t = gen.tensor({2, h * w, 3}, 0.0f, 1.0f);
    Tensor scaled = t;
    const float k = static_cast<float>(std::ldexp(1.0, static_cast<int>(gen.size(0, 6)) - 3));
    for (auto& v : scaled.data()) v *= k;
    const ExtractionOptions opts{0.3f, 16, 16, true};
    ASSERT_EQ(candidate_from_map(map_of(t, h, w), tokens({1}), opts).grid,
              candidate_from_map(map_of(scaled, h, w), tokens({1}), opts).grid);
  }
}

TEST(CandidateFromMap, Deterministic) {
  Gen gen(25);
  const auto m = map_of(gen.stochastic({2, 16, 4}), 4, 4);
  const ExtractionOptions opts{0.3f, 32, 32, true};
  EXPECT_EQ(candidate_from_map(m, tokens({2}), opts).grid, candidate_from_map(m, tokens({2}), opts).grid);
}

TEST(CandidateFromMap, RawThresholdWhenNormalizationOff) {
  const auto c = candidate_from_map(with_column(std::vector<float>(4, 0.25f), 2, 2), tokens({1}),
                                    {0.2f, 2, 2, false});
  EXPECT_EQ(c.grid.count(), 4u);
}

TEST(BuildMaskSet, Cardinality) {
  Gen gen(26);
  std::vector<CrossAttentionMap> maps;
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t l = 0; l < 2; ++l) maps.push_back(map_of(gen.stochastic({1, 4, 3}), 2, 2, l, t));
  }
  const MaskSet set = build_mask_set(maps, 2, 2, tokens({1}), {0.3f, 4, 4, true});
  EXPECT_EQ(set.candidates().size(), 4u);
  EXPECT_EQ(set.at(1, 0).timestep, 1u);
  EXPECT_EQ(set.at(1, 0).layer, 0u);
}

TEST(BuildMaskSet, MissingPairNamed) {
  Gen gen(27);
  std::vector<CrossAttentionMap> maps;
  for (auto [t, l] : {std::pair{0, 0}, {0, 1}, {1, 1}}) {
    maps.push_back(map_of(gen.stochastic({1, 4, 3}), 2, 2, l, t));
  }
  try {
    build_mask_set(maps, 2, 2, tokens({1}), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("(1,0)"), std::string::npos);
  }
}

TEST(BuildMaskSet, ToyInversionYieldsFullFamily) {
  const ToyDenoiser net;
  const SyntheticScene scene = moving_square(4, 64, 64);
  const auto inversion = invert(net, scene.video, scene.prompt, make_linear_schedule(50));
  const auto align = align_token(scene.prompt, scene.object, toy_tokenize(scene.prompt));
  const auto maps = inversion.cache.cross_attention_maps();
  const MaskSet set = build_mask_set(maps, 50, 5, align, {});
  EXPECT_EQ(set.candidates().size(), 250u);
  for (const auto& c : set.candidates()) EXPECT_EQ(c.grid.dims(), (Shape{4, 64, 64}));

  // The same family comes back from the dump directory.
  TempDir dir("maskset");
  write_cross_attention_dumps(inversion, net, scene.prompt, dir.path());
  const MaskSet from_disk = build_mask_set(dir.path(), align, {});
  for (std::size_t i = 0; i < 250; ++i) {
    EXPECT_EQ(from_disk.candidates()[i].grid, set.candidates()[i].grid);
  }
}

TEST(ValidateCrossAttention, RowSums) {
  Gen gen(28);
  const auto good = map_of(gen.stochastic({2, 4, 5}), 2, 2);
  EXPECT_NO_THROW(validate_cross_attention(good));
  auto bad = good;
  bad.tensor[0] += 0.01f;
  EXPECT_THROW(validate_cross_attention(bad), Error);
  EXPECT_NO_THROW(validate_cross_attention(bad, 2e-2));
}
